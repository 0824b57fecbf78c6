"""Per-update progress inequalities and the gradient-error bound, checked on traces."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..lipschitz import profile_of
from ..objective import ProblemInstance, full_F, row_dot
from ..prox import dhat, what
from ..seq_solver import Trace, rate_alpha
from .simulate import run_async_sim, scv_uniform

LEMMA_NAMES = ("what_minus_error", "quadratic_minus_error", "combined")


@njit(cache=True, nogil=True)
def _replay(indptr, indices, data, b, c0, kind, lam, gamma, x, ks, gts, gs, dxs, out):
    """Replay a trace, filling residual rows; returns the first inconsistent row or -1."""
    F = full_F(indptr, indices, data, b, c0, kind, lam, x)
    for t in range(len(ks)):
        k = ks[t]
        g = row_dot(indptr, indices, data, x, k) + b[k]
        if abs(g - gs[t]) > 1e-9 * (1.0 + abs(g)):
            return t
        gt = gts[t]
        d = dhat(gt, x[k], gamma, kind[k], lam[k])
        if abs(d - dxs[t]) > 1e-9 * (1.0 + abs(d)):
            return t
        w = what(g, x[k], gamma, kind[k], lam[k])
        x[k] += d
        F1 = full_F(indptr, indices, data, b, c0, kind, lam, x)
        drop = F - F1
        err = (g - gt) * (g - gt) / gamma
        scale = max(1.0, abs(F))
        out[0, t] = (drop - (w - err)) / scale
        out[1, t] = (drop - (0.25 * gamma * d * d - err)) / scale
        out[2, t] = (drop - (0.5 * w + 0.125 * gamma * d * d - err)) / scale
        F = F1
    return -1


def check_progress_lemmas(trace: Trace, p: ProblemInstance, gamma: float, tol: float = 1e-9) -> dict:
    """Replay a complete trace and evaluate the three per-update progress inequalities.

    For update t with exact gradient g, used gradient g_tilde and step dx:

        drop >= w_hat(g) - (g - g_tilde)^2 / gamma
        drop >= gamma/4 * dx^2 - (g - g_tilde)^2 / gamma
        drop >= w_hat(g)/2 + gamma/8 * dx^2 - (g - g_tilde)^2 / gamma

    Residuals are divided by max(1, |F before|); the check passes when every
    residual is >= -tol.
    """
    if not trace.complete:
        raise ValueError("lemma replay needs a trace recorded at every update")
    qv = p.quad
    x = trace.x0.copy()
    res = np.empty((3, len(trace)))
    bad = _replay(qv.indptr, qv.indices, qv.data, qv.b, qv.c0, p.reg_kind, p.reg_lam, float(gamma),
                  x, trace.k, trace.g_tilde, trace.g, trace.dx, res)
    if bad >= 0:
        raise ValueError(f"trace replay diverges from the recorded update at row {bad}")
    if len(trace) and not np.allclose(x, trace.x_final, rtol=1e-9, atol=1e-12):
        raise ValueError("replayed final point differs from the recorded one")
    mins = {name: (float(res[i].min()) if len(trace) else 0.0) for i, name in enumerate(LEMMA_NAMES)}
    worst_t = {name: (int(trace.t[int(res[i].argmin())]) if len(trace) else -1)
               for i, name in enumerate(LEMMA_NAMES)}
    return {
        "min_residual": mins,
        "worst_t": worst_t,
        "ok": bool(all(v >= -tol for v in mins.values())),
        "updates": len(trace),
    }


def scc_window_sum(v: np.ndarray, q: int) -> np.ndarray:
    """For each t, the sum of v[s] over s in [t-2q+1, t+q-1] without s = t, clipped to the run."""
    T = len(v)
    c = np.concatenate([[0.0], np.cumsum(v)])
    t = np.arange(T)
    lo = np.clip(t - 2 * q + 1, 0, T)
    hi = np.clip(t + q, 0, T)
    total = c[hi] - c[lo]
    inside = (lo <= t) & (t < hi)
    return total - np.where(inside, v, 0.0)


def scv_error_bound_check(p: ProblemInstance, gamma: float, q: int, T: int, seeds: int,
                          x0=None, min_fraction: float = 0.95) -> dict:
    """Monte-Carlo check of the gradient-error bound under common-value staleness.

    Compares E[(g - g_tilde)^2] at time t with
    3 q L_res^2 / n * sum over s in [t-2q+1, t+q-1], s != t, of E[dx_s^2],
    on times t in [2q, T-q).  Means are over ``seeds`` independent runs and the
    right side gets a (1 + 3/sqrt(seeds)) Monte-Carlo allowance.
    """
    if seeds < 100:
        raise ValueError("the Monte-Carlo check needs at least 100 seeds")
    if T < 3 * q + 1:
        raise ValueError("T is too short for the window")
    policy = scv_uniform(q)
    err = np.zeros(T)
    dx2 = np.zeros(T)
    for s in range(seeds):
        tr = run_async_sim(p, gamma, T, policy, seed=s, x0=x0)
        err += tr.grad_err_sq
        dx2 += tr.dx ** 2
    err /= seeds
    dx2 /= seeds
    l_res = profile_of(p).l_res
    rhs = 3.0 * q * l_res ** 2 / p.n * scc_window_sum(dx2, q)
    times = np.arange(2 * q, T - q)
    slack = 1.0 + 3.0 / math.sqrt(seeds)
    hold = err[times] <= rhs[times] * slack
    frac = float(hold.mean()) if len(times) else 1.0

    alpha = 0.0
    if p.mu_F and p.mu_f is not None:
        alpha = rate_alpha(p.mu_F, p.mu_f, gamma)
    decay = (1.0 - alpha / (2.0 * p.n)) ** (T - 1 - np.arange(T))
    progress_side = float(np.sum(gamma / 8.0 * dx2 * decay))
    error_side = float(np.sum(err / gamma * decay))
    return {
        "q": q,
        "seeds": seeds,
        "T": T,
        "fraction_ok": frac,
        "ok": bool(frac >= min_fraction),
        "max_ratio": float(np.max(err[times] / np.maximum(rhs[times], 1e-300))) if len(times) else 0.0,
        "amortization": {
            "progress_side": progress_side,
            "error_side": error_side,
            "holds": bool(progress_side >= error_side),
        },
    }
