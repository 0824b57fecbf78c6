"""Sequential stochastic proximal coordinate descent with exact gradients."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from ._rng import coord_for
from .objective import ProblemInstance, eval_F, full_F, grad_full, psi_scalar, row_dot
from .prox import dhat, what

REFRESH_EVERY = 1000


@dataclass
class SolverConfig:
    gamma: float
    T: int
    seed: int = 0
    record_every: int = 1
    x0: np.ndarray | None = None
    check_gamma: bool = True

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")

    def echo(self) -> dict:
        return {"gamma": self.gamma, "T": self.T, "seed": self.seed,
                "record_every": self.record_every}


@dataclass(frozen=True)
class UpdateRecord:
    t: int
    k: int
    g: float
    g_tilde: float
    dx: float
    F: float
    w_hat: float


@dataclass(eq=False)
class Trace:
    """Columnar record of committed updates.

    Row i describes update ``t[i]`` (0-based); ``F[i]`` is F after that update
    and ``w_hat`` is evaluated at the gradient the update actually used.
    With ``record_every = r`` only updates r-1, 2r-1, ... are kept.
    """

    t: np.ndarray
    k: np.ndarray
    g: np.ndarray
    g_tilde: np.ndarray
    dx: np.ndarray
    F: np.ndarray
    w_hat: np.ndarray
    x0: np.ndarray
    x_final: np.ndarray
    F0: float
    config: dict = field(default_factory=dict)

    COLUMNS = ("t", "k", "g", "g_tilde", "dx", "F", "w_hat")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def complete(self) -> bool:
        return self.config.get("record_every", 1) == 1

    def records(self):
        cols = [getattr(self, c) for c in self.COLUMNS]
        for row in zip(*cols):
            yield self._record(row)

    def _record(self, row):
        return UpdateRecord(int(row[0]), int(row[1]), *(float(v) for v in row[2:7]))

    def to_csv(self, path) -> None:
        cols = [getattr(self, c) for c in self.COLUMNS]
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for row in zip(*cols):
                w.writerow([repr(v.item()) if isinstance(v, np.floating) else int(v) for v in row])


def read_trace_csv(path) -> dict:
    """Load a trace CSV into a dict of numpy columns."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for i, name in enumerate(header):
        vals = [r[i] for r in body]
        out[name] = np.array(vals, dtype=np.int64 if name in ("t", "k", "q") else np.float64)
    return out


def _l_max(p: ProblemInstance) -> float:
    d = p.quad.data
    return float(np.abs(d).max()) if len(d) else 0.0


def check_gamma(p: ProblemInstance, gamma: float) -> None:
    lm = _l_max(p)
    if gamma < lm:
        raise ValueError(f"gamma={gamma} is below l_max={lm}")


def initial_point(p: ProblemInstance, x0) -> np.ndarray:
    if x0 is None:
        return np.zeros(p.n)
    x0 = np.array(x0, dtype=np.float64)
    if x0.shape != (p.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({p.n},)")
    return x0


@njit(cache=True, nogil=True)
def _seq_kernel(indptr, indices, data, b, c0, diag, kind, lam, gamma, T, seed, x,
                rec_every, o_t, o_k, o_g, o_gt, o_dx, o_F, o_w):
    n = len(b)
    F = full_F(indptr, indices, data, b, c0, kind, lam, x)
    # exact re-evaluation costs O(nnz), so large problems refresh less often
    refresh = max(REFRESH_EVERY, n)
    r = 0
    for t in range(T):
        k = coord_for(seed, t, n)
        g = row_dot(indptr, indices, data, x, k) + b[k]
        xk = x[k]
        d = dhat(g, xk, gamma, kind[k], lam[k])
        w = what(g, xk, gamma, kind[k], lam[k])
        x[k] = xk + d
        F += g * d + 0.5 * diag[k] * d * d + psi_scalar(x[k], kind[k], lam[k]) - psi_scalar(xk, kind[k], lam[k])
        if (t + 1) % refresh == 0:
            F = full_F(indptr, indices, data, b, c0, kind, lam, x)
        if (t + 1) % rec_every == 0:
            o_t[r] = t
            o_k[r] = k
            o_g[r] = g
            o_gt[r] = g
            o_dx[r] = d
            o_F[r] = F
            o_w[r] = w
            r += 1
    return r


def _empty_columns(m: int):
    return (np.empty(m, np.int64), np.empty(m, np.int64), np.empty(m), np.empty(m),
            np.empty(m), np.empty(m), np.empty(m))


def run_sequential(p: ProblemInstance, cfg: SolverConfig) -> Trace:
    """Run T exact-gradient proximal coordinate steps from cfg.x0."""
    if cfg.check_gamma:
        check_gamma(p, cfg.gamma)
    x0 = initial_point(p, cfg.x0)
    x = x0.copy()
    q = p.quad
    cols = _empty_columns(cfg.T // cfg.record_every)
    m = _seq_kernel(q.indptr, q.indices, q.data, q.b, q.c0, q.diag, p.reg_kind, p.reg_lam,
                    float(cfg.gamma), int(cfg.T), np.uint64(cfg.seed), x, int(cfg.record_every), *cols)
    cols = [c[:m] for c in cols]
    return Trace(*cols, x0=x0, x_final=x, F0=eval_F(p, x0), config=cfg.echo())


# -- progress certificates and rate curves -----------------------------------

@njit(cache=True)
def _prg(g, x, gamma, kind, lam):
    s = 0.0
    for j in range(len(x)):
        s += what(g[j], x[j], gamma, kind[j], lam[j])
    return s


def progress_sum(p: ProblemInstance, x, gamma: float) -> float:
    """Sum over coordinates of w_hat at the exact gradient."""
    x = np.asarray(x, dtype=np.float64)
    return float(_prg(grad_full(p, x), x, float(gamma), p.reg_kind, p.reg_lam))


def progress_lower_bound(p: ProblemInstance, x, gamma: float, R: float | None = None) -> dict:
    """Compare the full-sweep progress certificate with its guaranteed minimum.

    Strongly convex case: PRG >= mu_F/(mu_F + gamma - mu_f) * (F - F*).
    Otherwise, given a level-set radius R: PRG >= min(1/2, (F-F*)/(2 gamma R^2)) * (F-F*).
    """
    if p.f_star is None:
        raise ValueError("progress bound needs f_star")
    prg = progress_sum(p, x, gamma)
    gap = eval_F(p, x) - p.f_star
    if p.mu_F is not None and p.mu_F > 0 and p.mu_f is not None:
        alpha = p.mu_F / (p.mu_F + gamma - p.mu_f)
        bound = alpha * gap
        case = "strongly_convex"
    elif R is not None and R > 0:
        bound = min(0.5, gap / (2.0 * gamma * R * R)) * gap
        case = "convex"
    else:
        raise ValueError("need mu_f and mu_F > 0, or a level-set radius R")
    ok = prg >= bound - 1e-9 * max(1.0, abs(gap))
    return {"prg": prg, "alpha_F": bound, "ok": bool(ok), "case": case}


def rate_alpha(mu_F: float, mu_f: float, gamma: float) -> float:
    return mu_F / (mu_F + gamma - mu_f)


def rate_bound_strongly_convex(mu_F, mu_f, gamma, n, T, F0, asynchronous: bool = True):
    """F0 * (1 - c*alpha/n)^T with c = 1/3 for the asynchronous bound, 1 otherwise.

    T may be an array of update counts.
    """
    if gamma < mu_f:
        raise ValueError("gamma must be >= mu_f")
    c = 1.0 / 3.0 if asynchronous else 1.0
    factor = 1.0 - c * rate_alpha(mu_F, mu_f, gamma) / n
    return F0 * np.power(factor, np.asarray(T, dtype=np.float64))


def rate_bound_convex(F0, gamma, n, T, R):
    """F0 / (1 + min(1/(12n), F0/(24 n gamma R^2)) * T), the convex asynchronous bound."""
    rate = min(1.0 / (12.0 * n), F0 / (24.0 * n * gamma * R * R))
    return F0 / (1.0 + rate * np.asarray(T, dtype=np.float64))


def level_set_radius(p: ProblemInstance, F0: float) -> float:
    """sqrt(2 (F0 - F*) / mu_f), a level-set radius for strongly convex smooth parts."""
    if not p.mu_f or p.f_star is None:
        raise ValueError("radius needs mu_f > 0 and f_star")
    return float(np.sqrt(2.0 * max(F0 - p.f_star, 0.0) / p.mu_f))
