"""Commit-ordered replay of asynchronous coordinate descent with stale reads.

Update t (0-based) runs after t commits.  For each coordinate l it reads with
a staleness c in [1, q+1]: the value of x_l after max(0, t+1-c) commits, so
c = 1 is current and c = q+1 may miss the q most recent commits.  The gradient
of that snapshot is recomputed from its CSR row, and the step is applied to
the latest value of the chosen coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, uint64

from .._rng import STREAM_STALE, below, coord_for, key, mix64, subkey
from ..objective import ProblemInstance, eval_F, full_F, psi_scalar, row_dot
from ..prox import dhat, what
from ..seq_solver import Trace, UpdateRecord, check_gamma, initial_point, REFRESH_EVERY

POLICY_CODES = {"synchronous": 0, "uniform_random": 1, "scv_uniform": 2, "adversarial": 3}
POLICY_ALIASES = {"sync": "synchronous", "rand": "uniform_random", "scv": "scv_uniform",
                  "adversarial": "adversarial", "adv": "adversarial"}
ADV_PASSES = 2


@dataclass(frozen=True)
class DelayPolicy:
    """Rule for per-coordinate read staleness.

    synchronous: every read is current.
    uniform_random: c drawn uniformly from [1, q+1], keyed by the update index,
        the coordinate read and the coordinate being updated.
    scv_uniform: the same draw without the updated coordinate in the key, so the
        snapshot does not depend on which coordinate the update picks.
    adversarial: for each coordinate in the window, choose how many of its
        recent writes to hide so the updated coordinate ends as close as
        possible to ``target_amplitude * x0``.
    """

    kind: str = "synchronous"
    q: int = 0
    target_amplitude: float = 1.0

    def __post_init__(self):
        kind = POLICY_ALIASES.get(self.kind, self.kind)
        if kind not in POLICY_CODES:
            raise ValueError(f"unknown policy {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.q < 0:
            raise ValueError("q must be >= 0")
        if kind == "synchronous":
            object.__setattr__(self, "q", 0)

    @property
    def code(self) -> int:
        return POLICY_CODES[self.kind]

    @property
    def max_staleness(self) -> int:
        return self.q + 1


def synchronous() -> DelayPolicy:
    return DelayPolicy("synchronous", 0)


def uniform_random(q: int) -> DelayPolicy:
    return DelayPolicy("uniform_random", q)


def scv_uniform(q: int) -> DelayPolicy:
    return DelayPolicy("scv_uniform", q)


def adversarial_policy(q: int, target_amplitude: float = 1.0) -> DelayPolicy:
    """Adversarial staleness; with q = 0 it cannot hide anything and acts synchronously."""
    return DelayPolicy("adversarial", q, target_amplitude)


@dataclass(eq=False)
class AsyncTrace(Trace):
    """Trace plus gradient error, realized staleness and a staleness digest.

    ``q[i]`` is the largest staleness minus one over the coordinates whose
    window writes the read could have missed; ``digest`` hashes the chosen
    (coordinate, staleness) pairs.
    """

    grad_err_sq: np.ndarray = None
    q: np.ndarray = None
    digest: np.ndarray = None

    COLUMNS = ("t", "k", "g", "g_tilde", "grad_err_sq", "dx", "F", "w_hat", "q")

    def _record(self, row):
        t, k, g, gt, _, dx, F, w, _ = row
        return UpdateRecord(int(t), int(k), float(g), float(gt), float(dx), float(F), float(w))


@njit(cache=True, nogil=True)
def _staleness(code, seed, q, t, l, k):
    if code == 1:
        return 1 + below(subkey(subkey(key(seed, STREAM_STALE, t), l), k), q + 1)
    if code == 2:
        return 1 + below(subkey(key(seed, STREAM_STALE, t), l), q + 1)
    return 1


@njit(cache=True, nogil=True)
def _sim_kernel(indptr, indices, data, b, c0, diag, kind, lam, gamma, T, seed, x, x0, amp,
                code, q, rec_every, o_t, o_k, o_g, o_gt, o_e, o_dx, o_F, o_w, o_q, o_h):
    n = len(b)
    xs = x.copy()
    # ring of the last q commits: coordinate, commit number, value before
    rc = np.full(max(q, 1), -1, np.int64)
    rn = np.full(max(q, 1), -1, np.int64)
    rv = np.zeros(max(q, 1))
    inrow = np.zeros(n, np.int64)
    rowval = np.zeros(n)
    cl = np.zeros(n, np.int64)
    head = np.full(n, -1, np.int64)
    tail = np.full(n, -1, np.int64)
    cur = np.zeros(n)
    dl = np.zeros(max(q, 1), np.int64)
    nxt = np.full(max(q, 1), -1, np.int64)
    F = full_F(indptr, indices, data, b, c0, kind, lam, x)
    # exact re-evaluation costs O(nnz), so large problems refresh less often
    refresh = max(REFRESH_EVERY, n)
    r = 0
    for t in range(T):
        k = coord_for(seed, t, n)
        g = row_dot(indptr, indices, data, x, k) + b[k]
        h = mix64(uint64(t))
        smax = 1
        if q > 0 and code != 0:
            for i in range(indptr[k], indptr[k + 1]):
                inrow[indices[i]] = 1
                rowval[indices[i]] = data[i]
            w = min(t, q)
            if code == 3:
                # per-coordinate lists of window writes, newest first
                nd = 0
                for i in range(w):
                    s = (t - 1 - i) % q
                    l = rc[s]
                    if inrow[l] == 0:
                        continue
                    if head[l] == -1:
                        head[l] = s
                        dl[nd] = l
                        nd += 1
                        cur[l] = 0.0
                        cl[l] = 1
                    else:
                        nxt[tail[l]] = s
                    tail[l] = s
                    nxt[s] = -1
                target = amp * x0[k]
                gt_cur = g
                for _ in range(ADV_PASSES):
                    for a in range(nd):
                        l = dl[a]
                        base = gt_cur - cur[l]
                        best = abs(x[k] + dhat(base, x[k], gamma, kind[k], lam[k]) - target)
                        bd = 0.0
                        bs = -1
                        s = head[l]
                        while s != -1:
                            cand = rowval[l] * (rv[s] - x[l])
                            val = abs(x[k] + dhat(base + cand, x[k], gamma, kind[k], lam[k]) - target)
                            if val < best:
                                best = val
                                bd = cand
                                bs = s
                            s = nxt[s]
                        cur[l] = bd
                        gt_cur = base + bd
                        cl[l] = 1 if bs == -1 else t + 1 - rn[bs]
                for a in range(nd):
                    head[dl[a]] = -1
            else:
                for i in range(w):
                    l = rc[(t - 1 - i) % q]
                    if inrow[l] == 1:
                        cl[l] = _staleness(code, seed, q, t, l, k)
            # build the stale snapshot: newest to oldest, hidden writes roll back
            for i in range(w):
                s = (t - 1 - i) % q
                l = rc[s]
                if inrow[l] == 1 and rn[s] >= t + 1 - cl[l]:
                    xs[l] = rv[s]
            for i in range(w):
                l = rc[(t - 1 - i) % q]
                if inrow[l] == 1 and cl[l] > 0:
                    if cl[l] > smax:
                        smax = cl[l]
                    h = mix64(h ^ (uint64(l) * uint64(0x9E3779B97F4A7C15) + uint64(cl[l])))
                    cl[l] = 0
        gt = row_dot(indptr, indices, data, xs, k) + b[k]
        if q > 0 and code != 0:
            for i in range(min(t, q)):
                l = rc[(t - 1 - i) % q]
                xs[l] = x[l]
            for i in range(indptr[k], indptr[k + 1]):
                inrow[indices[i]] = 0
        xk = x[k]
        d = dhat(gt, xk, gamma, kind[k], lam[k])
        wv = what(g, xk, gamma, kind[k], lam[k])
        x[k] = xk + d
        xs[k] = x[k]
        F += g * d + 0.5 * diag[k] * d * d + psi_scalar(x[k], kind[k], lam[k]) - psi_scalar(xk, kind[k], lam[k])
        if (t + 1) % refresh == 0:
            F = full_F(indptr, indices, data, b, c0, kind, lam, x)
        if q > 0:
            s = t % q
            rc[s] = k
            rn[s] = t
            rv[s] = xk
        if (t + 1) % rec_every == 0:
            o_t[r] = t
            o_k[r] = k
            o_g[r] = g
            o_gt[r] = gt
            o_e[r] = (g - gt) * (g - gt)
            o_dx[r] = d
            o_F[r] = F
            o_w[r] = wv
            o_q[r] = smax - 1
            o_h[r] = h
            r += 1
    return r


def run_async_sim(p: ProblemInstance, gamma: float, T: int, policy: DelayPolicy, seed: int = 0,
                  x0=None, record_every: int = 1, check: bool = True) -> AsyncTrace:
    """Simulate T commits of asynchronous proximal coordinate descent.

    ``check=False`` skips the gamma >= l_max requirement, which is only useful
    for producing traces that are meant to violate the progress lemmas.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if check:
        check_gamma(p, gamma)
    x0 = initial_point(p, x0)
    x = x0.copy()
    qv = p.quad
    m = T // record_every
    cols = (np.empty(m, np.int64), np.empty(m, np.int64), np.empty(m), np.empty(m), np.empty(m),
            np.empty(m), np.empty(m), np.empty(m), np.empty(m, np.int64), np.empty(m, np.uint64))
    r = _sim_kernel(qv.indptr, qv.indices, qv.data, qv.b, qv.c0, qv.diag, p.reg_kind, p.reg_lam,
                    float(gamma), int(T), np.uint64(seed), x, x0, float(policy.target_amplitude),
                    policy.code, int(policy.q), int(record_every), *cols)
    t, k, g, gt, e, dx, F, w, qq, h = (c[:r] for c in cols)
    config = {"gamma": float(gamma), "T": int(T), "seed": int(seed), "record_every": int(record_every),
              "policy": policy.kind, "q": int(policy.q)}
    return AsyncTrace(t, k, g, gt, dx, F, w, x0=x0, x_final=x, F0=eval_F(p, x0), config=config,
                      grad_err_sq=e, q=qq, digest=h)
