"""Multithreaded asynchronous coordinate descent on a shared vector.

Workers are numba kernels that release the GIL and run on ordinary Python
threads.  Coordinate values are read and written with word-atomic loads and
stores; a global atomic counter hands out commit tickets and ends the run.
Without regularizers a step is a single atomic add; otherwise the coordinate's
stripe lock is held while the value is re-read and rewritten.
"""
from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from ._atomics import fetch_add_f64, fetch_add_i64, load_f64, load_i64, sched_yield, store_f64, try_lock, unlock, usleep
from ._rng import coord_for
from .objective import ProblemInstance, eval_F, full_F
from .prox import dhat
from .seq_solver import check_gamma, initial_point

N_STRIPES = 4096


@dataclass
class RuntimeConfig:
    threads: int = 1
    gamma: float = 1.0
    T: int = 0
    seed: int = 0
    smooth_only: bool = False
    snapshot_stride: int = 0
    log: bool = False
    x0: np.ndarray | None = None
    # test hook: worker ``stall_tid`` sleeps ``stall_us`` mid-update every ``stall_every`` updates
    stall_tid: int = -1
    stall_every: int = 0
    stall_us: int = 0

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.T < 0:
            raise ValueError("T must be >= 0")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be >= 0")


@dataclass(eq=False)
class UpdateLog:
    """Per-ticket record of what each commit did."""

    coord: np.ndarray
    pre: np.ndarray
    post: np.ndarray
    dx: np.ndarray
    start: np.ndarray
    tid: np.ndarray


@dataclass(eq=False)
class RunResult:
    x_final: np.ndarray
    final_F: float
    F_samples: np.ndarray
    F_sample_updates: np.ndarray
    wall_ms: float
    updates: int
    q_emp: int
    threads: int
    per_thread: np.ndarray
    overlap_hist: np.ndarray
    log: UpdateLog | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"final_F": self.final_F, "wall_ms": self.wall_ms, "q_emp": self.q_emp,
                "threads": self.threads, "updates": self.updates}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")


@njit(cache=True, nogil=True)
def _snapshot_F(indptr, indices, data, b, c0, kind, lam, x):
    # unsynchronized copy; an approximate in-flight value
    buf = np.empty(len(x))
    for j in range(len(x)):
        buf[j] = load_f64(x, j)
    return full_F(indptr, indices, data, b, c0, kind, lam, buf)


@njit(cache=True, nogil=True)
def _worker(tid, nthreads, indptr, indices, data, b, c0, kind, lam, gamma, T, seed, x,
            counter, locks, smooth_only, stride, snaps, log_on, l_j, l_pre, l_post, l_d, l_start,
            l_tid, stall_tid, stall_every, stall_us, stats, hist):
    n = len(b)
    nstripes = len(locks)
    local = 0
    qmax = 0
    # start barrier: counter[1] counts workers that have arrived
    fetch_add_i64(counter, 1, 1)
    while load_i64(counter, 1) < nthreads:
        sched_yield()
    while True:
        start = load_i64(counter, 0)
        if start >= T:
            break
        j = coord_for(seed, local * nthreads + tid, n)
        s = 0.0
        for i in range(indptr[j], indptr[j + 1]):
            s += data[i] * load_f64(x, indices[i])
        g = s + b[j]
        if stall_tid == tid and stall_every > 0 and (local + 1) % stall_every == 0:
            usleep(stall_us)
        if smooth_only:
            ticket = fetch_add_i64(counter, 0, 1)
            if ticket >= T:
                break
            d = dhat(g, 0.0, gamma, 0, 0.0)
            pre = fetch_add_f64(x, j, d)
            post = pre + d
        else:
            stripe = j % nstripes
            while not try_lock(locks, stripe):
                sched_yield()
            ticket = fetch_add_i64(counter, 0, 1)
            if ticket >= T:
                unlock(locks, stripe)
                break
            pre = load_f64(x, j)
            d = dhat(g, pre, gamma, kind[j], lam[j])
            post = pre + d
            store_f64(x, j, post)
            unlock(locks, stripe)
        ov = ticket - start
        if ov > qmax:
            qmax = ov
        hist[min(ov, len(hist) - 1)] += 1
        local += 1
        if log_on:
            l_j[ticket] = j
            l_pre[ticket] = pre
            l_post[ticket] = post
            l_d[ticket] = d
            l_start[ticket] = start
            l_tid[ticket] = tid
        if stride > 0 and (ticket + 1) % stride == 0:
            snaps[(ticket + 1) // stride - 1] = _snapshot_F(indptr, indices, data, b, c0, kind, lam, x)
    stats[0] = local
    stats[1] = qmax


def run_parallel(p: ProblemInstance, cfg: RuntimeConfig) -> RunResult:
    """Run T asynchronous updates on ``cfg.threads`` worker threads."""
    check_gamma(p, cfg.gamma)
    if cfg.smooth_only and not p.smooth_only:
        raise ValueError("smooth_only needs every regularizer to be zero")
    x0 = initial_point(p, cfg.x0)
    x = x0.copy()
    q = p.quad
    P, T = cfg.threads, cfg.T
    counter = np.zeros(2, np.int64)
    locks = np.zeros(min(N_STRIPES, max(p.n, 1)), np.int64)
    stride = cfg.snapshot_stride
    snaps = np.full(T // stride if stride else 0, np.nan)
    m = T if cfg.log else 0
    logs = (np.full(m, -1, np.int64), np.empty(m), np.empty(m), np.empty(m),
            np.empty(m, np.int64), np.empty(m, np.int64))
    stats = np.zeros((P, 2), np.int64)
    hists = np.zeros((P, 64), np.int64)

    def target(tid):
        _worker(tid, P, q.indptr, q.indices, q.data, q.b, q.c0, p.reg_kind, p.reg_lam,
                float(cfg.gamma), int(T), np.uint64(cfg.seed), x, counter, locks, bool(cfg.smooth_only),
                int(stride), snaps, bool(cfg.log), *logs, int(cfg.stall_tid), int(cfg.stall_every),
                int(cfg.stall_us), stats[tid], hists[tid])

    threads = [threading.Thread(target=target, args=(tid,)) for tid in range(P)]
    t0 = time.perf_counter()
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    wall = (time.perf_counter() - t0) * 1000.0
    per_thread = stats[:, 0].copy()
    updates = int(per_thread.sum())
    log = UpdateLog(*logs) if cfg.log else None
    sample_at = stride * np.arange(1, len(snaps) + 1) if stride else np.zeros(0, np.int64)
    return RunResult(
        x_final=x,
        final_F=eval_F(p, x),
        F_samples=snaps,
        F_sample_updates=sample_at,
        wall_ms=wall,
        updates=updates,
        q_emp=int(stats[:, 1].max()) if P else 0,
        threads=P,
        per_thread=per_thread,
        overlap_hist=hists.sum(axis=0),
        log=log,
    )


def warm_up() -> None:
    """Compile the worker kernel on a tiny problem."""
    from .objective import SmoothPart

    p = ProblemInstance(SmoothPart.quadratic(np.eye(2)), ())
    run_parallel(p, RuntimeConfig(threads=1, gamma=1.0, T=4, smooth_only=True, log=True, snapshot_stride=2))
    run_parallel(p, RuntimeConfig(threads=1, gamma=1.0, T=4, smooth_only=False, log=True, snapshot_stride=2))


def verify_write_chain(log: UpdateLog, x0: np.ndarray, x_final: np.ndarray, ordered: bool) -> dict:
    """Check that the logged writes to each coordinate link up exactly.

    ``ordered=True`` demands that, in ticket order, every post value equals the
    next pre value, starting at x0 and ending at x_final.  With
    ``ordered=False`` the pairs only have to balance: the pre values plus
    x_final are the post values plus x0 as multisets, so no write was lost
    whatever order the commuting atomic adds landed in.
    """
    if log is None:
        raise ValueError("run was not logged")
    if np.any(log.coord < 0):
        raise ValueError("log has unfilled tickets")
    bad = []
    order = np.lexsort((np.arange(len(log.coord)), log.coord))
    coords, first = np.unique(log.coord[order], return_index=True)
    bounds = list(first) + [len(order)]
    for a, j in enumerate(coords):
        idx = order[bounds[a]:bounds[a + 1]]
        pre, post = log.pre[idx], log.post[idx]
        if ordered:
            ok = pre[0] == x0[j] and post[-1] == x_final[j] and np.array_equal(post[:-1], pre[1:])
        else:
            ok = _chain_any_order(pre, post, x0[j], x_final[j])
        if not ok:
            bad.append(int(j))
    untouched = np.setdiff1d(np.arange(len(x0)), coords)
    bad.extend(int(j) for j in untouched if x0[j] != x_final[j])
    if not ordered:
        exact = bool(np.all(log.post == log.pre + log.dx))
    else:
        exact = True
    return {"ok": not bad and exact, "bad_coords": bad[:20], "coords_checked": int(len(coords))}


def _chain_any_order(pre, post, start, end) -> bool:
    # every value written is later read back as some pre value, except the end
    return sorted(pre.tolist() + [end]) == sorted(post.tolist() + [start])
