"""Update schedules of an asynchronous run and their derived orderings.

Every update has a start instant (when its core picks a coordinate) and a
commit instant (when its write lands).  All positions below come from one
global event list sorted by ``(instant, core, type)`` with commits ordered
before starts at equal keys, so a core's commit always precedes its own next
start.

Each core also contributes a virtual *bootstrap* commit at its first start
instant.  It stands for the write its core would have made just before the
observed window and counts toward the overlap bound q, but it is not an
update and holds no SCC position.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from numba import njit

from .._rng import coordinate_stream

_COMMIT, _START = 0, 1


@dataclass(frozen=True)
class SpanModel:
    """Distribution of update durations.

    ``constant(d)``, ``uniform(lo, hi)`` or ``bimodal(d1, d2, p)`` where the
    bimodal model draws d1 with probability p and d2 otherwise.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        k, pr = self.kind, tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", pr)
        if k == "constant" and len(pr) == 1 and pr[0] > 0:
            return
        if k == "uniform" and len(pr) == 2 and 0 < pr[0] <= pr[1]:
            return
        if k == "bimodal" and len(pr) == 3 and pr[0] > 0 and pr[1] > 0 and 0 <= pr[2] <= 1:
            return
        raise ValueError(f"invalid span model {k}{pr}")

    @classmethod
    def parse(cls, text: str) -> "SpanModel":
        """Parse ``kind:a,b,...``, e.g. ``bimodal:1,10,0.5``."""
        kind, _, rest = text.partition(":")
        params = tuple(float(v) for v in rest.split(",")) if rest else ()
        return cls(kind.strip(), params)

    @property
    def min_span(self) -> float:
        return min(self.params[:2]) if self.kind != "constant" else self.params[0]

    @property
    def max_span(self) -> float:
        return max(self.params[:2]) if self.kind != "constant" else self.params[0]

    def draw(self, rng, size: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(size, self.params[0])
        if self.kind == "uniform":
            return rng.uniform(self.params[0], self.params[1], size)
        d1, d2, p = self.params
        return np.where(rng.random(size) < p, d1, d2)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Per-update core, start, commit and coordinate, plus derived orderings.

    Updates may be listed in any order; ``start_order`` lists them by start.
    """

    core: np.ndarray
    start: np.ndarray
    commit: np.ndarray
    coord: np.ndarray

    def __post_init__(self):
        for name in ("core", "coord"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        for name in ("start", "commit"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        T = len(self.start)
        if not (len(self.core) == len(self.commit) == len(self.coord) == T):
            raise ValueError("schedule arrays must have equal length")
        if np.any(self.commit <= self.start):
            raise ValueError("every update must commit after it starts")

    @property
    def T(self) -> int:
        return len(self.start)

    @property
    def span(self) -> np.ndarray:
        return self.commit - self.start

    @cached_property
    def _events(self):
        T = self.T
        cores, inv = np.unique(self.core, return_inverse=True)
        first = np.full(len(cores), np.inf)
        np.minimum.at(first, inv, self.start)
        # columns: instant, core, type, owner (-1 for bootstrap)
        inst = np.concatenate([self.commit, self.start, first])
        core = np.concatenate([self.core, self.core, cores])
        typ = np.concatenate([np.full(T, _COMMIT), np.full(T, _START), np.full(len(cores), _COMMIT)])
        owner = np.concatenate([np.arange(T), np.arange(T), np.full(len(cores), -1)])
        order = np.lexsort((owner, typ, core, inst))
        pos = np.empty(len(order), np.int64)
        pos[order] = np.arange(len(order))
        spos = pos[T:2 * T]
        cpos = pos[:T]
        bpos = np.sort(pos[2 * T:])
        return spos, cpos, bpos

    @cached_property
    def start_order(self) -> np.ndarray:
        return np.argsort(self._events[0], kind="stable")

    @cached_property
    def commit_order(self) -> np.ndarray:
        return np.argsort(self._events[1], kind="stable")

    @cached_property
    def start_rank(self) -> np.ndarray:
        r = np.empty(self.T, np.int64)
        r[self.start_order] = np.arange(self.T)
        return r

    @cached_property
    def scc_time(self) -> np.ndarray:
        """SCC position of each update.

        Per coordinate, the updates sorted by commit take that coordinate's
        start positions in increasing order.
        """
        out = np.empty(self.T, np.int64)
        srank = self.start_rank
        # both sorts group by coordinate, so the groups line up slot for slot
        by_commit = np.lexsort((self._events[1], self.coord))
        by_start = np.lexsort((srank, self.coord))
        out[by_commit] = srank[by_start]
        return out

    @cached_property
    def scc_order(self) -> np.ndarray:
        return np.argsort(self.scc_time, kind="stable")

    @cached_property
    def _overlap(self):
        spos, cpos, bpos = self._events
        corder = self.commit_order
        csorted = cpos[corder]
        lo = np.searchsorted(csorted, spos, side="right")
        hi = np.searchsorted(csorted, cpos, side="left")
        boot = np.searchsorted(bpos, cpos, side="left") - np.searchsorted(bpos, spos, side="right")
        return lo, hi, boot

    @cached_property
    def overlap(self) -> np.ndarray:
        """Number of commits (bootstrap ones included) inside each update's span."""
        lo, hi, boot = self._overlap
        return (hi - lo) + boot

    @property
    def q(self) -> int:
        return int(self.overlap.max()) if self.T else 0

    def interferers(self, u: int) -> np.ndarray:
        """Updates whose commit lies strictly inside the span of update u."""
        lo, hi, _ = self._overlap
        return self.commit_order[lo[u]:hi[u]]

    def to_records(self) -> list:
        return [{"core": int(self.core[u]), "start": float(self.start[u]),
                 "commit": float(self.commit[u]), "coord": int(self.coord[u])}
                for u in range(self.T)]

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_records()), encoding="utf-8")

    @classmethod
    def from_records(cls, recs: list) -> "Schedule":
        return cls(core=[r["core"] for r in recs], start=[r["start"] for r in recs],
                   commit=[r["commit"] for r in recs], coord=[r["coord"] for r in recs])

    @classmethod
    def from_json(cls, path) -> "Schedule":
        return cls.from_records(json.loads(Path(path).read_text(encoding="utf-8")))


def generate_schedule(n: int, T: int, cores: int, span_model: SpanModel | str,
                      seed: int = 0) -> Schedule:
    """Back-to-back updates on each core; the first T by start form the schedule.

    The coordinate of the u-th update in start order is drawn from the shared
    counter-keyed stream, so it matches the u-th update of a sequential run.
    """
    if cores < 1:
        raise ValueError("cores must be >= 1")
    if n < 1 or T < 0:
        raise ValueError("need n >= 1 and T >= 0")
    if isinstance(span_model, str):
        span_model = SpanModel.parse(span_model)
    rng = np.random.default_rng([seed, cores, T])
    offsets = rng.uniform(0.0, span_model.min_span, cores)
    spans = span_model.draw(rng, (cores, T)) if T else np.zeros((cores, 0))
    commits = offsets[:, None] + np.cumsum(spans, axis=1)
    # each start is exactly the previous commit on that core, so rounding cannot fake an overlap
    starts = np.concatenate([offsets[:, None], commits[:, :-1]], axis=1)[:, :T]
    core = np.repeat(np.arange(cores), T)
    starts, commits = starts.ravel(), commits.ravel()
    keep = np.lexsort((core, starts))[:T]
    return Schedule(core=core[keep], start=starts[keep], commit=commits[keep],
                    coord=coordinate_stream(seed, T, n))


@njit(cache=True)
def _range_check(rank, lo, hi, corder, q):
    ok = True
    worst_lo = 0
    worst_hi = 0
    for u in range(len(rank)):
        t = rank[u]
        for i in range(lo[u], hi[u]):
            s = rank[corder[i]]
            if s < t - 2 * q + 1:
                ok = False
                worst_lo = max(worst_lo, t - 2 * q + 1 - s)
            if s > t + q - 1:
                ok = False
                worst_hi = max(worst_hi, s - (t + q - 1))
    return ok, worst_lo, worst_hi


def interference_report(schedule: Schedule, with_sets: bool = True) -> dict:
    """Check that every interferer lies in the window [t-2q+1, t+q-1].

    ``scc_range_ok`` indexes updates by SCC time, which is the reading the
    range property is stated for.  ``start_range_ok`` repeats the check with
    start positions for comparison.
    """
    q = schedule.q
    lo, hi, _ = schedule._overlap
    corder = schedule.commit_order
    scc_ok, scc_lo, scc_hi = _range_check(schedule.scc_time, lo, hi, corder, q)
    st_ok, _, _ = _range_check(schedule.start_rank, lo, hi, corder, q)
    report = {
        "q_emp": q,
        "scc_range_ok": bool(scc_ok),
        "scc_range_excess": (int(scc_lo), int(scc_hi)),
        "start_range_ok": bool(st_ok),
        "uou_tv": uou_diagnostic(schedule),
    }
    if with_sets:
        scc = schedule.scc_time
        report["interferers"] = {int(scc[u]): sorted(int(scc[a]) for a in schedule.interferers(u))
                                 for u in range(schedule.T)}
    return report


def uou_diagnostic(schedule: Schedule) -> list:
    """Total-variation distance between coordinate histograms of start and commit prefixes.

    Evaluated at the quarter, half and three-quarter prefixes of the run.
    Drift away from zero shows commit order favouring short updates.
    """
    T = schedule.T
    if T == 0:
        return []
    ncoord = int(schedule.coord.max()) + 1
    by_start = schedule.coord[schedule.start_order]
    by_commit = schedule.coord[schedule.commit_order]
    out = []
    for frac in (0.25, 0.5, 0.75):
        m = max(1, int(frac * T))
        hs = np.bincount(by_start[:m], minlength=ncoord) / m
        hc = np.bincount(by_commit[:m], minlength=ncoord) / m
        out.append(float(0.5 * np.abs(hs - hc).sum()))
    return out


def scc_order(schedule: Schedule) -> np.ndarray:
    """Updates listed by SCC time."""
    return schedule.scc_order
