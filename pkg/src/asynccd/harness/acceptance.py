"""The eight acceptance criteria as callable checks.

Each ``criterion_N`` returns a dict with at least ``ok``, ``seconds`` and
``limit_s`` (the wall-clock budget).  ``tests/test_acceptance.py`` and the
``check`` subcommand both run these.
"""
from __future__ import annotations

import math
import time
from statistics import median

import numpy as np

from ..async_sim import (
    Schedule,
    adversarial_policy,
    check_progress_lemmas,
    generate_schedule,
    interference_report,
    lower_bound_instance,
    run_async_sim,
    scv_error_bound_check,
    scv_uniform,
    synchronous,
    uniform_random,
)
from ..lipschitz import max_parallelism, profile_of
from ..objective import ProblemInstance, Regularizer, eval_F
from ..parallel_rt import RuntimeConfig, run_parallel, verify_write_chain
from ..prox import prox_invariant_report
from ..seq_solver import SolverConfig, rate_alpha, run_sequential
from .generators import gen_lasso, gen_random_quadratic

BENCH = dict(n=100, s=5, mu=0.1, lmax=1.0, seed=0)
RATE_T = 5000
RATE_SEEDS = 200
RATE_STRIDE = 100
RATE_SLACK = 1.10
REACH_FRACTION = 1e-3
REACH_FACTOR = 4.0

STALL_N = 1024
STALL_C = 2.0
STALL_PAIRS = 20
STALL_RATIO = 0.1

PAR_N = 100_000
PAR_S = 10
PAR_MU = 0.5
PAR_T_PER_N = 20
PAR_RUNS = 20
PAR_THREADS = 4
PAR_RTOL = 1e-4
LASSO_T_PER_N = 200

LIMITS = {1: 10.0, 2: 30.0, 3: 120.0, 4: 120.0, 5: 30.0, 6: 120.0, 7: 60.0, 8: 180.0}


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        out["seconds"] = time.perf_counter() - t0
        num = int(fn.__name__.rsplit("_", 1)[1])
        out["limit_s"] = LIMITS[num]
        out["in_time"] = out["seconds"] < LIMITS[num]
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def bench_problem() -> ProblemInstance:
    return gen_random_quadratic(BENCH["n"], BENCH["s"], BENCH["mu"], BENCH["lmax"], BENCH["seed"])


def _updates_to_reach(gap: np.ndarray, level: float):
    hit = np.flatnonzero(gap <= level)
    return int(hit[0]) + 1 if len(hit) else None


def _rate_check(p, traces, asynchronous, gamma):
    n = p.n
    F = np.mean([tr.F for tr in traces], axis=0)
    gap0 = traces[0].F0 - p.f_star
    ts = np.arange(RATE_STRIDE, RATE_T + 1, RATE_STRIDE)
    c = 1.0 / 3.0 if asynchronous else 1.0
    alpha = rate_alpha(p.mu_F, p.mu_f, gamma)
    bound = gap0 * (1.0 - c * alpha / n) ** ts * RATE_SLACK
    gap = F[ts - 1] - p.f_star
    return {
        "max_ratio_to_bound": float(np.max(gap / bound)),
        "bound_ok": bool(np.all(gap <= bound)),
        "mean_gap": gap,
        "reach": _updates_to_reach(F - p.f_star, REACH_FRACTION * gap0),
    }


@_timed
def criterion_1(count: int = 100_000, seed: int = 0) -> dict:
    """Prox invariants on random contexts for every regularizer."""
    reports = {kind: prox_invariant_report(kind, count, seed + i)
               for i, kind in enumerate(("zero", "l1", "squared_l2", "hinge"))}
    worst = {k: {name: c["worst"] for name, c in r["checks"].items()} for k, r in reports.items()}
    oracle = min(w["oracle_agreement"] for w in worst.values())
    return {"ok": all(r["ok"] for r in reports.values()), "contexts_per_kind": count,
            "oracle_worst": oracle, "worst": worst}


@_timed
def criterion_2(keep_traces: bool = False) -> dict:
    """Sequential mean-F curve under the sequential strongly convex bound."""
    p = bench_problem()
    gamma = profile_of(p).l_max
    traces = [run_sequential(p, SolverConfig(gamma, RATE_T, seed)) for seed in range(RATE_SEEDS)]
    rc = _rate_check(p, traces, asynchronous=False, gamma=gamma)
    out = {"ok": rc["bound_ok"], "max_ratio_to_bound": rc["max_ratio_to_bound"], "reach": rc["reach"]}
    if keep_traces:
        out["traces"] = traces
        out["problem"] = p
    return out


@_timed
def criterion_3(keep_traces: bool = False, seq_reach: int | None = None) -> dict:
    """Asynchronous mean-F curve under the 1/(3n) bound, and time to 1e-3 within 4x sequential."""
    p = bench_problem()
    prof = profile_of(p)
    gamma = prof.l_max
    q = max(1, max_parallelism(prof, gamma, p.n))
    traces = [run_async_sim(p, gamma, RATE_T, uniform_random(q), seed) for seed in range(RATE_SEEDS)]
    rc = _rate_check(p, traces, asynchronous=True, gamma=gamma)
    if seq_reach is None:
        seq = [run_sequential(p, SolverConfig(gamma, RATE_T, seed)) for seed in range(RATE_SEEDS)]
        seq_reach = _rate_check(p, seq, asynchronous=False, gamma=gamma)["reach"]
    reach_ok = rc["reach"] is not None and seq_reach is not None and rc["reach"] <= REACH_FACTOR * seq_reach
    out = {"ok": rc["bound_ok"] and reach_ok, "q": q, "max_ratio_to_bound": rc["max_ratio_to_bound"],
           "reach": rc["reach"], "seq_reach": seq_reach, "reach_ok": bool(reach_ok)}
    if keep_traces:
        out["traces"] = traces
        out["problem"] = p
    return out


def random_triple(i: int):
    """A small random (problem, gamma, policy, seed, T) used by the path-wise lemma sweep."""
    rng = np.random.default_rng([7, i])
    kind = i % 3
    if kind == 0:
        n = int(rng.integers(5, 40))
        p = gen_random_quadratic(n, int(rng.integers(1, min(n, 7) + 1)), float(rng.uniform(0, 0.3)),
                                 1.0, int(rng.integers(1 << 30)))
    elif kind == 1:
        n = int(rng.integers(5, 40))
        base = gen_random_quadratic(n, int(rng.integers(1, min(n, 7) + 1)), 0.05, 1.0,
                                    int(rng.integers(1 << 30)))
        names = ("zero", "l1", "squared_l2", "hinge")
        regs = tuple(Regularizer(names[int(rng.integers(4))], float(rng.uniform(0, 0.5))) for _ in range(n))
        p = base.replace(regs=regs, mu_F=None, f_star=None)
    else:
        m, n = int(rng.integers(5, 40)), int(rng.integers(5, 40))
        p = gen_lasso(m, n, float(rng.uniform(0.1, 0.5)), float(rng.uniform(0, 0.5)),
                      int(rng.integers(1 << 30)))
    gamma = profile_of(p).l_max * float(rng.uniform(1.0, 2.0))
    q = int(rng.integers(0, 6))
    pol = (synchronous(), uniform_random(q), scv_uniform(q), adversarial_policy(q))[int(rng.integers(4))]
    x0 = rng.standard_normal(p.n)
    return p, gamma, pol, int(rng.integers(1 << 30)), int(rng.integers(50, 400)), x0


@_timed
def criterion_4(traces_2=None, traces_3=None, problem=None, triples: int = 1000) -> dict:
    """Per-update progress inequalities on every benchmark trace and on random triples."""
    checked = 0
    worst = math.inf
    failures = []
    if traces_2 is None or traces_3 is None:
        c2 = criterion_2(keep_traces=True)
        c3 = criterion_3(keep_traces=True, seq_reach=c2["reach"])
        traces_2, traces_3, problem = c2["traces"], c3["traces"], c2["problem"]
    gamma = profile_of(problem).l_max
    for tr in list(traces_2) + list(traces_3):
        r = check_progress_lemmas(tr, problem, gamma)
        checked += 1
        worst = min(worst, *r["min_residual"].values())
        if not r["ok"]:
            failures.append(("benchmark", checked))
    kinds = {"synchronous": 0, "uniform_random": 0, "scv_uniform": 0, "adversarial": 0}
    lasso = 0
    for i in range(triples):
        p, gamma, pol, seed, T, x0 = random_triple(i)
        tr = run_async_sim(p, gamma, T, pol, seed, x0=x0)
        r = check_progress_lemmas(tr, p, gamma)
        checked += 1
        kinds[pol.kind] += 1
        lasso += p.smooth.kind == "least_squares"
        worst = min(worst, *r["min_residual"].values())
        if not r["ok"]:
            failures.append(("triple", i))
    return {"ok": not failures, "traces_checked": checked, "worst_residual": worst,
            "failures": failures[:10], "policies": kinds, "lasso_triples": lasso}


def scc_worked_example() -> Schedule:
    """Coordinate 1 updated with (start, commit) = (2, 9), (8, 18), (11, 12) among unit-span updates."""
    T = 20
    start = np.arange(T, dtype=float)
    commit = start + 0.5
    coord = np.arange(100, 100 + T)
    for s, c in ((2, 9.25), (8, 18.25), (11, 12.25)):
        commit[s] = c
        coord[s] = 1
    return Schedule(core=np.arange(T), start=start, commit=commit, coord=coord)


@_timed
def criterion_5(schedules: int = 10_000) -> dict:
    """SCC worked example, and the SCC range on random schedules."""
    ex = scc_worked_example()
    order = ex.scc_order
    example_ok = [float(ex.start[order[i]]) for i in (2, 8, 11)] == [2.0, 11.0, 8.0]
    example_ok &= [float(ex.commit[order[i]]) for i in (2, 8, 11)] == [9.25, 12.25, 18.25]
    models = ("constant:1", "uniform:0.5,3", "bimodal:1,10,0.5")
    rng = np.random.default_rng(0)
    bad = []
    qmax = 0
    for i in range(schedules):
        cores = int(rng.integers(1, 9))
        T = int(rng.integers(1, 501))
        sch = generate_schedule(max(2, T // 3), T, cores, models[i % 3], seed=i)
        r = interference_report(sch, with_sets=False)
        qmax = max(qmax, r["q_emp"])
        if not r["scc_range_ok"]:
            bad.append(i)
    return {"ok": bool(example_ok) and not bad, "example_ok": bool(example_ok),
            "violations": bad[:10], "schedules": schedules, "max_q": qmax}


@_timed
def criterion_6(seeds: int = 500, T: int = 1000) -> dict:
    """Gradient-error bound under common-value staleness, q in {1, 2}."""
    p = gen_random_quadratic(50, 5, 0.1, 1.0, 0)
    gamma = profile_of(p).l_max
    reps = {q: scv_error_bound_check(p, gamma, q, T, seeds) for q in (1, 2)}
    return {"ok": all(r["ok"] for r in reps.values()),
            "fraction_ok": {q: r["fraction_ok"] for q, r in reps.items()},
            "amortization": {q: r["amortization"] for q, r in reps.items()}}


def stall_q(n: int) -> int:
    return math.ceil(math.sqrt(n * math.log(n)))


@_timed
def criterion_7(pairs: int = STALL_PAIRS, n: int = STALL_N, c: float = STALL_C) -> dict:
    """Adversarial staleness versus q=1 random staleness on the lower-bound instance."""
    q = stall_q(n)
    T = 10 * n
    ratios, adv_red, rand_red, halved = [], [], [], []
    for i in range(pairs):
        p, x0 = lower_bound_instance(n, c, seed=i)
        gamma = float(np.abs(p.quad.data).max())
        F0 = eval_F(p, x0)
        a = run_async_sim(p, gamma, T, adversarial_policy(q), seed=i, x0=x0, record_every=T)
        b = run_async_sim(p, gamma, T, uniform_random(1), seed=i, x0=x0, record_every=T)
        ra = (F0 - a.F[-1]) / F0
        rb = (F0 - b.F[-1]) / F0
        adv_red.append(ra)
        rand_red.append(rb)
        ratios.append(ra / rb)
        halved.append(b.F[-1] <= 0.5 * F0)
    med = median(ratios)
    return {"ok": bool(med <= STALL_RATIO), "median_ratio": med, "q": q, "T": T,
            "adv_reduction_median": median(adv_red), "rand_reduction_median": median(rand_red),
            "random_run_halves_F": bool(all(halved))}


@_timed
def criterion_8(runs: int = PAR_RUNS, n: int = PAR_N) -> dict:
    """Threaded runtime: final F against the sequential solver, and the locked write chain."""
    p = gen_random_quadratic(n, PAR_S, PAR_MU, 1.0, 0)
    gamma = profile_of(p).l_max
    T = PAR_T_PER_N * n
    errs, qs, speed = [], [], []
    for seed in range(runs):
        t0 = time.perf_counter()
        seq = run_sequential(p, SolverConfig(gamma, T, seed, record_every=T))
        seq_ms = (time.perf_counter() - t0) * 1000.0
        par = run_parallel(p, RuntimeConfig(threads=PAR_THREADS, gamma=gamma, T=T, seed=seed, smooth_only=True))
        errs.append(abs(par.final_F - seq.F[-1]) / abs(seq.F[-1]))
        qs.append(par.q_emp)
        speed.append(seq_ms / par.wall_ms)
    # long enough that the workers are preempted mid-update and really interleave
    lasso = gen_lasso(10_000, 5_000, 0.002, 0.1, 0)
    lg = profile_of(lasso).l_max
    lT = LASSO_T_PER_N * lasso.n
    lr = run_parallel(lasso, RuntimeConfig(threads=PAR_THREADS, gamma=lg, T=lT, seed=0,
                                           smooth_only=False, log=True))
    chain = verify_write_chain(lr.log, np.zeros(lasso.n), lr.x_final, ordered=True)
    med = median(errs)
    return {"ok": bool(med <= PAR_RTOL and chain["ok"] and lr.updates == lT),
            "median_rel_err": med, "max_rel_err": max(errs), "q_emp": qs, "lasso_q_emp": lr.q_emp,
            "write_chain_ok": chain["ok"], "median_speedup": median(speed)}


def run_all(quick: bool = False) -> dict:
    """Run every criterion; ``quick`` shrinks the sample sizes for a smoke run."""
    out = {}
    out[1] = criterion_1(count=10_000 if quick else 100_000)
    c2 = criterion_2(keep_traces=True)
    c3 = criterion_3(keep_traces=True, seq_reach=c2["reach"])
    out[2], out[3] = c2, c3
    out[4] = criterion_4(c2.pop("traces"), c3.pop("traces"), c2.pop("problem"),
                         triples=100 if quick else 1000)
    c3.pop("problem")
    out[5] = criterion_5(schedules=1000 if quick else 10_000)
    out[6] = criterion_6(seeds=100 if quick else 500)
    out[7] = criterion_7(pairs=4 if quick else STALL_PAIRS)
    out[8] = criterion_8(runs=3 if quick else PAR_RUNS, n=10_000 if quick else PAR_N)
    return out


def summary_line(num: int, res: dict) -> str:
    status = "PASS" if res["ok"] and res["in_time"] else "FAIL"
    keys = [k for k in res if k not in ("ok", "seconds", "limit_s", "in_time", "worst", "traces", "problem")]
    detail = ", ".join(f"{k}={_fmt(res[k])}" for k in keys[:4])
    return f"criterion {num}: {status} ({res['seconds']:.1f}s / {res['limit_s']:.0f}s) {detail}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, list) and len(v) > 5:
        return f"[{len(v)} items]"
    return str(v)
