"""Command-line entry points.

Exit codes: 0 when every enabled check passes, 2 when a check fails and 1
for usage, configuration or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..objective import save_problem

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _gamma(text: str):
    """A positive number, ``l_max`` or ``Nx`` for a multiple of l_max."""
    if text == "l_max":
        return text
    if text.endswith("x"):
        try:
            return {"multiplier": float(text[:-1])}
        except ValueError:
            pass
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, 'l_max' or e.g. '2x', got {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _run_config(d: dict) -> int:
    from .experiment import ExperimentConfig, run_experiment

    summary = run_experiment(ExperimentConfig.from_dict(d))
    for name, c in summary["checks"].items():
        print(f"{name}: {'ok' if c['ok'] else 'FAILED'}")
    print(f"summary written to {Path(d['out_dir']) / 'summary.json'}")
    return summary["exit_code"]


def _cmd_solve(a) -> int:
    checks = {"lemmas": a.record_every == 1}
    return _run_config({"problem": {"file": a.problem}, "solver": {"kind": "sequential"}, "gamma": a.gamma,
                        "T": a.steps, "seeds": list(range(a.seeds)), "out_dir": a.out,
                        "record_every": a.record_every, "checks": checks})


def _cmd_simulate(a) -> int:
    checks = {"lemmas": a.record_every == 1}
    return _run_config({"problem": {"file": a.problem},
                        "solver": {"kind": "sim", "policy": a.policy, "q": a.q}, "gamma": a.gamma,
                        "T": a.steps, "seeds": list(range(a.seeds)), "out_dir": a.out,
                        "record_every": a.record_every, "checks": checks})


def _cmd_bench(a) -> int:
    solver = {"kind": "parallel", "threads": a.threads, "smooth_only": a.smooth_only}
    return _run_config({"problem": {"file": a.problem}, "solver": solver, "gamma": a.gamma,
                        "T": a.updates, "seeds": list(range(a.seeds)), "out_dir": a.out})


def _cmd_run(a) -> int:
    from .experiment import ExperimentConfig, run_experiment

    summary = run_experiment(ExperimentConfig.load(a.config))
    print(json.dumps(summary["checks"]))
    return summary["exit_code"]


def _cmd_stall_demo(a) -> int:
    from . import acceptance

    res = acceptance.criterion_7(pairs=a.pairs, n=a.n, c=a.c)
    print(acceptance.summary_line(7, res))
    return EXIT_OK if res["ok"] else EXIT_CHECK


def _cmd_check(a) -> int:
    from . import acceptance

    results = acceptance.run_all(quick=a.quick)
    for num, res in results.items():
        print(acceptance.summary_line(num, res))
    return EXIT_OK if all(r["ok"] and r["in_time"] for r in results.values()) else EXIT_CHECK


def _cmd_gen(a) -> int:
    from ..async_sim import lower_bound_instance
    from .generators import gen_lasso, gen_random_quadratic

    if a.kind == "quadratic":
        p = gen_random_quadratic(a.n, a.s, a.mu, a.lmax, a.seed)
    elif a.kind == "lasso":
        p = gen_lasso(a.m, a.n, a.density, a.lam, a.seed)
    else:
        p, x0 = lower_bound_instance(a.n, a.c, a.seed)
        if a.x0_out:
            np.savetxt(a.x0_out, x0)
    save_problem(p, a.out)
    print(f"wrote {a.out} (n={p.n})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="asynccd", description="Asynchronous coordinate descent solvers, simulator and checks.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, steps_flag="--steps"):
        sp.add_argument("--problem", required=True, help="problem JSON file")
        sp.add_argument("--gamma", type=_gamma, default="l_max",
                        help="step parameter: a number, 'l_max' or a multiple such as '2x' (default l_max)")
        sp.add_argument(steps_flag, type=int, required=True, dest="steps" if steps_flag == "--steps" else "updates",
                        help="number of coordinate updates")
        sp.add_argument("--seeds", type=_positive_int, default=1, help="number of seeds, run as 0..S-1")
        sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("solve", help="sequential proximal coordinate descent")
    common(sp)
    sp.add_argument("--record-every", type=_positive_int, default=1, help="trace stride")
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("simulate", help="asynchronous simulation under a staleness policy")
    common(sp)
    sp.add_argument("--policy", choices=["sync", "rand", "scv", "adversarial"], default="rand")
    sp.add_argument("--q", type=int, default=1, help="staleness bound")
    sp.add_argument("--record-every", type=_positive_int, default=1, help="trace stride")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("bench", help="multithreaded runtime")
    common(sp, "--updates")
    sp.add_argument("--threads", type=_positive_int, default=1)
    sp.add_argument("--smooth-only", action="store_true", help="lock-free atomic-add path (no regularizers)")
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("run", help="run a JSON experiment config")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("stall-demo", help="adversarial staleness against q=1 random staleness")
    sp.add_argument("--n", type=_positive_int, default=1024)
    sp.add_argument("--c", type=float, default=2.0)
    sp.add_argument("--pairs", type=_positive_int, default=20)
    sp.set_defaults(func=_cmd_stall_demo)

    sp = sub.add_parser("check", help="run the full acceptance suite")
    sp.add_argument("--quick", action="store_true", help="smaller samples for a smoke run")
    sp.set_defaults(func=_cmd_check)

    sp = sub.add_parser("gen", help="write a generated problem file")
    sp.add_argument("kind", choices=["quadratic", "lasso", "lower-bound"])
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--s", type=_positive_int, default=5, help="nonzeros per row (quadratic)")
    sp.add_argument("--mu", type=float, default=0.1, help="strong convexity (quadratic)")
    sp.add_argument("--lmax", type=float, default=1.0, help="largest diagonal entry (quadratic)")
    sp.add_argument("--m", type=_positive_int, default=100, help="rows (lasso)")
    sp.add_argument("--density", type=float, default=0.05, help="design density (lasso)")
    sp.add_argument("--lam", type=float, default=0.1, help="l1 weight (lasso)")
    sp.add_argument("--c", type=float, default=2.0, help="coupling constant (lower-bound)")
    sp.add_argument("--x0-out", help="where to save the starting point (lower-bound)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="problem JSON path")
    sp.set_defaults(func=_cmd_gen)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"asynccd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
