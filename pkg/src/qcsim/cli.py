"""Command line: run scenarios, list the attack matrix, size isolation budgets.

Exit codes: 0 success, 1 bad configuration, 2 run failure (argparse usage errors also exit 2).
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__, report
from .attacks import trojan_read_probability
from .config import load_config
from .countermeasures import FIBER_DAMAGE_LIMIT_W, IsolationChain, isolation_budget, required_isolation_db
from .errors import ConfigurationError, NotApplicableError
from .runner import run_trials
from .table import COLUMNS, MATRIX, PRIMITIVES, PROTOCOL_NAMES, applicable_cells, inapplicable_cells


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def cmd_run(args) -> int:
    cfg = load_config(args.scenario)
    upd = {k: v for k, v in (("seed", args.seed), ("trials", args.trials)) if v is not None}
    if upd:
        cfg = cfg.with_updates(**upd)
    res = run_trials(cfg, force=args.force, jobs=args.jobs)
    text = report.write(res, args.out, args.format)
    if args.out is None:
        sys.stdout.write(text)
    else:
        v = res.verdict
        print(f"{cfg.protocol}: {v.property} {v.status} ({len(res.trials)} trials) -> {args.out}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.scenario).resolved()
    print(json.dumps(cfg.model_dump(mode="json"), sort_keys=True, indent=2))
    return 0


def cmd_list(args) -> int:
    print("primitives:")
    for prim, protos in PRIMITIVES.items():
        print(f"  {prim}: {', '.join(protos)}")
    print("protocols:")
    for p, name in PROTOCOL_NAMES.items():
        print(f"  {p:<10} {name}")
    print("attack matrix (property broken, -- = not applicable):")
    width = max(len(c) for c in COLUMNS)
    print("  " + " " * 10 + "".join(f"{c:>{width + 2}}" for c in COLUMNS))
    for p in MATRIX:
        cells = "".join(f"{MATRIX[p].get(c, '--'):>{width + 2}}" for c in COLUMNS)
        print(f"  {p:<10}{cells}")
    print(f"{len(applicable_cells())} applicable cells, {len(inapplicable_cells())} not applicable")
    return 0


def cmd_budget(args) -> int:
    chain = IsolationChain(modulator_reflectivity_db=args.isolation_db)
    n_bar, per_s = isolation_budget(args.power, chain, rep_rate=args.rep_rate)
    print(f"reflected photons per second: {per_s:.4e}")
    print(f"mean reflected photons per pulse: {n_bar:.4e}")
    print(f"read probability (threshold {args.threshold}): {trojan_read_probability(n_bar, args.threshold):.4e}")
    need = required_isolation_db(args.target, args.power, rep_rate=args.rep_rate) if args.power > 0 else 0.0
    print(f"isolation for {args.target} photons per pulse: {need:.2f} dB")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcsim", description="Quantum cryptography attack simulator")
    ap.add_argument("--version", action="version", version=f"qcsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and emit a report")
    run.add_argument("--scenario", required=True, help="scenario JSON file")
    run.add_argument("--seed", type=_u64, help="override the scenario seed")
    run.add_argument("--trials", type=_positive, help="override the trial count")
    run.add_argument("--out", help="write here instead of stdout")
    run.add_argument("--format", choices=("report", "table"), default="report")
    run.add_argument("--force", action="store_true", help="run attacks outside the applicability matrix")
    run.add_argument("--jobs", type=_positive, default=1, help="worker processes for trials")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a scenario and print it with defaults filled in")
    val.add_argument("--scenario", required=True)
    val.set_defaults(func=cmd_validate)

    lst = sub.add_parser("list", help="show protocols and the attack matrix")
    lst.set_defaults(func=cmd_list)

    bud = sub.add_parser("budget", help="Trojan-horse isolation budget")
    bud.add_argument("--power", type=float, default=FIBER_DAMAGE_LIMIT_W, help="injected power (W)")
    bud.add_argument("--isolation-db", type=float, default=170.0, help="total round-trip isolation (dB)")
    bud.add_argument("--rep-rate", type=float, default=1e9, help="pulse rate (Hz)")
    bud.add_argument("--threshold", type=int, default=4, help="photons needed to read a setting")
    bud.add_argument("--target", type=float, default=4.0, help="photons per pulse to size isolation for")
    bud.set_defaults(func=cmd_budget)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotApplicableError as e:
        print(f"not applicable: {e}", file=sys.stderr)
        return 1
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
