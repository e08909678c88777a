"""Command-line entry point: ``plsstop {simulate,select,compare,robustness,partition-count}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 when a
grid run finished with some failed rows.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import CriterionSpec, check_family, run_criterion
from .errors import InvalidArgs, PlsStopError
from .evaluation import VERDICTS, partition_count, robustness_distribution, summarize_grid
from .io import format_value, read_dataset, write_dataset, write_matrix, write_rows
from .simulation import GRID_COLUMNS, SimConfig, grid_run, paper_grid, simulate_univ_yx

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3

CRITERIA = ("q2", "bicdof", "bicglob", "aic", "bic", "cvmc", "pval", "bootyt")
FAMILIES = ("gaussian", "binomial", "poisson")
PAPER_SCALE = {"datasets": 100, "R": 500}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _folds(value: str):
    if value.lower() in ("loo", "lv1o"):
        return "loo"
    try:
        q = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'loo', got {value!r}") from None
    if q < 2:
        raise argparse.ArgumentTypeError("q must be at least 2")
    return q


def _float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from None


def _criteria_list(value: str) -> list[str]:
    names = [v.strip().lower() for v in value.split(",") if v.strip()]
    bad = [n for n in names if n not in CRITERIA]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown criterion {','.join(bad) or value!r}; choose from {', '.join(CRITERIA)}")
    return names


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _common(p: argparse.ArgumentParser, seeded: bool = True):
    p.add_argument("--config", help="flat key=value file mirroring these flags; flags given here win")
    p.add_argument("--out-dir", default=".", help="directory for outputs (default: current)")
    if seeded:
        p.add_argument("--seed", type=int, default=None, help="master seed (fallback: $PLSSTOP_SEED, then 0)")


def _criterion_opts(p: argparse.ArgumentParser, R: int):
    p.add_argument("--family", choices=FAMILIES, default="gaussian")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--R", type=int, default=R, help="bootstrap replicates for bootyt")
    p.add_argument("--q", type=_folds, default=5, help="CV folds, or 'loo'")
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plsstop", description="PLS / PLSGLR component selection toolkit")
    parser.add_argument("--version", action="version", version=f"plsstop {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per grid cell")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write simulated datasets to CSV")
    _common(p)
    p.add_argument("--family", choices=FAMILIES, default="gaussian")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=int, default=None, help="fixed predictor count")
    p.add_argument("--p-min", type=int, default=7)
    p.add_argument("--p-max", type=int, default=50)
    p.add_argument("--sigma1", type=float, default=10.0)
    p.add_argument("--sigma2", type=float, default=8.0)
    p.add_argument("--sigma3", type=float, default=6.0)
    p.add_argument("--sigma4", type=float, default=0.01)
    p.add_argument("--sigma5", type=float, default=0.01)
    p.add_argument("--datasets", type=int, default=1)
    p.add_argument("--test-rows", type=int, default=0)

    p = sub.add_parser("select", help="select the number of components for one CSV dataset")
    p.add_argument("dataset")
    _common(p)
    p.add_argument("--criterion", choices=CRITERIA, required=True)
    p.add_argument("--response", default="y")
    _criterion_opts(p, R=500)

    p = sub.add_parser("compare", help="run criteria over a noise grid and summarize")
    _common(p)
    p.add_argument("--criterion", type=_criteria_list, default=["q2", "bicdof", "bootyt"],
                   help="comma-separated criteria")
    _criterion_opts(p, R=250)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p-min", type=int, default=7)
    p.add_argument("--p-max", type=int, default=50)
    p.add_argument("--sigma4", type=_float_list, default=[0.01, 5.01])
    p.add_argument("--sigma5", type=_float_list, default=[0.01, 10.01])
    p.add_argument("--grid", choices=("A", "B"), default=None, help="full noise grid; overrides --sigma4/--sigma5")
    p.add_argument("--datasets", type=int, default=20, help="datasets per couple")
    p.add_argument("--test-rows", type=int, default=None)
    p.add_argument("--paper-scale", type=_bool, nargs="?", const=True, default=False,
                   help="100 datasets per couple and R=500")
    p.add_argument("--record-runtime", type=_bool, nargs="?", const=True, default=False,
                   help="fill runtime_ms (makes grid.csv non-reproducible)")

    p = sub.add_parser("robustness", help="distribution of K over bootstrap or jackknife resamples")
    p.add_argument("dataset")
    _common(p)
    p.add_argument("--criterion", choices=CRITERIA, required=True)
    p.add_argument("--response", default="y")
    p.add_argument("--mode", choices=("bootstrap", "jackknife"), default="bootstrap")
    p.add_argument("--B", type=int, default=100)
    _criterion_opts(p, R=500)

    p = sub.add_parser("partition-count", help="number of distinct q-fold partitions of n rows")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    return parser


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _apply_config(sub: argparse.ArgumentParser, cfg: dict):
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, value in cfg.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r}")
        try:
            if action.type is not None:
                value = action.type(value)
            elif isinstance(action.default, bool):
                value = _bool(value)
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"config key {key}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key}: {value!r} not in {list(action.choices)}")
        defaults[key] = value
    sub.set_defaults(**defaults)
    for action in sub._actions:
        if action.dest in defaults:
            action.required = False


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(sub, read_config(args.config))
        args = parser.parse_args(argv)
    if hasattr(args, "seed") and args.seed is None:
        env = os.environ.get("PLSSTOP_SEED")
        try:
            args.seed = int(env) if env not in (None, "") else 0
        except ValueError:
            raise UsageError(f"PLSSTOP_SEED must be an integer, got {env!r}") from None
    if getattr(args, "seed", 0) < 0:
        raise UsageError("seed must be non-negative")
    if getattr(args, "paper_scale", False):
        args.datasets = PAPER_SCALE["datasets"]
        args.R = PAPER_SCALE["R"]
    if getattr(args, "jobs", 1) < 1:
        raise UsageError("--jobs must be >= 1")
    return args


def write_run_config(out_dir: Path, args: argparse.Namespace):
    skip = {"config", "verbose"}
    lines = [f"# plsstop {__version__}"]
    for key in sorted(vars(args)):
        if key in skip:
            continue
        value = getattr(args, key)
        if isinstance(value, list):
            value = ",".join(format_value(v) for v in value)
        lines.append(f"{key} = {format_value(value)}")
    (out_dir / "run_config.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spec(args, name=None) -> CriterionSpec:
    return CriterionSpec(name or args.criterion, kmax=args.kmax, q=args.q, alpha=args.alpha, R=args.R)


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    p_range = (args.p, args.p) if args.p is not None else (args.p_min, args.p_max)
    try:
        cfg = SimConfig(n=args.n, p_range=p_range,
                        sigma=(args.sigma1, args.sigma2, args.sigma3, args.sigma4, args.sigma5),
                        family=args.family, datasets_per_cell=args.datasets, seed=args.seed,
                        test_rows=args.test_rows)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_run_config(out, args)
    for i in range(args.datasets):
        sim = simulate_univ_yx(cfg, cell_replicate=i)
        stem = f"dataset_{i:03d}"
        write_dataset(out / f"{stem}.csv", sim.data)
        write_matrix(out / f"{stem}_latent.csv", sim.latent, ["l1", "l2", "l3", "l4"])
        if sim.test_extension is not None:
            write_dataset(out / f"{stem}_test.csv", sim.test_extension)
        side = {**sim.params, "true_k": sim.true_k,
                "mixing": [[float(v) for v in row] for row in sim.mixing]}
        (out / f"{stem}.json").write_text(json.dumps(side, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {args.datasets} dataset(s) to {out}")
    return EXIT_OK


def cmd_select(args) -> int:
    check_family(args.criterion, args.family)
    data = read_dataset(args.dataset, args.response, args.family)
    res = run_criterion(_spec(args), data, args.seed)
    out = _out_dir(args)
    lead = ["k", "statistic", "decision"]
    extra = []
    for rec in res.trace:
        extra += [c for c in rec if c not in lead and c not in extra]
    write_rows(out / "trace.csv", res.trace, lead + extra)
    write_run_config(out, args)
    print(f"K={res.K}")
    return EXIT_OK


def cmd_compare(args) -> int:
    grid = paper_grid(args.grid) if args.grid else [(a, b) for a in args.sigma4 for b in args.sigma5]
    try:
        template = SimConfig(n=args.n, p_range=(args.p_min, args.p_max), family=args.family,
                             datasets_per_cell=args.datasets, seed=args.seed, test_rows=args.test_rows)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    specs = [_spec(args, name) for name in args.criterion]
    for spec in specs:
        check_family(spec.name, args.family)
    out = _out_dir(args)
    write_run_config(out, args)
    rows = grid_run(grid, template, specs, seed=args.seed, jobs=args.jobs, record_runtime=args.record_runtime)
    write_rows(out / "grid.csv", rows, list(GRID_COLUMNS))
    ok_rows = [r for r in rows if not r.get("error")]
    failed = len(rows) - len(ok_rows)
    if ok_rows:
        summary = summarize_grid(ok_rows, args.alpha)
        write_rows(out / "summary.csv", summary.comparisons,
                   ["couple_sigma4", "couple_sigma5", "criterion_a", "criterion_b", "metric", "t", "p", "verdict"])
        write_rows(out / "summary_stats.csv", summary.stats)
        assert all(c["verdict"] in VERDICTS for c in summary.comparisons)
    print(f"{len(rows)} grid rows, {failed} failed")
    if failed == len(rows):
        return EXIT_DATA
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_robustness(args) -> int:
    check_family(args.criterion, args.family)
    data = read_dataset(args.dataset, args.response, args.family)
    res = robustness_distribution(data, _spec(args), mode=args.mode, B=args.B, seed=args.seed)
    out = _out_dir(args)
    total = res.total
    rows = [{"k": k, "count": c, "frequency": c / total} for k, c in res.counts.items()]
    write_rows(out / "histogram.csv", rows, ["k", "count", "frequency"])
    write_run_config(out, args)
    if res.mode_k is None:
        print(f"no successful resamples ({res.errors} errors)")
        return EXIT_DATA
    print(f"mode K={res.mode_k} ({res.counts[res.mode_k]}/{total}), mean K={res.mean_k:.3f}, errors={res.errors}")
    return EXIT_OK


def cmd_partition_count(args) -> int:
    print(partition_count(args.n, args.q))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "select": cmd_select,
    "compare": cmd_compare,
    "robustness": cmd_robustness,
    "partition-count": cmd_partition_count,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"plsstop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"plsstop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidArgs as exc:
        print(f"plsstop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PlsStopError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"plsstop: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"plsstop: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
