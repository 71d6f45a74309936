"""Command-line entry point: ``risdfrc <subcommand> [options]``.

Every subcommand writes one CSV plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 configuration error, 3 infeasible scenario,
4 solver failure. Sweeps keep going past failed trials (recorded in the
``status`` column) and report the worst failure through the exit code.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, kernels
from .config import ConfigError, ScenarioConfig, load_config
from .runner import (SCHEMES, TrialResult, beampattern_study, convergence_study, run_trial,
                     seeds_for, sweep)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SOLVER = 0, 2, 3, 4

SWEEPS = {
    "sweep-l": ("l_elems", [10, 20, 30, 40]),
    "sweep-power": ("p0_w", [0.1, 0.2, 0.5, 1.0, 2.0, 5.0]),
    "sweep-alpha": ("alpha_bu", [2.5, 3.0, 3.5, 3.75, 4.0, 4.5, 5.0, 5.25, 5.5, 6.0]),
    "sweep-bits": ("bits", [1, 2, 3, 4, 5, 6, math.inf]),
}
TRIAL_COLUMNS = ["scheme", "seed", "sum_rate_nat", "radar_snr_db", "feasible", "iters", "wall_time_s", "status"]


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if x == int(x) and abs(x) < 1e15:
            return str(int(x)) if abs(x) >= 1 or x == 0 else f"{x:.10g}"
        return f"{x:.10g}"
    return str(x)


def trial_cells(t: TrialResult) -> list:
    return [t.scheme, t.seed, t.sum_rate_nat, t.radar_snr_db, t.feasible, t.iters, t.wall_time_s, t.status]


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(c) for c in r])


def write_manifest(out: Path, args, config: ScenarioConfig, extra: dict) -> None:
    data = {
        "artifact": "risdfrc",
        "version": __version__,
        "subcommand": args.command,
        "kernel_backend": kernels.BACKEND,
        "config": config.to_dict(),
        **extra,
    }
    (out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return "inf" if o > 0 else "-inf"
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _jsonable(values):
    return [("inf" if isinstance(v, float) and math.isinf(v) else v) for v in values]


def _exit_code(trials: Sequence[TrialResult]) -> int:
    statuses = {t.status for t in trials}
    if "infeasible" in statuses:
        return EXIT_INFEASIBLE
    if "solver_failure" in statuses:
        return EXIT_SOLVER
    return EXIT_OK


def _parse_values(text: str | None, default):
    if text is None:
        return list(default)
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            out.append(math.inf if tok in ("inf", "cont") else float(tok))
    if not out:
        raise ConfigError("--values is empty")
    return out


def _schemes(arg: str) -> tuple[str, ...]:
    return SCHEMES if arg == "all" else (arg,)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario file (.toml or .json)")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--seeds", type=int, help="number of seeds per point")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--scheme", choices=("proposed", "random", "com-only", "all"), default=None)
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="risdfrc", description="RIS-aided DFRC beamforming simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("converge", parents=[common], help="sum rate per AO iteration")
    c.add_argument("--l-list", default="10,20,40")
    for name, (axis, default) in SWEEPS.items():
        s = sub.add_parser(name, parents=[common], help=f"sum rate versus {axis}")
        s.add_argument("--values", default=None,
                       help="comma-separated axis values" + (" ('inf' = continuous phases)" if axis == "bits" else ""))
    b = sub.add_parser("beampattern", parents=[common], help="normalized beampattern of optimized solutions")
    b.add_argument("--gamma0-list", default="15,25")
    b.add_argument("--l-list", default="10,20")
    sub.add_parser("single", parents=[common], help="one trial per scheme")
    return p


def _load(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        config = config.replace(seed=args.seed)
    if args.seeds is not None and args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    return config


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load(args)
        out: Path = args.out
        out.mkdir(parents=True, exist_ok=True)
        return _dispatch(args, config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args, config: ScenarioConfig, out: Path) -> int:
    cmd = args.command
    workers = max(1, args.workers)
    if cmd == "converge":
        n_seeds = args.seeds or 1
        l_list = [int(v) for v in _parse_values(args.l_list, [])]
        schemes = _schemes(args.scheme or "proposed")
        res = convergence_study(config, l_list, n_seeds, schemes, workers)
        rows = []
        for L, t in res:
            for i, (rate, obj) in enumerate(zip(t.sum_rate_trace, t.objective_trace), start=1):
                rows.append([L, t.scheme, t.seed, i, rate, obj, t.radar_snr_db, t.feasible, t.iters,
                             t.wall_time_s, t.status])
            if t.status != "ok":
                rows.append([L, t.scheme, t.seed, 0, math.nan, math.nan, math.nan, False, 0, t.wall_time_s, t.status])
        name = "converge.csv"
        write_csv(out / name, ["l_elems", "scheme", "seed", "iteration", "sum_rate_nat", "wmmse_objective",
                               "radar_snr_db", "feasible", "iters", "wall_time_s", "status"], rows)
        write_manifest(out, args, config, {"outputs": [name], "l_list": l_list, "schemes": list(schemes),
                                           "seeds": seeds_for(config, n_seeds)})
        return _exit_code([t for _, t in res])

    if cmd in SWEEPS:
        axis, default = SWEEPS[cmd]
        values = _parse_values(getattr(args, "values", None), default)
        if axis == "l_elems":
            values = [int(v) for v in values]
        if axis == "bits":
            values = [v if math.isinf(v) else int(v) for v in values]
            if any(not math.isinf(v) and v < 1 for v in values):
                raise ConfigError("bits must be >= 1 (or 'inf')")
        n_seeds = args.seeds or 10
        schemes = _schemes(args.scheme or "all")
        res = sweep(config, axis, values, n_seeds, schemes, workers)
        name = cmd.replace("-", "_") + ".csv"
        write_csv(out / name, [axis] + TRIAL_COLUMNS, ([v] + trial_cells(t) for v, t in res.trials))
        write_manifest(out, args, config, {"outputs": [name], "axis": axis, "values": _jsonable(values),
                                           "schemes": list(schemes), "seeds": seeds_for(config, n_seeds)})
        return _exit_code([t for _, t in res.trials])

    if cmd == "beampattern":
        n_seeds = args.seeds or 1
        g_list = _parse_values(args.gamma0_list, [])
        l_list = [int(v) for v in _parse_values(args.l_list, [])]
        recs = beampattern_study(config, g_list, l_list, n_seeds, workers)
        pattern_rows, summary_rows = [], []
        for r in recs:
            with np.errstate(divide="ignore"):
                db = 10.0 * np.log10(r.pattern)
            pattern_rows += [[r.l_elems, r.gamma0_db, r.seed, a, g] for a, g in zip(r.angles_deg, db)]
            summary_rows.append([r.l_elems, r.gamma0_db] + trial_cells(r.trial)
                                + [r.peak_deg, r.width_3db_deg, r.psl_db])
        write_csv(out / "beampattern.csv", ["l_elems", "gamma0_db", "seed", "theta_deg", "gain_db_normalized"],
                  pattern_rows)
        write_csv(out / "beampattern_summary.csv",
                  ["l_elems", "gamma0_db"] + TRIAL_COLUMNS + ["peak_deg", "width_3db_deg", "psl_db"], summary_rows)
        write_manifest(out, args, config, {"outputs": ["beampattern.csv", "beampattern_summary.csv"],
                                           "gamma0_list": g_list, "l_list": l_list,
                                           "seeds": seeds_for(config, n_seeds)})
        return _exit_code([r.trial for r in recs])

    if cmd == "single":
        schemes = _schemes(args.scheme or "all")
        seeds = seeds_for(config, args.seeds or 1)
        trials = [run_trial(config, s, seed) for seed in seeds for s in schemes]
        write_csv(out / "single.csv", ["l_elems"] + TRIAL_COLUMNS, ([config.l_elems] + trial_cells(t) for t in trials))
        write_manifest(out, args, config, {"outputs": ["single.csv"], "schemes": list(schemes), "seeds": seeds})
        return _exit_code(trials)
    raise AssertionError(cmd)


if __name__ == "__main__":
    sys.exit(main())
