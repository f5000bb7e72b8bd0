"""Command-line front end: ``gen-data``, ``train``, ``simulate``, ``compare``, ``bounds``.

Exit codes: 0 success, 2 config or input error, 3 dataset generation error,
4 run ended with a diagnostic (theta violation or target lost).
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path

import numpy as np

from .io import (
    FormatError,
    hyperparams_to_json,
    load_dataset_dir,
    load_hyperparams,
    save_dataset_dir,
    save_hyperparams,
    write_json,
)
from .scenario.config import GP_MODES, MODES, ConfigError, ScenarioConfig, load_config
from .scenario.dataset import EmptySectorError
from .scenario.report import gain_condition_report
from .scenario.simulate import (
    STATUS_OK,
    RunTrace,
    initial_hyperparams,
    run,
    scenario_datasets,
    train_experts,
)

EXIT_OK, EXIT_INPUT, EXIT_GENERATION, EXIT_DIAGNOSTIC = 0, 2, 3, 4
COMPARE_MODES = ("no_gp", "local_gp", "distributed_gp")

log = logging.getLogger("dgp_pursuit")


class InputError(Exception):
    pass


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    changes = {}
    for key in ("seed", "mode", "dt", "duration"):
        val = getattr(args, key, None)
        if val is not None:
            changes[key] = val
    return cfg.with_(**changes) if changes else cfg


def _datasets(args, cfg: ScenarioConfig):
    path = args.data or cfg.datasets_path
    if path is None:
        raise InputError("no dataset directory given (use --data or paths.datasets in the config)")
    return load_dataset_dir(path, cfg.n, cfg.gp.noise_var)


def _hyperparams(args, cfg: ScenarioConfig):
    path = args.hyperparams or cfg.hyperparams_path
    if path is None:
        raise InputError(f"mode {cfg.mode} needs hyperparameters (use --hyperparams or paths.hyperparams)")
    if not Path(path).exists():
        raise InputError(f"hyperparameter file {path} does not exist")
    hs = load_hyperparams(path)
    if len(hs) != cfg.n:
        raise InputError(f"{len(hs)} hyperparameter records for {cfg.n} drones")
    return hs


def _experts(args, cfg: ScenarioConfig):
    datasets = _datasets(args, cfg)
    hs = _hyperparams(args, cfg)
    experts, _ = train_experts(datasets, cfg.gp, hs)
    return experts


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    datasets = scenario_datasets(cfg)
    manifest = {
        "seed": cfg.seed,
        "noise_var": cfg.gp.noise_var,
        "regions": {
            "boundaries_deg": list(cfg.regions.boundaries_deg),
            "samples_per_drone": list(cfg.regions.samples_per_drone),
        },
        "target": cfg.target.kind,
        "duration": cfg.gp.dataset_duration,
    }
    save_dataset_dir(datasets, args.out, manifest)
    print(f"wrote {len(datasets)} datasets to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    datasets = _datasets(args, cfg)
    experts, _ = train_experts(datasets, cfg.gp)
    init = initial_hyperparams(cfg.gp)
    records = [hyperparams_to_json(e.hyperparams, d, init) for e, d in zip(experts, datasets)]
    Path(args.out).mkdir(parents=True, exist_ok=True)
    save_hyperparams(records, Path(args.out) / "hyperparams.json")
    print(f"wrote hyperparameters for {len(records)} drones to {args.out}")
    return EXIT_OK


def _run_mode(args, cfg: ScenarioConfig, experts):
    return run(cfg, experts if cfg.mode in GP_MODES else None, reports=None)


def _write_run(out: Path, tr: RunTrace, metrics, cfg: ScenarioConfig, dump_messages: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    tr.to_csv(out / "trace.csv")
    write_json(metrics.to_json(timings=False), out / "metrics.json")
    write_json({"fit_seconds": metrics.fit_seconds, "sim_seconds": metrics.sim_seconds}, out / "timings.json")
    if cfg.dump_features:
        tr.features_to_csv(out / "features.csv")
    if dump_messages and cfg.mode in GP_MODES:
        tr.messages_to_jsonl(out / "messages.jsonl")


def cmd_simulate(args) -> int:
    cfg = _config(args)
    experts = _experts(args, cfg) if cfg.mode in GP_MODES else None
    tr, metrics = _run_mode(args, cfg, experts)
    _write_run(Path(args.out), tr, metrics, cfg, args.dump_messages)
    print(f"{cfg.mode}: status={metrics.status} squared_mean_e={metrics.squared_mean_e:.6g}")
    if metrics.status != STATUS_OK:
        print(metrics.message, file=sys.stderr)
        return EXIT_DIAGNOSTIC
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    experts = _experts(args, cfg.with_(mode="local_gp"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results, blocks, code = {}, [], EXIT_OK
    for j, mode in enumerate(COMPARE_MODES):
        c = cfg.with_(mode=mode)
        tr, metrics = _run_mode(args, c, experts)
        results[mode] = metrics.to_json(timings=False)
        blocks.append(np.column_stack([np.full(len(tr.rows()), j), tr.rows()]))
        if metrics.status != STATUS_OK:
            print(f"{mode}: {metrics.message}", file=sys.stderr)
            code = EXIT_DIAGNOSTIC
    sq = {m: results[m]["squared_mean_e"] for m in COMPARE_MODES}
    write_json(
        {
            "seed": cfg.seed,
            "modes": list(COMPARE_MODES),
            "squared_mean_e": sq,
            "ordering": sorted(COMPARE_MODES, key=lambda m: sq[m]),
            "ordered": bool(sq["distributed_gp"] < sq["local_gp"] < sq["no_gp"]),
            "metrics": results,
        },
        out / "comparison.json",
    )
    buf = io.StringIO()
    header = ",".join(["mode_index"] + RunTrace.COLUMNS)
    np.savetxt(buf, np.vstack(blocks), fmt="%.17g", delimiter=",", header=header, comments="")
    (out / "comparison.csv").write_text(buf.getvalue())
    for m in COMPARE_MODES:
        print(f"{m}: {sq[m]:.6g}")
    return code


def cmd_bounds(args) -> int:
    cfg = _config(args)
    experts = _experts(args, cfg.with_(mode="local_gp"))
    report = gain_condition_report(experts, cfg.gp)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    write_json(report, Path(args.out) / "bounds.json")
    print(f"L_mu={report['network']['l_mu']:.4g} Delta_bar={report['network']['delta_bar']:.4g}")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "bounds": cmd_bounds,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgp-pursuit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--dt", type=float)
        p.add_argument("--duration", type=float)
        p.add_argument("--data", help="dataset directory (overrides paths.datasets)")
        p.add_argument("--hyperparams", help="hyperparameter JSON (overrides paths.hyperparams)")
        p.add_argument("--dump-messages", action="store_true", help="write neighbour messages per step")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except EmptySectorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (ConfigError, FormatError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
