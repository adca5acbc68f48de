"""``vrfbml`` command line: simulate -> train -> evaluate -> report.

Exit codes: 0 ok, 2 config/usage, 3 simulation, 4 data, 5 training.
Artifacts go to the output directory; logs go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import datasets, metrics, regressors, thermal
from .config import RunConfig, ScenarioConfig, default_config_json, load_config
from .errors import (ConfigError, DataError, ModelFormatError, ProvenanceError,
                     SimulationError, TrainingError, VrfbmlError)

log = logging.getLogger("vrfbml")

EXIT_OK, EXIT_CONFIG, EXIT_SIMULATION, EXIT_DATA, EXIT_TRAINING = 0, 2, 3, 4, 5


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, SimulationError):
        return EXIT_SIMULATION
    if isinstance(exc, (DataError, ModelFormatError)):
        return EXIT_DATA
    if isinstance(exc, TrainingError):
        return EXIT_TRAINING
    return 1


def _out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _selected_scenarios(cfg: RunConfig, args) -> list[ScenarioConfig]:
    if args.scenario:
        return [cfg.scenario(args.scenario)]
    return list(cfg.scenarios)


def calibrated_params(cfg: RunConfig, sc: ScenarioConfig) -> thermal.VrfbParams:
    """Plant parameters with the stack resistance fitted to the scenario's mean, if one is set."""
    if sc.target_mean_c is None:
        return cfg.params
    r = thermal.calibrate_resistance(cfg.params, sc.profile(), sc.target_mean_c, cfg.dt,
                                     r_max=cfg.r_max)
    return cfg.params.with_resistance(sc.mode, r)


def _fmt_opt(value) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def cmd_simulate(cfg: RunConfig, args, *, noisy: bool = False) -> int:
    out = _out_dir(cfg, args)
    prefix = "synth" if noisy else "sim"
    for sc in _selected_scenarios(cfg, args):
        params = calibrated_params(cfg, sc)
        profile = sc.profile()
        full = thermal.simulate_cycle(params, profile, cfg.dt)
        if noisy:
            data = datasets.synthesize(params, profile, cfg.noise_sigma, cfg.noise_seed, cfg.dt,
                                       sample_every=cfg.sample_every)
        else:
            data = thermal.simulate_cycle(params, profile, cfg.dt,
                                          sample_every=cfg.sample_every).dataset
        path = out / f"{prefix}_{sc.id}.csv"
        datasets.write_csv(data, path)
        r = params.resistance(sc.mode)
        print(f"{sc.id}: R={r:.6f} ohm mean={full.mean_stack_temp:.4f} degC "
              f"(target {_fmt_opt(sc.target_mean_c)}) max={full.max_stack_temp:.4f} degC "
              f"(reference {_fmt_opt(sc.reference_max_c)}) n={len(data)} -> {path}")
    return EXIT_OK


def _load_clean(cfg: RunConfig, path) -> datasets.TimeSeriesDataset:
    raw = datasets.load_csv(path, strict=False)
    clean, report = datasets.preprocess_with_report(raw, cfg.preprocess)
    if report.dropped_non_finite or report.dropped_duplicates:
        log.info("%s: dropped %d non-finite and %d duplicate rows", path,
                 report.dropped_non_finite, report.dropped_duplicates)
    return clean


def _dataset_path(cfg: RunConfig, args) -> Path:
    if args.data:
        return Path(args.data)
    if args.scenario:
        return _out_dir(cfg, args) / f"synth_{args.scenario}.csv"
    raise ConfigError("give --data PATH or --scenario ID")


def cmd_train(cfg: RunConfig, args) -> int:
    data_path = _dataset_path(cfg, args)
    out = _out_dir(cfg, args)
    clean = _load_clean(cfg, data_path)
    parts = datasets.split(clean, cfg.split.ratio, cfg.split.seed, cfg.split.strategy)
    kinds = regressors.KINDS if args.model in (None, "all") else (args.model,)
    for kind in kinds:
        try:
            model = regressors.fit_model(kind, parts.train, cfg.hyper(kind))
        except TrainingError:
            raise
        except (ValueError, ArithmeticError) as exc:
            raise TrainingError(f"{kind} fit failed: {exc}") from exc
        train_report = metrics.evaluate(model, parts.train, partition="train")
        provenance = {
            "dataset_path": str(data_path),
            "dataset_hash": clean.content_hash(),
            "preprocess": {"rebase_time": cfg.preprocess.rebase_time},
            "split": {"ratio": parts.ratio, "seed": parts.seed, "strategy": parts.strategy.value},
            "n_train": len(parts.train),
            "n_test": len(parts.test),
            "train_metrics": {"r2": train_report.r2, "mae": train_report.mae,
                              "rmse": train_report.rmse},
        }
        stem = data_path.stem
        model_path = out / f"{stem}.{kind}.json"
        regressors.save_model(model, model_path, provenance)
        line = (f"{stem} {kind}: n_train={len(parts.train)} train r2={train_report.r2:.6f} "
                f"mae={train_report.mae:.6f} rmse={train_report.rmse:.6f}")
        if kind == "svr" and not model.converged:
            line += f" (not converged, KKT violation {model.kkt_violation:.3g})"
        (out / f"{stem}.{kind}.train.log").write_text(line + "\n", encoding="utf-8")
        log.info(line)
        print(f"{line} -> {model_path}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    if not args.model_file:
        raise ConfigError("evaluate needs --model-file PATH")
    doc = regressors.persistence.load_model_document(args.model_file)
    model = regressors.model_from_dict(doc)
    prov = doc.get("provenance")
    if not isinstance(prov, dict):
        raise ModelFormatError(f"{args.model_file}: no training provenance recorded")
    data_path = Path(args.data) if args.data else Path(prov["dataset_path"])
    clean = datasets.load_csv(data_path, strict=False)
    clean = datasets.preprocess(clean, datasets.PreprocessConfig(**prov["preprocess"]))
    if clean.content_hash() != prov["dataset_hash"]:
        raise ProvenanceError(f"{data_path} differs from the dataset {args.model_file} was trained on")
    sp = prov["split"]
    parts = datasets.split(clean, sp["ratio"], sp["seed"], sp["strategy"])
    partition = args.partition
    subset = parts.test if partition == "test" else parts.train
    report = metrics.evaluate(model, subset, partition=partition)
    out = _out_dir(cfg, args)
    path = out / f"{Path(args.model_file).stem}.{partition}.report.json"
    report.save(path)
    flag = " (negative r2)" if report.r2_negative else ""
    print(f"{report.model_kind} {partition}: n={report.n} r2={report.r2:.6f} mae={report.mae:.6f} "
          f"rmse={report.rmse:.6f} rel_err={report.rel_error_abs:.4f}%{flag} -> {path}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    if not args.reports:
        raise ConfigError("report needs at least one report file")
    reports = [metrics.MetricsReport.load(p) for p in args.reports]
    partitions = {r.partition for r in reports}
    if len(partitions) > 1:
        raise DataError(f"cannot mix partitions {sorted(partitions)} in one table")
    table, warnings = metrics.comparison_table(reports, include_means=args.means)
    for w in warnings:
        log.warning(w)
    out = _out_dir(cfg, args)
    path = out / "comparison.csv"
    path.write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vrfbml", description=__doc__.splitlines()[0])
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default JSON config and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults apply to omitted blocks)")
    common.add_argument("--scenario", help="scenario id, e.g. 40A-charging (default: all)")
    common.add_argument("--model", choices=("lr", "svr", "gbt", "all"), help="model kind")
    common.add_argument("--out", help="output directory (overrides config output_dir)")
    common.add_argument("--seed", type=int, help="overrides split and noise seeds (and VRFBML_SEED)")
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command")
    sub.add_parser("simulate", parents=[common], help="calibrate and simulate noise-free profiles")
    sub.add_parser("synth", parents=[common], help="simulate and add seeded measurement noise")
    p = sub.add_parser("train", parents=[common], help="preprocess, split and fit models")
    p.add_argument("--data", help="dataset CSV (default: <out>/synth_<scenario>.csv)")
    p = sub.add_parser("evaluate", parents=[common], help="score a model on its recorded split")
    p.add_argument("--model-file", required=False, help="model JSON written by train")
    p.add_argument("--data", help="dataset CSV (default: path recorded in the model)")
    p.add_argument("--partition", choices=("test", "train"), default="test")
    p = sub.add_parser("report", parents=[common], help="merge reports into a comparison grid")
    p.add_argument("reports", nargs="*", help="report JSON files written by evaluate")
    p.add_argument("--means", action="store_true", help="append mean-temperature columns")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.print_default_config:
        sys.stdout.write(default_config_json())
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.seed)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        if args.command == "synth":
            return cmd_simulate(cfg, args, noisy=True)
        if args.command == "train":
            return cmd_train(cfg, args)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args)
        return cmd_report(cfg, args)
    except VrfbmlError as exc:
        print(f"vrfbml: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except OSError as exc:
        print(f"vrfbml: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
