"""Command-line entry point: ``fado {synth,value,preprocess,evaluate,benchmark}``.

Every option can also be given in a JSON file passed with ``--config``; keys
are the option names with dashes replaced by underscores. Flags given on the
command line win over the file. The merged settings are echoed to a JSON
sidecar next to the primary output.

Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from fado.dataset import DatasetSchema, load_csv, read_column, split_ordered, write_csv
from fado.errors import FadoValidationError
from fado.evaluation import FAIRNESS_METRICS, default_interventions, evaluate_grid, run_benchmark
from fado.learners import DESK_MAX_ESTIMATORS, TREES, KINDS as LEARNER_KINDS, sample_grid
from fado.preprocess import KINDS as METHODS, no_intervention, rps, rw, uar, uasp
from fado.synthgen import BiasSpec, generate
from fado.utility import ALPHA_GRID, KINDS as UTILITY_KINDS, MIN_MAX, SCALINGS, UtilityConfig, compute_utility
from fado.valuation import ALGORITHMS, OUT_OF_BAG, ValuationConfig, ValuationVector, value_dataset

logger = logging.getLogger("fado")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(FadoValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


COMMON = {"seed": 0, "threads": None, "log_level": "INFO"}
SCHEMA = {"target": None, "protected": None, "id": None, "exclude_protected": False}
VALUATION = {"algorithm": OUT_OF_BAG, "n_bags": 5, "pct_unseen": 0.2, "stratify": False}
UTILITY = {"utility": "linear", "alpha": 0.5, "betas": None, "scaling": MIN_MAX, "normalize": False}

DEFAULTS: dict[str, dict[str, Any]] = {
    "synth": {**COMMON, "spec": None, "out": None},
    "value": {**COMMON, **SCHEMA, **VALUATION, **UTILITY, "input": None, "out": None, "emit_utility": False},
    "preprocess": {**COMMON, **SCHEMA, **VALUATION, **UTILITY, "input": None, "out": None, "method": None,
                   "valuations": None, "column": None},
    "evaluate": {**COMMON, **SCHEMA, "train": None, "test": None, "out": None, "weight_column": "weight",
                 "grid_size": 25, "learner": TREES, "max_estimators": DESK_MAX_ESTIMATORS, "fpr": 0.05,
                 "column": None},
    "benchmark": {**COMMON, **SCHEMA, **VALUATION, "spec": None, "data": None, "out_dir": None,
                  "train_fraction": 0.75, "shuffle": False, "grid_size": 25, "learner": TREES,
                  "max_estimators": DESK_MAX_ESTIMATORS, "fpr": 0.05, "alphas": list(ALPHA_GRID),
                  "threshold_mode": "test", "column": None, "plots": True},
}

REQUIRED = {
    "synth": ("spec", "out"),
    "value": ("input", "target", "protected", "out"),
    "preprocess": ("input", "target", "protected", "method", "out"),
    "evaluate": ("train", "test", "target", "protected", "out"),
    "benchmark": ("out_dir",),
}


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _flag(dest: str) -> str:
    return "--" + dest.replace("_", "-")


def _add(p, cmd: str, dest: str, help: str, **kw) -> None:
    default = DEFAULTS[cmd].get(dest)
    if default is not None and kw.get("action") not in ("store_true", "store_false"):
        help = f"{help} (default: {default})"
    names = kw.pop("names", None) or [_flag(dest)]
    p.add_argument(*names, dest=dest, help=help, **kw)


def _common(p, cmd):
    _add(p, cmd, "config", "JSON file of option values; command-line flags override it", metavar="PATH",
         names=["--config"])
    _add(p, cmd, "seed", "seed from which all randomness derives", type=int)
    _add(p, cmd, "threads", "worker threads (default: available cores)", type=int)
    _add(p, cmd, "log_level", "logging level for messages on stderr",
         choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _schema(p, cmd):
    _add(p, cmd, "target", "name of the binary target column")
    _add(p, cmd, "protected", "protected attribute column; repeat or comma-separate for several",
         action="append", type=_csv_list)
    _add(p, cmd, "id", "row identifier column (default: row number)")
    _add(p, cmd, "exclude_protected", "do not use protected columns as model features", action="store_true")


def _valuation(p, cmd):
    _add(p, cmd, "algorithm", "entropy valuation algorithm", choices=ALGORITHMS)
    _add(p, cmd, "n_bags", "number of bags for out-of-bag valuation", type=int)
    _add(p, cmd, "pct_unseen", "fraction of rows held out of each bag", type=float)
    _add(p, cmd, "stratify", "balance labels across out-of-bag sets", action="store_true")


def _utility(p, cmd):
    _add(p, cmd, "utility", "utility function combining v_y and v_z", choices=UTILITY_KINDS)
    _add(p, cmd, "alpha", "weight of v_y in the utility, in [0, 1]", type=float)
    _add(p, cmd, "betas", "per-protected-column weights for the linear utility, comma-separated",
         type=_float_list)
    _add(p, cmd, "scaling", "weight scaling for reweighing", choices=SCALINGS)
    _add(p, cmd, "normalize", "divide alpha and betas by their sum", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fado", description="Fairness-aware data valuation and pre-processing.",
                     argument_default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset from a bias spec",
                       argument_default=argparse.SUPPRESS)
    _common(p, "synth")
    _add(p, "synth", "spec", "bias spec JSON file", metavar="PATH")
    _add(p, "synth", "out", "output CSV path", metavar="PATH")

    p = sub.add_parser("value", help="per-row valuations toward the target and protected columns",
                       argument_default=argparse.SUPPRESS)
    _common(p, "value")
    _add(p, "value", "input", "input CSV", metavar="PATH", names=["--in"])
    _schema(p, "value")
    _valuation(p, "value")
    _utility(p, "value")
    _add(p, "value", "emit_utility", "also write a utility column", action="store_true")
    _add(p, "value", "out", "output valuations CSV (id,v_y,v_z_<column>...)", metavar="PATH")

    p = sub.add_parser("preprocess", help="apply a sampling or reweighing intervention",
                       argument_default=argparse.SUPPRESS)
    _common(p, "preprocess")
    _add(p, "preprocess", "input", "input training CSV", metavar="PATH", names=["--in"])
    _schema(p, "preprocess")
    _add(p, "preprocess", "method", "intervention", choices=METHODS)
    _add(p, "preprocess", "column", "protected column the intervention balances (default: first)")
    _add(p, "preprocess", "valuations", "valuations CSV from 'fado value' (computed when omitted)",
         metavar="PATH")
    _valuation(p, "preprocess")
    _utility(p, "preprocess")
    _add(p, "preprocess", "out", "output CSV with a weight column", metavar="PATH")

    p = sub.add_parser("evaluate", help="train the model grid and score performance and fairness",
                       argument_default=argparse.SUPPRESS)
    _common(p, "evaluate")
    _add(p, "evaluate", "train", "training CSV, optionally with a weight column", metavar="PATH")
    _add(p, "evaluate", "test", "test CSV", metavar="PATH")
    _schema(p, "evaluate")
    _add(p, "evaluate", "weight_column", "training weight column, used when present")
    _add(p, "evaluate", "column", "protected column for fairness ratios (default: first)")
    _add(p, "evaluate", "grid_size", "number of sampled model configurations", type=int)
    _add(p, "evaluate", "learner", "learner family for the grid", choices=LEARNER_KINDS)
    _add(p, "evaluate", "max_estimators", "cap on boosting rounds in the grid", type=int)
    _add(p, "evaluate", "fpr", "false positive rate ceiling for thresholds", type=float)
    _add(p, "evaluate", "out", "output report JSON", metavar="PATH")

    p = sub.add_parser("benchmark", help="run every intervention against the model grid",
                       argument_default=argparse.SUPPRESS)
    _common(p, "benchmark")
    _add(p, "benchmark", "spec", "bias spec JSON file for synthetic data", metavar="PATH")
    _add(p, "benchmark", "data", "CSV to use instead of synthetic data", metavar="PATH")
    _schema(p, "benchmark")
    _add(p, "benchmark", "column", "protected column for interventions and ratios (default: first)")
    _add(p, "benchmark", "train_fraction", "leading fraction of rows used for training", type=float)
    _add(p, "benchmark", "shuffle", "shuffle rows before splitting", action="store_true")
    _valuation(p, "benchmark")
    _add(p, "benchmark", "alphas", "alpha values for the utility-aware sweeps, comma-separated",
         type=_float_list)
    _add(p, "benchmark", "grid_size", "number of sampled model configurations", type=int)
    _add(p, "benchmark", "learner", "learner family for the grid", choices=LEARNER_KINDS)
    _add(p, "benchmark", "max_estimators", "cap on boosting rounds in the grid", type=int)
    _add(p, "benchmark", "fpr", "false positive rate ceiling for thresholds", type=float)
    _add(p, "benchmark", "threshold_mode", "where thresholds are chosen", choices=["test", "validation"])
    _add(p, "benchmark", "plots", "skip the SVG plots", action="store_false", names=["--no-plots"])
    _add(p, "benchmark", "out_dir", "directory for report.json, points.csv and SVGs", metavar="PATH")
    return parser


def _load_config(path: str | None, cmd: str) -> dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise FadoValidationError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FadoValidationError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise FadoValidationError(f"{p}: expected a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    if "in" in data:
        data["input"] = data.pop("in")
    unknown = sorted(set(data) - set(DEFAULTS[cmd]))
    if unknown:
        raise FadoValidationError(f"{p}: unknown option(s) for {cmd}: {unknown}")
    return data


def merge_config(cmd: str, ns: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then the config file, then explicit flags."""
    given = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    if isinstance(given.get("protected"), list):
        given["protected"] = [c for chunk in given["protected"] for c in chunk]
    merged = {**DEFAULTS[cmd], **_load_config(getattr(ns, "config", None), cmd), **given}
    if isinstance(merged.get("protected"), str):
        merged["protected"] = _csv_list(merged["protected"])
    for key in REQUIRED[cmd]:
        if merged.get(key) in (None, [], ""):
            raise FadoValidationError(f"missing required option {_flag(key) if key != 'input' else '--in'}")
    if merged["threads"] is None:
        merged["threads"] = os.cpu_count() or 1
    if merged["threads"] < 1:
        raise FadoValidationError("--threads must be >= 1")
    merged["_explicit"] = sorted(given)
    return merged


def _schema_from(cfg, ignore: Sequence[str] = ()) -> DatasetSchema:
    return DatasetSchema(
        target_column=cfg["target"],
        protected_columns=tuple(cfg["protected"]),
        id_column=cfg["id"],
        include_protected=not cfg["exclude_protected"],
        ignore_columns=tuple(ignore),
    )


def _valuation_config(cfg) -> ValuationConfig:
    return ValuationConfig(algorithm=cfg["algorithm"], n_bags=cfg["n_bags"], pct_unseen=cfg["pct_unseen"],
                           seed=cfg["seed"], stratify=cfg["stratify"])


def _utility_config(cfg) -> UtilityConfig:
    return UtilityConfig(kind=cfg["utility"], alpha=cfg["alpha"], betas=cfg["betas"], scaling=cfg["scaling"],
                         normalize=cfg["normalize"])


def _sidecar_path(out: Path) -> Path:
    return out.with_name(out.name + ".config.json")


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _echo(cfg: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def _out_path(value: str) -> Path:
    out = Path(value)
    if not out.parent.exists():
        raise FadoValidationError(f"output directory does not exist: {out.parent}")
    return out


def _bias_spec(spec, seed_override: int | None) -> BiasSpec:
    data = spec if isinstance(spec, dict) else _read_json(spec)
    if seed_override is not None:
        data = {**data, "seed": seed_override}
    return BiasSpec.from_dict(data)


def _read_json(path) -> Any:
    p = Path(path)
    if not p.is_file():
        raise FadoValidationError(f"file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FadoValidationError(f"{p}: invalid JSON ({exc})") from None


def cmd_synth(cfg) -> None:
    out = _out_path(cfg["out"])
    seed = cfg["seed"] if "seed" in cfg["_explicit"] else None
    spec = _bias_spec(cfg["spec"], seed)
    data = generate(spec)
    write_csv(data, out)
    _write_json(_sidecar_path(out), {"command": "synth", "config": _echo(cfg), "bias_spec": spec.to_dict(),
                                     "schema": {"target": data.target_name, "protected": list(data.protected),
                                                "id": data.id_name, "exclude_protected": not spec.include_protected}})
    logger.info("wrote %d rows to %s", data.n, out)


def cmd_value(cfg) -> None:
    out = _out_path(cfg["out"])
    data = load_csv(cfg["input"], _schema_from(cfg, ignore=["weight"]))
    vcfg = _valuation_config(cfg)
    vals = value_dataset(data, vcfg, threads=cfg["threads"])
    utility = None
    if cfg["emit_utility"]:
        utility = compute_utility(vals.v_y, vals.v_z, _utility_config(cfg), ids=vals.ids).U
    vals.to_csv(out, utility=utility, id_name=data.id_name)
    vals.write_sidecar(_sidecar_path(out), {"command": "value", "config": _echo(cfg)})
    logger.info("wrote valuations for %d rows to %s", data.n, out)


def cmd_preprocess(cfg) -> None:
    out = _out_path(cfg["out"])
    data = load_csv(cfg["input"], _schema_from(cfg, ignore=["weight"]))
    column = cfg["column"] or next(iter(data.protected))
    if column not in data.protected:
        raise FadoValidationError(f"--column {column!r} is not a protected column")
    method = cfg["method"]
    provenance_extra: dict[str, Any] = {}
    if method in ("uasp", "uar"):
        if cfg["valuations"]:
            vals = ValuationVector.from_csv(cfg["valuations"])
            if not np.array_equal(vals.ids.astype(str), data.ids.astype(str)):
                raise FadoValidationError("valuation ids do not match the input rows")
            vals = ValuationVector(ids=data.ids, v_y=vals.v_y, v_z=vals.v_z)
        else:
            vals = value_dataset(data, _valuation_config(cfg), threads=cfg["threads"])
            provenance_extra["valuation_config"] = vals.config.to_dict()
        ucfg = _utility_config(cfg)
        util = compute_utility(vals.v_y, vals.v_z, ucfg, ids=vals.ids)
        result = uasp(data, util, column) if method == "uasp" else uar(data, util, scaling=ucfg.scaling)
    elif method == "rps":
        result = rps(data, column, seed=cfg["seed"])
    elif method == "rw":
        result = rw(data, column)
    else:
        result = no_intervention(data)
    kept, weights = result.apply(data)
    write_csv(kept, out, extra_columns={"weight": weights})
    _write_json(_sidecar_path(out), {"command": "preprocess", "config": _echo(cfg), "method": result.kind,
                                     "provenance": {**result.provenance, **provenance_extra},
                                     "rows_in": data.n, "rows_out": kept.n})
    logger.info("%s kept %d of %d rows; wrote %s", method, kept.n, data.n, out)


def _grid(cfg):
    return sample_grid(cfg["learner"], n_models=cfg["grid_size"], seed=cfg["seed"],
                       max_estimators=cfg["max_estimators"])


def cmd_evaluate(cfg) -> None:
    out = _out_path(cfg["out"])
    wcol = cfg["weight_column"]
    schema = _schema_from(cfg, ignore=[wcol] if wcol else [])
    train = load_csv(cfg["train"], schema)
    test = load_csv(cfg["test"], schema)
    weights = None
    if wcol:
        header = Path(cfg["train"]).read_text(encoding="utf-8").splitlines()[0].split(",")
        if wcol in [h.strip() for h in header]:
            weights = read_column(cfg["train"], wcol)
        elif "weight_column" in cfg["_explicit"]:
            raise FadoValidationError(f"--weight-column {wcol!r} not found in {cfg['train']}")
    report = evaluate_grid(train, test, _grid(cfg), weights=weights, fpr_target=cfg["fpr"],
                           protected_column=cfg["column"], threads=cfg["threads"])
    out.write_text(report.to_json(), encoding="utf-8")
    _write_json(_sidecar_path(out), {"command": "evaluate", "config": _echo(cfg)})
    logger.info("evaluated %d models; wrote %s", len(report.points), out)


def _benchmark_data(cfg):
    if (cfg["spec"] is None) == (cfg["data"] is None):
        raise FadoValidationError("benchmark needs exactly one of --spec or --data")
    if cfg["spec"] is not None:
        seed = cfg["seed"] if "seed" in cfg["_explicit"] else None
        spec = _bias_spec(cfg["spec"], seed)
        return generate(spec), {"bias_spec": spec.to_dict()}
    for key in ("target", "protected"):
        if not cfg[key]:
            raise FadoValidationError(f"missing required option {_flag(key)} (needed with --data)")
    return load_csv(cfg["data"], _schema_from(cfg, ignore=["weight"])), {}


def cmd_benchmark(cfg) -> None:
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    data, extra = _benchmark_data(cfg)
    train, test = split_ordered(data, cfg["train_fraction"], shuffle=cfg["shuffle"], seed=cfg["seed"])
    report = run_benchmark(
        train,
        test,
        default_interventions(seed=cfg["seed"], alphas=cfg["alphas"]),
        _grid(cfg),
        fpr_target=cfg["fpr"],
        seed=cfg["seed"],
        protected_column=cfg["column"],
        valuation=_valuation_config(cfg),
        threads=cfg["threads"],
        threshold_mode=cfg["threshold_mode"],
    )
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    report.write_points_csv(out_dir / "points.csv")
    if cfg["plots"]:
        from fado.evaluation.plot import write_svg

        for metric in FAIRNESS_METRICS:
            write_svg(report, metric, out_dir / f"{metric}.svg")
    _write_json(out_dir / "config.json", {"command": "benchmark", "config": _echo(cfg), **extra})
    logger.info("benchmarked %d points; wrote %s", len(report.points), out_dir)


COMMANDS = {
    "synth": cmd_synth,
    "value": cmd_value,
    "preprocess": cmd_preprocess,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if getattr(ns, "command", None) is None:
            parser.print_help(sys.stderr)
            return EXIT_INVALID
        cfg = merge_config(ns.command, ns)
        logging.basicConfig(stream=sys.stderr, level=cfg["log_level"],
                            format="%(levelname)s %(name)s: %(message)s", force=True)
        logging.captureWarnings(True)
        COMMANDS[ns.command](cfg)
        return EXIT_OK
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (FadoValidationError, FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        print(f"fado: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        logger.debug("runtime failure", exc_info=True)
        print(f"fado: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
