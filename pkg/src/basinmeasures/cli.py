"""Command line entry point: ``basinmeasures {classify,measures,sweep,pareto,models}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import harness
from .config import MODEL_DEFAULTS, RunConfig, parse_value
from .core import ConfigurationError, UsageError
from .models import FAMILIES

log = logging.getLogger("basinmeasures")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--model", help="model name (overrides model.name)")
    p.add_argument("--seed", type=int, help="RNG seed (perturbation.seed)")
    p.add_argument("--count", type=int, help="number of perturbations (perturbation.count)")
    p.add_argument("--workers", type=int, help="worker processes; never changes results")
    p.add_argument("--out", type=Path, help="output directory (output.dir)")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="PATH=VALUE",
                   help="override a config key by dotted path, e.g. model.params.k=0.3 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="basinmeasures",
                                     description="Monte-Carlo stability and resilience measures for ODE attractors.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify perturbed initial conditions as safe/unsafe")
    _common(p)

    p = sub.add_parser("measures", help="compute every estimator from one outcome set")
    _common(p)
    p.add_argument("--outcomes", type=Path, help="read outcomes from this CSV instead of integrating")

    p = sub.add_parser("sweep", help="measures over a range of one model parameter")
    _common(p)

    p = sub.add_parser("pareto", help="yield and measures along harvest strategies")
    _common(p)

    p = sub.add_parser("models", help="information about the bundled models")
    p.add_argument("action", choices=["list"])
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.sets:
        if "=" not in item:
            raise ConfigurationError(f"--set expects PATH=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = parse_value(value)
    for flag, path in (("model", "model.name"), ("seed", "perturbation.seed"), ("count", "perturbation.count"),
                       ("workers", "workers")):
        v = getattr(args, flag)
        if v is not None:
            out[path] = v
    if args.out is not None:
        out["output.dir"] = str(args.out)
    return out


def load_config(args) -> RunConfig:
    overrides = _overrides(args)
    if args.config is not None:
        return RunConfig.load(args.config, overrides)
    return RunConfig.from_dict({}, overrides)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.doc["output"]["dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_classify(cfg: RunConfig) -> Path:
    point, outcomes = harness.run_classify(cfg)
    out = _out_dir(cfg)
    path = out / harness.OUTCOMES_FILE
    harness.write_outcomes(path, outcomes, point.model.dim)
    harness.write_metadata(out / "outcomes.meta.json", cfg, "classify")
    return path


def cmd_measures(cfg: RunConfig, outcomes: Path | None = None) -> Path:
    rep = harness.run_measures(cfg, outcomes)
    out = _out_dir(cfg)
    harness.write_report(out, rep)
    harness.write_metadata(out / "report.meta.json", cfg, "measures")
    return out / harness.REPORT_JSON


def cmd_sweep(cfg: RunConfig) -> Path:
    rows = harness.run_sweep(cfg)
    out = _out_dir(cfg)
    path = out / harness.SWEEP_FILE
    harness.write_reports_csv(path, rows)
    harness.write_metadata(out / "sweep.meta.json", cfg, "sweep")
    return path


def cmd_pareto(cfg: RunConfig) -> Path:
    rows = harness.run_pareto(cfg)
    out = _out_dir(cfg)
    path = out / harness.PARETO_FILE
    harness.write_reports_csv(path, rows)
    harness.write_metadata(out / "pareto.meta.json", cfg, "pareto")
    return path


def models_list() -> str:
    lines = []
    for name, (_, cls) in FAMILIES.items():
        defaults = asdict(cls())
        lines.append(f"{name}: " + ", ".join(f"{f.name}={defaults[f.name]}" for f in fields(cls)))
        lines.append(f"  defaults: {json.dumps(MODEL_DEFAULTS[name], sort_keys=True)}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "models":
        print(models_list())
        return 0
    try:
        cfg = load_config(args)
        if args.command == "classify":
            path = cmd_classify(cfg)
        elif args.command == "measures":
            path = cmd_measures(cfg, args.outcomes)
        elif args.command == "sweep":
            path = cmd_sweep(cfg)
        else:
            path = cmd_pareto(cfg)
    except (ConfigurationError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
