"""The four run types behind the command line, plus their file formats.

Every writer emits floats with 17 significant digits and a fixed column order,
so equal inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import asdict, replace
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig, sweep_params, sweep_values
from .core import ConfigurationError, TrajectoryOutcome, UsageError, Verdict
from .measures import MeasureReport, format_value, lambda_max, reports_to_csv, summarize
from .models import fish
from .sample import RNG_NAME
from .scenario import Point, build_point, classify_point, evaluate, model_dim, with_equilibrium_columns

log = logging.getLogger(__name__)

OUTCOMES_FILE = "outcomes.csv"
REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
SWEEP_FILE = "sweep.csv"
PARETO_FILE = "pareto.csv"


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def metadata_doc(cfg: RunConfig, command: str) -> dict:
    """Sidecar contents. Excludes the worker count, which never affects results."""
    doc = {k: v for k, v in cfg.doc.items() if k not in ("workers", "output")}
    return {
        "command": command,
        "package_version": _version(),
        "rng": RNG_NAME,
        "seed": cfg.seed,
        "integrator": asdict(cfg.integrator),
        "config": doc,
    }


def write_metadata(path: Path, cfg: RunConfig, command: str) -> None:
    path.write_text(json.dumps(metadata_doc(cfg, command), indent=2, sort_keys=True, default=str) + "\n")


# -- outcomes files ---------------------------------------------------------------

def outcome_header(dim: int) -> list[str]:
    return (["idx"] + [f"x{i + 1}" for i in range(dim)] + ["verdict", "return_time"]
            + [f"term_x{i + 1}" for i in range(dim)])


def write_outcomes(path: Path, outcomes: Sequence[TrajectoryOutcome], dim: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(outcome_header(dim))
        for i, o in enumerate(outcomes):
            w.writerow([i] + [format_value(float(v)) for v in o.initial_condition] + [o.verdict.value,
                       format_value(o.return_time)] + [format_value(float(v)) for v in o.terminal_state])


def read_outcomes(path: Path, dim: Optional[int] = None) -> list[TrajectoryOutcome]:
    """Parse an outcomes file, validating the header against the expected layout."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty outcomes file") from None
        n_x = sum(1 for c in header if c.startswith("x") and c[1:].isdigit())
        if dim is not None and n_x != dim:
            raise ConfigurationError(f"{path}: expected {dim} state columns x1..x{dim}, found {n_x}")
        expected = outcome_header(n_x)
        for i, want in enumerate(expected):
            got = header[i] if i < len(header) else "<missing>"
            if got != want:
                raise ConfigurationError(f"{path}: column {i + 1} is {got!r}, expected {want!r}")
        if len(header) > len(expected):
            raise ConfigurationError(f"{path}: unexpected column {header[len(expected)]!r}")
        out = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                x = np.array([float(v) for v in row[1:1 + n_x]])
                verdict = Verdict(row[1 + n_x])
                rt = float(row[2 + n_x]) if row[2 + n_x] != "" else None
                term = np.array([float(v) for v in row[3 + n_x:3 + 2 * n_x]])
            except (ValueError, IndexError) as exc:
                raise ConfigurationError(f"{path}: line {line}: {exc}") from exc
            out.append(TrajectoryOutcome(initial_condition=x, verdict=verdict, return_time=rt, terminal_state=term))
    return out


# -- run types --------------------------------------------------------------------

def run_classify(cfg: RunConfig) -> tuple[Point, list[TrajectoryOutcome]]:
    point = build_point(cfg)
    return point, classify_point(point, cfg)


def _lambda_or_none(point: Point) -> Optional[float]:
    try:
        return lambda_max(point.model, point.equilibrium.state)
    except UsageError as exc:
        warnings.warn(f"lambda_max not reported: {exc}", RuntimeWarning, stacklevel=2)
        return None


def run_measures(cfg: RunConfig, outcomes_path: Optional[Path] = None) -> MeasureReport:
    """All estimators from one outcome set: read from ``outcomes_path`` or classified once here."""
    if outcomes_path is None:
        rep, _, _ = evaluate(cfg, row_params=cfg.model_params)
        return rep
    point = build_point(cfg)
    outcomes = read_outcomes(Path(outcomes_path), dim=point.model.dim)
    if not outcomes:
        raise ConfigurationError(f"{outcomes_path}: no outcome rows")
    return summarize(outcomes, point.dist, tau=point.tau, t_eps=point.t_eps, restricted=point.restricted,
                     lam=_lambda_or_none(point), seed=cfg.seed, params=cfg.model_params)


def run_sweep(cfg: RunConfig) -> list[MeasureReport]:
    """One report per swept value, in increasing order, reusing the previous equilibrium as guess."""
    spec = cfg.doc["sweep"]
    if spec is None:
        raise ConfigurationError("no sweep section in the configuration")
    names = sweep_params(spec)
    count = int(spec.get("count", cfg.count))
    dim = model_dim(cfg.model_name)
    guess = None
    rows = []
    for v in sweep_values(spec):
        values = {name: v for name in names}
        rep, point, _ = evaluate(cfg, values, guess=guess, count=count, row_params=values)
        if point is not None:
            guess = point.equilibrium.state
        else:
            log.info("%s=%g: %s", ",".join(names), v, rep.status)
        rows.append(with_equilibrium_columns(rep, point, dim))
    return rows


def pareto_grids(spec: dict) -> dict[str, list[float]]:
    strategies = spec.get("strategies", ["equal", "adult"])
    if isinstance(strategies, dict):
        return {s: sweep_values(g) for s, g in strategies.items()}
    return {s: sweep_values(spec) for s in strategies}


def run_pareto(cfg: RunConfig) -> list[MeasureReport]:
    """Yield and measures along each harvest strategy."""
    spec = cfg.doc["pareto"]
    if spec is None:
        raise ConfigurationError("no pareto section in the configuration")
    count = int(spec.get("count", cfg.count))
    rows = []
    for strategy, grid in pareto_grids(spec).items():
        curve = fish.STRATEGIES[strategy]
        guess = None
        for t in grid:
            h_J, h_A = curve(t)
            rep, point, _ = evaluate(cfg, {"h_J": h_J, "h_A": h_A}, guess=guess, count=count)
            if point is not None:
                guess = point.equilibrium.state
                J, A = float(point.equilibrium.state[0]), float(point.equilibrium.state[1])
                y = fish.yield_(h_J, h_A, J, A)
            else:
                y = 0.0
            rep = with_equilibrium_columns(rep, point, 3)
            params = {"strategy": strategy, "t": t, "h_J": h_J, "h_A": h_A, "yield": y, **rep.params}
            rows.append(replace(rep, params=params))
    return rows


def write_reports_csv(path: Path, reports: Sequence[MeasureReport]) -> None:
    path.write_text(reports_to_csv(reports))


def write_report(out_dir: Path, rep: MeasureReport) -> None:
    (out_dir / REPORT_JSON).write_text(rep.to_json() + "\n")
    (out_dir / REPORT_CSV).write_text(rep.to_csv())
