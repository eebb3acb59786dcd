"""CSV ingestion, run-config parsing, and result persistence.

The dataset format is a plain UTF-8 CSV with header ``x1,...,xp,y`` and no
missing values.  Run configs are flat ``key = value`` documents with ``#``
comment lines; unknown or duplicate keys are rejected by name so typos fail
fast.  All floats are serialized with ``repr``, whose shortest round-trip
representation reads back bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetError
from .simulate import (
    BETA_KINDS,
    DESIGN_KINDS,
    ESTIMATORS,
    THEOREM_TAGS,
    BetaSpec,
    DesignSpec,
    SimConfig,
    SimSummary,
)

REPLICATE_HEADER = ("rep", "loss", "rhs", "covered", "A1", "A2", "A3", "M", "B1", "B2", "B3")


def load_dataset(path, standardize: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Read a dataset CSV into a design matrix and response vector.

    The header must be exactly ``x1,...,xp,y``.  With ``standardize`` each
    column of X is divided by its root mean square so the sample Gram has a
    unit diagonal.  Parse failures carry the 1-based row and column location.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError("dataset file is empty") from None
        header = [name.strip() for name in header]
        if len(header) < 2:
            raise DatasetError("header must contain x1..xp and y", row=0)
        expected = [f"x{j + 1}" for j in range(len(header) - 1)] + ["y"]
        if header != expected:
            raise DatasetError(
                f"header must be {','.join(expected)}, got {','.join(header)}", row=0
            )
        p = len(header) - 1

        rows: list[list[float]] = []
        for i, raw in enumerate(reader, start=1):
            if len(raw) != p + 1:
                raise DatasetError(
                    f"expected {p + 1} cells, found {len(raw)}", row=i
                )
            parsed = []
            for name, cell in zip(header, raw):
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"non-numeric value {cell.strip()!r}", row=i, column=name
                    ) from None
                if not math.isfinite(value):
                    raise DatasetError(
                        f"non-finite value {cell.strip()!r}", row=i, column=name
                    )
                parsed.append(value)
            rows.append(parsed)

    if not rows:
        raise DatasetError("dataset has no data rows", row=1)
    data = np.asarray(rows, dtype=float)
    x, y = data[:, :p].copy(), data[:, p].copy()
    if standardize:
        scale = np.sqrt((x * x).mean(axis=0))
        dead = np.nonzero(scale == 0.0)[0]
        if dead.size:
            raise DatasetError(
                "cannot standardize an all-zero column", column=f"x{dead[0] + 1}"
            )
        x = x / scale
    return x, y


# Config keys, their parsers, and the order used when serializing.
_TRUTHY = {"true": True, "false": False}


def _parse_bool(raw: str) -> bool:
    try:
        return _TRUTHY[raw.lower()]
    except KeyError:
        raise ValueError(f"expected true or false, got {raw!r}") from None


def _parse_floats(raw: str) -> tuple[float, ...]:
    return tuple(float(part) for part in raw.split(","))


@dataclass(frozen=True)
class RunConfig:
    """Typed view of a config file; see README for the key reference."""

    design: str
    n: int
    p: int
    tau: float
    delta: float
    estimator: str
    replicates: int
    seed: int
    rho: float | None = None
    eigenvalue: float | None = None
    diag: tuple[float, ...] | None = None
    sigma_csv: str | None = None
    normalize_columns: bool = False
    beta: tuple[float, ...] | None = None
    beta_kind: str | None = None
    beta_magnitude: float = 1.0
    beta_s: int | None = None
    k: int = 1
    r: float = 0.5
    mu: float | None = None
    theorem: str | None = None
    constant_mode: str = "proof"
    constant_c: float | None = None
    residual: float = 1.0
    phi: float | None = None
    out_dir: str | None = None
    plot: bool = True


_KEY_PARSERS = {
    "design": str,
    "n": int,
    "p": int,
    "rho": float,
    "eigenvalue": float,
    "diag": _parse_floats,
    "sigma_csv": str,
    "normalize_columns": _parse_bool,
    "beta": _parse_floats,
    "beta_kind": str,
    "beta_magnitude": float,
    "beta_s": int,
    "tau": float,
    "delta": float,
    "estimator": str,
    "k": int,
    "r": float,
    "mu": float,
    "theorem": str,
    "constant_mode": str,
    "constant_c": float,
    "residual": float,
    "phi": float,
    "replicates": int,
    "seed": int,
    "out_dir": str,
    "plot": _parse_bool,
}
_REQUIRED_KEYS = ("design", "n", "p", "tau", "delta", "estimator", "replicates", "seed")
# Design-parameter keys only meaningful for one kind.
_DESIGN_ONLY = {"rho": "ar1", "eigenvalue": "rank_one", "diag": "diagonal", "sigma_csv": "custom"}


def parse_config_text(text: str) -> RunConfig:
    values: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno} is not a 'key = value' entry: {line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _KEY_PARSERS:
            raise ConfigError("unknown config key", key=key)
        if key in values:
            raise ConfigError("duplicate config key", key=key)
        if not raw_value:
            raise ConfigError("empty value", key=key)
        try:
            values[key] = _KEY_PARSERS[key](raw_value)
        except ValueError as exc:
            raise ConfigError(f"cannot parse value {raw_value!r}: {exc}", key=key) from None

    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ConfigError("missing required config key", key=key)

    design = values["design"]
    if design not in DESIGN_KINDS:
        raise ConfigError(f"design must be one of {DESIGN_KINDS}", key="design")
    for key, kind in _DESIGN_ONLY.items():
        if key in values and design != kind:
            raise ConfigError(f"only valid for design = {kind}", key=key)
    if values["estimator"] not in ESTIMATORS:
        raise ConfigError(f"estimator must be one of {ESTIMATORS}", key="estimator")
    if "theorem" in values and values["theorem"] not in THEOREM_TAGS:
        raise ConfigError(f"theorem must be one of {THEOREM_TAGS}", key="theorem")
    if "beta" in values and "beta_kind" in values:
        raise ConfigError("give either beta or beta_kind, not both", key="beta_kind")
    if "beta" not in values and "beta_kind" not in values:
        raise ConfigError("one of beta or beta_kind is required", key="beta")
    if "beta_kind" in values and values["beta_kind"] not in BETA_KINDS[1:]:
        raise ConfigError(f"beta_kind must be one of {BETA_KINDS[1:]}", key="beta_kind")
    if "constant_mode" in values and values["constant_mode"] not in ("proof", "calibrated"):
        raise ConfigError("constant_mode must be proof or calibrated", key="constant_mode")
    return RunConfig(**values)  # type: ignore[arg-type]


def parse_config(path) -> RunConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def format_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config_text(format_config(c)) == c``."""
    lines = []
    for key in _KEY_PARSERS:
        value = getattr(cfg, key)
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def run_config_to_sim(cfg: RunConfig, base_dir=None) -> SimConfig:
    """Build the simulation config, loading any custom Gram CSV."""
    matrix = None
    if cfg.sigma_csv is not None:
        path = Path(cfg.sigma_csv)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            matrix = np.loadtxt(path, delimiter=",", ndmin=2)
        except OSError:
            raise ConfigError(f"cannot read gram CSV {path}", key="sigma_csv") from None
        except ValueError as exc:
            raise ConfigError(f"cannot parse gram CSV {path}: {exc}", key="sigma_csv") from None
    design = DesignSpec(
        kind=cfg.design,
        n=cfg.n,
        p=cfg.p,
        rho=cfg.rho,
        eigenvalue=cfg.eigenvalue,
        values=cfg.diag,
        matrix=matrix,
        normalize_columns=cfg.normalize_columns,
    )
    if cfg.beta is not None:
        beta = BetaSpec(kind="explicit", vector=cfg.beta)
    else:
        beta = BetaSpec(kind=cfg.beta_kind, magnitude=cfg.beta_magnitude, s=cfg.beta_s)
    return SimConfig(
        design=design,
        beta=beta,
        tau=cfg.tau,
        delta=cfg.delta,
        estimator=cfg.estimator,
        replicates=cfg.replicates,
        seed=cfg.seed,
        k=cfg.k,
        r=cfg.r,
        mu=cfg.mu,
        theorem=cfg.theorem,
        constant_mode=cfg.constant_mode,
        constant_c=cfg.constant_c,
        residual=cfg.residual,
        phi=cfg.phi,
    )


def run_id_for(cfg: RunConfig) -> str:
    """Stable hex id derived from the canonical config text."""
    return hashlib.sha256(format_config(cfg).encode("utf-8")).hexdigest()[:16]


def config_echo(cfg: RunConfig) -> dict:
    echo = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        echo[f.name] = list(value) if isinstance(value, tuple) else value
    return echo


def _csv_float(value: float) -> str:
    return repr(float(value))


def write_replicates_csv(summary: SimSummary, path) -> None:
    """Per-replicate table with the pinned header, one line per replicate."""
    lines = [",".join(REPLICATE_HEADER)]
    for rec in summary.records:
        cells = [
            str(rec.rep),
            _csv_float(rec.loss),
            _csv_float(rec.rhs),
            "1" if rec.covered else "0",
        ]
        cells.extend("1" if rec.flags[name] else "0" for name in REPLICATE_HEADER[4:])
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def summary_dict(summary: SimSummary, cfg: RunConfig | None = None) -> dict:
    doc = {
        "coverage": summary.coverage,
        "covered_count": summary.covered_count,
        "replicates": summary.replicates,
        "mean_loss": summary.mean_loss,
        "median_loss": summary.median_loss,
        "constant_mode": summary.constant_mode,
        "constant": summary.constant,
        "theorem": summary.theorem,
        "rhs": summary.rhs,
        "bias": summary.bias,
        "variance": summary.variance,
        "deviation_event_rates": dict(summary.deviation_event_rates),
        "signal_condition": summary.signal_condition,
        "error_count": summary.error_count,
    }
    if cfg is not None:
        doc["run_id"] = run_id_for(cfg)
        doc["config"] = config_echo(cfg)
    return doc


def write_summary_json(summary: SimSummary, path, cfg: RunConfig | None = None) -> None:
    Path(path).write_text(
        json.dumps(summary_dict(summary, cfg), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_result_json(record: dict, path) -> None:
    """Persist a fit/verify result record as sorted, indented JSON."""
    Path(path).write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
