"""
Delimited-text result files.

Every table is a header plus comma-separated rows. Floats are written with 17
significant digits and read back with pandas' round-trip parser, so a value
survives a write/read cycle exactly. Writes go to a temporary file in the
target directory and are renamed into place. Timestamps live only in the
``run.json`` sidecar, keeping the tables themselves byte-reproducible.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import asdict
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from tailgini.errors import DataFormatError
from tailgini.sample_core import PairedSample

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

LOSS_COLUMNS = ("x", "y")
REPLICATION_COLUMNS = (
    "replication", "alpha", "alpha1", "alpha2", "k", "k1", "k2", "p",
    "theta_intermediate", "gamma1_hat", "eta_hat", "d_n", "theta_extreme", "theta_hw",
    "true_value", "ratio_aie", "ratio_hw", "error",
)
SMSE_COLUMNS = ("model", "p", "method", "varying", "alpha", "alpha1", "alpha2", "smse", "count")
RATIO_COLUMNS = ("model", "p", "method", "mean", "sd", "count")
QQ_COLUMNS = ("model", "p", "rank", "log_ratio", "standardized", "normal_quantile")
TRUE_VALUE_COLUMNS = ("model", "p", "true_value", "reps", "size", "excluded")


def write_table(path: str | Path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.debug("wrote %d row(s) to %s", len(frame), path)
    return path


def read_table(path: str | Path, columns: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip", keep_default_na=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataFormatError(f"{path}: missing column(s) {missing}; expected header {','.join(columns)}")
    return frame


def write_losses(path: str | Path, sample: PairedSample) -> Path:
    return write_table(path, pd.DataFrame({"x": sample.x, "y": sample.y}))


def read_losses(path: str | Path) -> PairedSample:
    frame = read_table(path, LOSS_COLUMNS)
    try:
        x = pd.to_numeric(frame["x"], errors="raise").to_numpy(dtype=float)
        y = pd.to_numeric(frame["y"], errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    bad = np.flatnonzero(~(np.isfinite(x) & np.isfinite(y)))
    if bad.size:
        raise DataFormatError(f"{path}: row {bad[0] + 2} holds a missing or non-finite value")
    return PairedSample(x, y)


def replications_frame(records: Iterable) -> pd.DataFrame:
    rows = []
    for r in records:
        rows.append({
            "replication": r.replication,
            "alpha": r.point.alpha,
            "alpha1": r.point.alpha1,
            "alpha2": r.point.alpha2,
            "k": r.k, "k1": r.k1, "k2": r.k2, "p": r.p,
            "theta_intermediate": r.theta_intermediate,
            "gamma1_hat": r.gamma1_hat,
            "eta_hat": r.eta_hat,
            "d_n": r.d_n,
            "theta_extreme": r.theta_extreme,
            "theta_hw": r.theta_hw,
            "true_value": r.true_value,
            "ratio_aie": r.ratio("AIE") if r.ok else np.nan,
            "ratio_hw": r.ratio("HW") if r.ok else np.nan,
            "error": r.error or "",
        })
    return pd.DataFrame(rows, columns=list(REPLICATION_COLUMNS))


def smse_frame(rows: Iterable) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "model": r.model, "p": r.p, "method": r.method, "varying": r.varying,
                "alpha": r.point.alpha, "alpha1": r.point.alpha1, "alpha2": r.point.alpha2,
                "smse": np.nan if r.smse is None else r.smse, "count": r.count,
            }
            for r in rows
        ],
        columns=list(SMSE_COLUMNS),
    )


def ratio_frame(rows: Iterable) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows], columns=list(RATIO_COLUMNS))


def qq_frame(model: str, p: float, diagnostics) -> pd.DataFrame:
    return pd.DataFrame(
        [{"model": model, "p": p, **asdict(row)} for row in diagnostics.rows],
        columns=list(QQ_COLUMNS),
    )


def write_true_values(path: str | Path, rows: Iterable[Mapping[str, Any]]) -> Path:
    return write_table(path, pd.DataFrame(list(rows), columns=list(TRUE_VALUE_COLUMNS)))


def read_true_values(path: str | Path, model: str | None = None) -> dict[float, float]:
    """p -> true value, optionally restricted to one model label."""
    frame = read_table(path, ("p", "true_value"))
    if model is not None and "model" in frame.columns:
        frame = frame[frame["model"].astype(str) == model]
    if frame.empty:
        raise DataFormatError(f"{path}: no true values{f' for {model}' if model else ''}")
    return {float(p): float(v) for p, v in zip(frame["p"], frame["true_value"])}


def write_run_metadata(out_dir: str | Path, command: str, settings: Mapping[str, Any]) -> Path:
    """``run.json``: the only place wall-clock time and package versions are recorded."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    versions = {}
    for package in ("tailgini", "numpy", "scipy", "pandas"):
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = None
    payload = {
        "command": command,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "versions": versions,
        "settings": {k: (str(v) if isinstance(v, Path) else v) for k, v in settings.items()},
    }
    path = out_dir / "run.json"
    fd, tmp = tempfile.mkstemp(prefix=".run.json.", dir=out_dir)
    try:
        with os.fdopen(fd, "w") as handle:
            json.dump(payload, handle, indent=2, default=str)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path
