"""CSV ingestion, descriptive statistics, run manifests and atomic file output."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, EmptyDataError, SchemaError

__all__ = [
    "Dataset",
    "ingest_csv",
    "read_dataset",
    "describe",
    "format_describe",
    "RunManifest",
    "file_digest",
    "atomic_write",
]

MANIFEST_SCHEMA_VERSION = 1


@dataclass
class Dataset:
    response: str
    covariates: list
    y: np.ndarray
    Z: np.ndarray  # covariate columns, without the constant
    intercept: bool = True
    n_dropped: int = 0
    dropped_rows: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def X(self) -> np.ndarray:
        if self.intercept:
            return np.column_stack([np.ones(self.n), self.Z])
        return self.Z.copy()

    @property
    def names(self) -> list:
        return (["(intercept)"] if self.intercept else []) + list(self.covariates)

    def column(self, name: str) -> np.ndarray:
        if name == self.response:
            return self.y
        return self.Z[:, self.covariates.index(name)]


def _parse(cell: str) -> float:
    cell = cell.strip()
    if cell == "":
        return math.nan
    try:
        return float(cell)
    except ValueError:
        return math.nan


def ingest_csv(path, response: str, covariates: Sequence[str] = (), intercept: bool = True) -> Dataset:
    """Read the response and covariate columns of a header-first CSV file.

    Rows with a missing or non-finite value in a used column are dropped and
    counted.  Non-positive responses raise :class:`DomainError` listing the
    offending data rows (1-based, header excluded).
    """
    covariates = list(covariates)
    used = [response] + covariates
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataError(f"{path}: empty file") from None
        missing = [c for c in used if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = [header.index(c) for c in used]
        values, dropped, bad = [], [], []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            vals = [_parse(row[i]) if i < len(row) else math.nan for i in idx]
            if not all(math.isfinite(v) for v in vals):
                dropped.append(rownum)
                continue
            if vals[0] <= 0:
                bad.append(rownum)
            values.append(vals)
    if bad:
        shown = ", ".join(str(r) for r in bad[:20]) + (" ..." if len(bad) > 20 else "")
        raise DomainError(f"{path}: response {response!r} must be > 0; offending row(s): {shown}")
    if not values:
        raise EmptyDataError(f"{path}: no usable rows")
    arr = np.array(values, dtype=float).reshape(len(values), len(used))
    ds = Dataset(response, covariates, arr[:, 0], arr[:, 1:], intercept, len(dropped), dropped)
    p = ds.Z.shape[1] + int(intercept)
    if not ds.n > p:
        raise EmptyDataError(f"{path}: {ds.n} usable rows for {p} coefficients")
    return ds


read_dataset = ingest_csv


def describe(columns: dict) -> dict:
    """Mean, median, SD, CV, CS, CK, min, max and n for each named column.

    SD uses the n-1 denominator; skewness and kurtosis are the moment ratios
    m3/m2^1.5 and m4/m2^2.  CV is None (undefined) for a zero mean, and the
    moment ratios are None for a constant column.
    """
    out = {}
    for name, x in columns.items():
        x = np.asarray(x, dtype=float)
        if x.size < 2:
            raise EmptyDataError(f"column {name!r} needs at least 2 values")
        mean = float(np.mean(x))
        sd = float(np.std(x, ddof=1))
        d = x - mean
        m2 = float(np.mean(d**2))
        m3 = float(np.mean(d**3))
        m4 = float(np.mean(d**4))
        out[name] = {
            "mean": mean,
            "median": float(np.median(x)),
            "sd": sd,
            "cv": None if mean == 0 else sd / mean,
            "cs": None if m2 == 0 else m3 / m2**1.5,
            "ck": None if m2 == 0 else m4 / m2**2,
            "min": float(np.min(x)),
            "max": float(np.max(x)),
            "n": int(x.size),
        }
    return out


def format_describe(summary: dict) -> str:
    stats = ["mean", "median", "sd", "cv", "cs", "ck", "min", "max", "n"]
    lines = [f"{'':<14}" + "".join(f"{s.upper():>12}" for s in stats)]
    for name, row in summary.items():
        cells = []
        for s in stats:
            v = row[s]
            cells.append(f"{'-':>12}" if v is None else f"{v:>12.4g}" if s != "n" else f"{v:>12d}")
        lines.append(f"{name:<14}" + "".join(cells))
    return "\n".join(lines)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary sibling file, then rename over ``path``."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    """Everything needed to repeat a CLI run: command, options, seed, inputs."""

    command: str
    config: dict
    seed: Optional[int]
    version: str
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: list = field(default_factory=list)
    rows_dropped: int = 0
    started: str = field(default_factory=_now)
    finished: Optional[str] = None
    exit_code: Optional[int] = None
    schema_version: int = MANIFEST_SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        d = json.loads(text)
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path) as fh:
            return cls.from_json(fh.read())
