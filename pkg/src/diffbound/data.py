"""Dataset container, strict CSV ingestion and structural validation."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

MIN_CELL_WARN = 10

# decimal point '.', optional exponent, no thousands separators
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_MISSING = {"", "na", "nan", "null", "none"}


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Outcome, two binary treatments and a covariate matrix.

    Arrays are copied and made read-only on construction, so instances can be
    shared freely between threads.

    Parameters
    ----------
    y : array_like, shape (n,)
    z1, z2 : array_like of {0, 1}, shape (n,)
    x : array_like, shape (n, l) or (n,)
    x_names : sequence of str, optional
    """

    y: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    x: np.ndarray
    x_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim != 1 or x.ndim != 2:
            raise DataError("y must be a vector and x a matrix", stage="validate")
        n = y.shape[0]
        if n < 1:
            raise DataError("dataset is empty", stage="validate")
        z1 = np.asarray(self.z1)
        z2 = np.asarray(self.z2)
        for name, z in (("z1", z1), ("z2", z2)):
            if z.shape != (n,):
                raise DataError(f"{name} has length {z.shape[0] if z.ndim else 0}, expected {n}",
                                stage="validate")
            if not np.all((z == 0) | (z == 1)):
                raise DataError(f"{name} must contain only 0/1", stage="validate")
        if x.shape[0] != n:
            raise DataError(f"x has {x.shape[0]} rows, expected {n}", stage="validate")
        if x.shape[1] < 1:
            raise DataError("at least one covariate column is required", stage="validate")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise DataError("y and x must be finite", stage="validate")
        names = tuple(self.x_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError("x_names length does not match covariate count", stage="validate")
        object.__setattr__(self, "y", _frozen(y, np.float64))
        object.__setattr__(self, "z1", _frozen(z1, np.int8))
        object.__setattr__(self, "z2", _frozen(z2, np.int8))
        object.__setattr__(self, "x", _frozen(x, np.float64))
        object.__setattr__(self, "x_names", names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.x.shape[1]

    def take(self, idx) -> "Dataset":
        """Row subset (or bootstrap resample) in the order of ``idx``."""
        idx = np.asarray(idx)
        return Dataset(self.y[idx], self.z1[idx], self.z2[idx], self.x[idx], self.x_names)

    def with_y(self, y) -> "Dataset":
        return Dataset(y, self.z1, self.z2, self.x, self.x_names)


@dataclass(frozen=True)
class CellCounts:
    """Counts of the (z1, z2) cells."""

    n00: int
    n01: int
    n10: int
    n11: int

    @property
    def n(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11

    def as_dict(self) -> dict:
        return {"n00": self.n00, "n01": self.n01, "n10": self.n10, "n11": self.n11}


@dataclass
class ValidationReport:
    """Findings as ``(severity, text)`` pairs; ``ok`` is false iff any error."""

    messages: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(sev == "error" for sev, _ in self.messages)

    def error(self, text: str) -> None:
        self.messages.append(("error", text))

    def warn(self, text: str) -> None:
        self.messages.append(("warning", text))

    @property
    def errors(self) -> list[str]:
        return [t for s, t in self.messages if s == "error"]

    @property
    def warnings(self) -> list[str]:
        return [t for s, t in self.messages if s == "warning"]

    def extend(self, other: "ValidationReport") -> None:
        self.messages.extend(other.messages)


@dataclass(frozen=True)
class ColumnMap:
    """Maps dataset roles to CSV header names."""

    y: str = "y"
    z1: str = "z1"
    z2: str = "z2"
    x: tuple[str, ...] = ("x1",)

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(self.x))


def cell_counts(d: Dataset) -> CellCounts:
    z1 = d.z1.astype(bool)
    z2 = d.z2.astype(bool)
    return CellCounts(
        n00=int(np.sum(~z1 & ~z2)),
        n01=int(np.sum(~z1 & z2)),
        n10=int(np.sum(z1 & ~z2)),
        n11=int(np.sum(z1 & z2)),
    )


def differential_masks(d: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of the (1, 0) and (0, 1) cells."""
    return (d.z1 == 1) & (d.z2 == 0), (d.z1 == 0) & (d.z2 == 1)


def validate(d: Dataset, min_cell: int = MIN_CELL_WARN) -> ValidationReport:
    """Structural checks run before estimation. Never raises, never mutates."""
    rep = ValidationReport()
    cc = cell_counts(d)
    if cc.n10 == 0 or cc.n01 == 0:
        rep.error(f"empty differential cells (n10={cc.n10}, n01={cc.n01})")
    for name, z in (("z1", d.z1), ("z2", d.z2)):
        if np.all(z == z[0]):
            rep.error(f"{name} is constant")
    small = {k: v for k, v in cc.as_dict().items() if v < min_cell}
    if small and rep.ok:
        listing = ", ".join(f"{k}={v}" for k, v in small.items())
        rep.warn(f"small cell counts: {listing} (< {min_cell})")
    return rep


def _parse_number(text: str, row: int, col: str) -> float:
    s = text.strip()
    if not _NUMBER.match(s):
        raise DataError(f"row {row}, column '{col}': non-numeric value {text!r}")
    return float(s)


def read_columns(path, columns: Sequence[str], drop_missing: bool = False,
                 binary: Sequence[str] = ()) -> tuple[np.ndarray, int]:
    """Read named numeric columns from a header-first CSV.

    Row numbers in error messages count the header as row 1.

    Returns
    -------
    values : ndarray, shape (n, len(columns))
    dropped : int
        Rows skipped for missing values (only when ``drop_missing``).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    binary = set(binary)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}; header has {', '.join(header)}")
        pos = [header.index(c) for c in columns]
        rows = []
        dropped = 0
        for rownum, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"row {rownum}: expected {len(header)} fields, found {len(rec)}")
            vals = []
            skip = False
            for c, j in zip(columns, pos):
                cell = rec[j].strip()
                if cell.lower() in _MISSING:
                    if drop_missing:
                        skip = True
                        break
                    raise DataError(f"row {rownum}, column '{c}': missing value")
                if c in binary and cell not in ("0", "1"):
                    raise DataError(f"row {rownum}, column '{c}': value {cell!r} is not 0/1")
                v = _parse_number(cell, rownum, c)
                if not math.isfinite(v):
                    raise DataError(f"row {rownum}, column '{c}': non-finite value")
                vals.append(v)
            if skip:
                dropped += 1
                continue
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64), dropped


def load_csv(path, schema: ColumnMap, drop_missing: bool = False) -> Dataset:
    """Load a Dataset from CSV, mapping columns by header name.

    Parsing is strict: binary columns must hold literally 0 or 1 and every
    mapped cell must be a plain decimal number. Missing values are errors
    unless ``drop_missing`` is set, in which case affected rows are skipped.
    """
    if not schema.x:
        raise DataError("at least one covariate column is required")
    cols = [schema.y, schema.z1, schema.z2, *schema.x]
    vals, _ = read_columns(path, cols, drop_missing=drop_missing, binary=(schema.z1, schema.z2))
    return Dataset(vals[:, 0], vals[:, 1].astype(np.int8), vals[:, 2].astype(np.int8),
                   vals[:, 3:], x_names=schema.x)


def write_csv(d: Dataset, path, schema: ColumnMap | None = None) -> None:
    """Write ``d`` so that ``load_csv`` recovers it exactly (17 significant digits)."""
    schema = schema or ColumnMap(x=d.x_names)
    if len(schema.x) != d.l:
        raise DataError("schema covariate count does not match dataset")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([schema.y, schema.z1, schema.z2, *schema.x])
        for i in range(d.n):
            w.writerow([format(d.y[i], ".17g"), int(d.z1[i]), int(d.z2[i]),
                        *(format(v, ".17g") for v in d.x[i])])
