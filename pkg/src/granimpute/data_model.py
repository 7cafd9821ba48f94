"""Tabular data container, CSV/ARFF ingestion, missing mask and feature encodings."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"

DEFAULT_MISSING_TOKENS = frozenset({"", "?", "nan", "na"})
LABEL_NAMES = ("class", "label", "target")


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Table:
    """Column-oriented N x d table.

    Numeric columns are float64 arrays with NaN marking a missing cell.
    Categorical columns are object arrays of str tokens with None marking
    a missing cell. ``label_col`` names the class column, which is kept out
    of imputation and correlation.
    """

    feature_names: tuple[str, ...]
    feature_kinds: tuple[str, ...]
    columns: tuple[np.ndarray, ...]
    label_col: int | None = None

    def __post_init__(self):
        names, kinds, cols = self.feature_names, self.feature_kinds, self.columns
        if not (len(names) == len(kinds) == len(cols)):
            raise DataError("names, kinds and columns must have equal length")
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        if len(cols) == 0:
            raise DataError("empty table")
        n = len(cols[0])
        fixed = []
        for name, kind, col in zip(names, kinds, cols):
            if len(col) != n:
                raise DataError(f"column {name!r} has {len(col)} rows, expected {n}")
            if kind == NUMERIC:
                col = np.array(col, dtype=np.float64)
                if np.isinf(col).any():
                    raise DataError(f"non-finite value in numeric column {name!r}")
            elif kind == CATEGORICAL:
                col = np.array(col, dtype=object)
            else:
                raise DataError(f"unknown column kind {kind!r}")
            fixed.append(_freeze(col))
        object.__setattr__(self, "columns", tuple(fixed))
        if self.label_col is not None and not 0 <= self.label_col < len(cols):
            raise DataError(f"label column {self.label_col} out of range")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0])

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def feature_cols(self) -> list[int]:
        """Indices of all non-label columns."""
        return [j for j in range(self.n_cols) if j != self.label_col]

    def is_numeric(self) -> bool:
        return all(k == NUMERIC for k in self.feature_kinds)

    def cell(self, row: int, col: int):
        v = self.columns[col][row]
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return None
        return v

    def missing(self) -> np.ndarray:
        """Boolean N x d array, True where the cell is MISSING."""
        out = np.zeros(self.shape, dtype=bool)
        for j, (kind, col) in enumerate(zip(self.feature_kinds, self.columns)):
            if kind == NUMERIC:
                out[:, j] = np.isnan(col)
            else:
                out[:, j] = np.fromiter((v is None for v in col), dtype=bool, count=len(col))
        return out

    def to_matrix(self) -> np.ndarray:
        """N x d float copy of an all-numeric table (NaN = missing)."""
        if not self.is_numeric():
            raise DataError("table has categorical columns; encode them first")
        if self.n_rows == 0:
            return np.empty((0, self.n_cols))
        return np.column_stack(self.columns).astype(np.float64, copy=True)

    def with_matrix(self, values: np.ndarray) -> "Table":
        """Same schema, all columns numeric, values taken from ``values``."""
        values = np.asarray(values, dtype=np.float64)
        if values.shape != self.shape:
            raise DataError(f"shape mismatch: {values.shape} vs {self.shape}")
        return Table(
            self.feature_names,
            (NUMERIC,) * self.n_cols,
            tuple(values[:, j].copy() for j in range(self.n_cols)),
            self.label_col,
        )

    def labels(self) -> np.ndarray:
        """Class labels as an int array."""
        if self.label_col is None:
            raise DataError("table has no label column")
        col = self.columns[self.label_col]
        if self.feature_kinds[self.label_col] == NUMERIC:
            if np.isnan(col).any():
                raise DataError("missing class label")
            return col.astype(np.int64)
        if any(v is None for v in col):
            raise DataError("missing class label")
        try:
            return np.array([int(float(v)) for v in col], dtype=np.int64)
        except ValueError:
            cats = sorted(set(col))
            lookup = {c: i for i, c in enumerate(cats)}
            return np.array([lookup[v] for v in col], dtype=np.int64)

    def select_rows(self, rows: Sequence[int] | np.ndarray) -> "Table":
        rows = np.asarray(rows, dtype=np.intp)
        return Table(self.feature_names, self.feature_kinds,
                     tuple(c[rows] for c in self.columns), self.label_col)


@dataclass(frozen=True)
class MaskMatrix:
    """0/1 indicator per cell: 0 where the source cell is missing."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.uint8)
        object.__setattr__(self, "entries", _freeze(entries.copy()))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def observed(self) -> np.ndarray:
        """Boolean view, True where the cell is present."""
        return self.entries.astype(bool)

    def n_missing(self, cols: Iterable[int] | None = None) -> int:
        e = self.entries if cols is None else self.entries[:, list(cols)]
        return int(e.size - np.count_nonzero(e))

    def missing_per_column(self) -> np.ndarray:
        return self.entries.shape[0] - self.entries.sum(axis=0, dtype=np.int64)


@dataclass(frozen=True)
class CategoryMap:
    """Per categorical column: ordered tokens; the i-th of C tokens codes to i/C."""

    tokens: dict[int, tuple[str, ...]] = field(default_factory=dict)

    def codes(self, col: int) -> dict[str, float]:
        toks = self.tokens[col]
        C = len(toks)
        return {t: (i + 1) / C for i, t in enumerate(toks)}


@dataclass(frozen=True)
class StandardizationParams:
    columns: tuple[int, ...]
    mean: np.ndarray
    std: np.ndarray


# -- ingestion ----------------------------------------------------------------

def _is_missing(token: str, missing: frozenset[str]) -> bool:
    return token.strip().lower() in missing


def _parse_real(token: str) -> float | None:
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _normalize_tokens(tokens: Iterable[str] | None) -> frozenset[str]:
    if tokens is None:
        return DEFAULT_MISSING_TOKENS
    return frozenset(t.strip().lower() for t in tokens)


def _guess_label(names: Sequence[str]) -> int | None:
    for j, name in enumerate(names):
        if name.strip().lower() in LABEL_NAMES:
            return j
    return None


def _build_columns(names, raw_cols, missing, declared=None):
    kinds, cols = [], []
    for j, raw in enumerate(raw_cols):
        decl = declared[j] if declared is not None else None
        present = [t.strip() for t in raw if not _is_missing(t, missing)]
        parsed = [_parse_real(t) for t in present]
        if decl == NUMERIC or (decl is None and all(p is not None for p in parsed)):
            if decl == NUMERIC and any(p is None for p in parsed):
                bad = next(t for t, p in zip(present, parsed) if p is None)
                raise DataError(f"non-numeric value {bad!r} in numeric attribute {names[j]!r}")
            kinds.append(NUMERIC)
            cols.append(np.array([np.nan if _is_missing(t, missing) else float(t)
                                  for t in raw], dtype=np.float64))
        else:
            kinds.append(CATEGORICAL)
            cols.append(np.array([None if _is_missing(t, missing) else t.strip()
                                  for t in raw], dtype=object))
    return kinds, cols


def _read_csv(text: str, missing: frozenset[str]):
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError("empty table: no header row")
    header = [h.strip() for h in rows[0]]
    if any(h == "" for h in header):
        raise DataError("malformed header: empty column name")
    if len(set(header)) != len(header):
        raise DataError("malformed header: duplicate column names")
    body = rows[1:]
    if not body:
        raise DataError("empty table: no data rows")
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"ragged row at line {i}: {len(r)} fields, expected {len(header)}")
    raw_cols = [[r[j] for r in body] for j in range(len(header))]
    kinds, cols = _build_columns(header, raw_cols, missing)
    return header, kinds, cols, None


def _split_arff_line(line: str) -> list[str]:
    return next(csv.reader([line], quotechar="'", skipinitialspace=True))


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "'\"":
        return s[1:-1]
    return s


def _read_arff(text: str, missing: frozenset[str]):
    names: list[str] = []
    declared: list[str] = []
    nominal: dict[int, list[str]] = {}
    data_lines: list[str] = []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if in_data:
            if line.startswith("{"):
                raise DataError("sparse ARFF is not supported")
            data_lines.append(line)
            continue
        low = line.lower()
        if low.startswith("@relation"):
            continue
        if low.startswith("@attribute"):
            rest = line[len("@attribute"):].strip()
            if not rest:
                raise DataError(f"malformed @attribute at line {lineno}")
            if rest[0] in "'\"":
                end = rest.find(rest[0], 1)
                if end < 0:
                    raise DataError(f"malformed @attribute at line {lineno}")
                name, typ = rest[1:end], rest[end + 1:].strip()
            else:
                parts = rest.split(None, 1)
                if len(parts) != 2:
                    raise DataError(f"malformed @attribute at line {lineno}")
                name, typ = parts
            if typ.startswith("{"):
                if not typ.endswith("}"):
                    raise DataError(f"malformed nominal spec at line {lineno}")
                nominal[len(names)] = [_unquote(v) for v in typ[1:-1].split(",")]
                declared.append(CATEGORICAL)
            elif typ.lower() in ("numeric", "real", "integer"):
                declared.append(NUMERIC)
            else:
                raise DataError(f"unknown ARFF attribute type {typ!r} at line {lineno}")
            names.append(name)
            continue
        if low.startswith("@data"):
            in_data = True
            continue
        raise DataError(f"malformed ARFF header at line {lineno}: {line[:40]!r}")
    if not names:
        raise DataError("malformed header: no @attribute declarations")
    if not in_data:
        raise DataError("malformed header: missing @data section")
    if not data_lines:
        raise DataError("empty table: no data rows")
    if len(set(names)) != len(names):
        raise DataError("malformed header: duplicate attribute names")
    rows = []
    for i, line in enumerate(data_lines):
        fields = [_unquote(f) for f in _split_arff_line(line)]
        if len(fields) != len(names):
            raise DataError(f"ragged data row {i + 1}: {len(fields)} fields, expected {len(names)}")
        rows.append(fields)
    raw_cols = [[r[j] for r in rows] for j in range(len(names))]
    kinds, cols = _build_columns(names, raw_cols, missing, declared)
    for j, allowed in nominal.items():
        allowed_set = set(allowed)
        for v in cols[j]:
            if v is not None and v not in allowed_set:
                raise DataError(f"value {v!r} not declared for nominal attribute {names[j]!r}")
    return names, kinds, cols, nominal


def load_table(source: IO[bytes] | bytes | str, fmt: str = "csv",
               missing_tokens: Iterable[str] | None = None,
               label: str | int | None = "auto") -> Table:
    """Parse a CSV or ARFF byte stream into a :class:`Table`.

    ``label="auto"`` designates a column named class/label/target as the
    label if one exists; pass a name or index to choose explicitly, or
    None for no label column.
    """
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif isinstance(source, str):
        data = source.encode("utf-8")
    else:
        data = source.read()
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DataError(f"input is not UTF-8: {exc}") from None
    missing = _normalize_tokens(missing_tokens)
    fmt = fmt.lower()
    if fmt == "csv":
        names, kinds, cols, _ = _read_csv(text, missing)
    elif fmt == "arff":
        names, kinds, cols, _ = _read_arff(text, missing)
    else:
        raise DataError(f"unsupported format {fmt!r}")

    if label == "auto":
        label_col = _guess_label(names)
    elif label is None:
        label_col = None
    elif isinstance(label, int):
        label_col = label
    else:
        if label not in names:
            raise DataError(f"label column {label!r} not found")
        label_col = list(names).index(label)
    return Table(tuple(names), tuple(kinds), tuple(cols), label_col)


def load_path(path, fmt: str | None = None, missing_tokens=None, label="auto") -> Table:
    """Load a table from a file path; format inferred from the extension."""
    path = str(path)
    if fmt is None:
        fmt = "arff" if path.lower().endswith(".arff") else "csv"
    with open(path, "rb") as fh:
        return load_table(fh, fmt, missing_tokens, label)


def write_csv(t: Table, stream: IO[str]) -> None:
    """Write a table as CSV; missing cells are written as empty fields."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(t.feature_names)
    for i in range(t.n_rows):
        row = []
        for j in range(t.n_cols):
            v = t.cell(i, j)
            if v is None:
                row.append("")
            elif isinstance(v, (float, np.floating)):
                row.append(repr(float(v)))
            else:
                row.append(str(v))
        w.writerow(row)


# -- transforms -----------------------------------------------------------------

def build_mask(t: Table) -> MaskMatrix:
    return MaskMatrix((~t.missing()).astype(np.uint8))


def encode_categoricals(t: Table) -> tuple[Table, CategoryMap]:
    """Replace every categorical feature column by codes 1/C, 2/C, ..., 1.

    Categories are ordered lexicographically by their UTF-8 bytes. A
    categorical label column is converted to its numeric class values
    instead and is not part of the returned map.
    """
    tokens: dict[int, tuple[str, ...]] = {}
    kinds, cols = [], []
    for j, (kind, col) in enumerate(zip(t.feature_kinds, t.columns)):
        if kind == NUMERIC:
            kinds.append(kind)
            cols.append(col)
            continue
        if j == t.label_col:
            cols.append(t.labels().astype(np.float64))
            kinds.append(NUMERIC)
            continue
        cats = tuple(sorted({v for v in col if v is not None}, key=lambda s: s.encode("utf-8")))
        tokens[j] = cats
        C = len(cats)
        code = {c: (i + 1) / C for i, c in enumerate(cats)}
        cols.append(np.array([np.nan if v is None else code[v] for v in col], dtype=np.float64))
        kinds.append(NUMERIC)
    return Table(t.feature_names, tuple(kinds), tuple(cols), t.label_col), CategoryMap(tokens)


def _column_stats(col: np.ndarray) -> tuple[float, float]:
    present = col[~np.isnan(col)]
    if present.size == 0:
        return 0.0, 0.0
    mean = float(present.mean())
    std = float(np.sqrt(np.mean((present - mean) ** 2)))
    return mean, std


def standardize(t: Table) -> tuple[Table, StandardizationParams]:
    """Zero mean, unit (population) variance per feature column; label untouched."""
    X = t.to_matrix()
    cols = tuple(t.feature_cols)
    means = np.zeros(len(cols))
    stds = np.zeros(len(cols))
    for k, j in enumerate(cols):
        m, s = _column_stats(X[:, j])
        means[k], stds[k] = m, s
        if s > 0:
            X[:, j] = (X[:, j] - m) / s
        else:
            X[:, j] = np.where(np.isnan(X[:, j]), np.nan, 0.0)
    return t.with_matrix(X), StandardizationParams(cols, _freeze(means), _freeze(stds))


def inverse_standardize(t: Table, p: StandardizationParams) -> Table:
    X = t.to_matrix()
    if len(p.columns) != len(p.mean) or (p.columns and max(p.columns) >= X.shape[1]):
        raise DataError("shape mismatch between table and standardization params")
    if tuple(t.feature_cols) != p.columns:
        raise DataError("shape mismatch between table and standardization params")
    for k, j in enumerate(p.columns):
        if p.std[k] > 0:
            X[:, j] = X[:, j] * p.std[k] + p.mean[k]
        else:
            X[:, j] = np.where(np.isnan(X[:, j]), np.nan, p.mean[k])
    return t.with_matrix(X)


def from_matrix(X: np.ndarray, names: Sequence[str] | None = None,
                label_col: int | None = None) -> Table:
    """Build an all-numeric table from a float matrix (NaN = missing)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("expected a 2-D matrix")
    if names is None:
        names = [f"f{j}" for j in range(X.shape[1])]
    return Table(tuple(names), (NUMERIC,) * X.shape[1],
                 tuple(X[:, j].copy() for j in range(X.shape[1])), label_col)
