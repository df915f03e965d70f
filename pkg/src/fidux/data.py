"""Right-censored survival data: validation, CSV ingestion, risk-set indexing."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .errors import DataError, NoFailuresError
from .risk_softmax import RiskPrefix


@dataclass(frozen=True)
class SubjectRecord:
    """Covariate vector, observed time, and failure indicator for one subject."""

    x: np.ndarray
    y: float
    delta: int

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "delta", int(self.delta))
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise DataError("covariates must be a finite vector")
        if not np.isfinite(self.y) or self.y <= 0:
            raise DataError("observed time must be positive")
        if self.delta not in (0, 1):
            raise DataError("failure indicator must be 0 or 1")


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """A validated right-censored sample, stored columnwise.

    Attributes
    ----------
    x : (n, p) covariate matrix
    y : (n,) positive observed times
    delta : (n,) failure indicators in {0, 1}
    """

    x: np.ndarray
    y: np.ndarray
    delta: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float)
        delta = np.asarray(self.delta)
        if x.shape[0] != y.shape[0] and x.shape == (1, y.shape[0]):
            x = x.T  # single covariate passed as a flat vector
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", delta.astype(np.int64))
        if y.ndim != 1 or x.ndim != 2 or x.shape[0] != y.shape[0] or delta.shape != y.shape:
            raise DataError("covariates, times, and indicators must have matching length")
        if y.shape[0] < 1:
            raise DataError("no records")
        if not np.all(np.isfinite(x)):
            raise DataError("covariates must be finite")
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            raise DataError("observed times must be positive")
        if not np.all(np.isin(self.delta, (0, 1))):
            raise DataError("failure indicators must be 0 or 1")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        """Number of failures."""
        return int(self.delta.sum())

    @property
    def records(self) -> list[SubjectRecord]:
        return [SubjectRecord(self.x[i], self.y[i], self.delta[i]) for i in range(self.n)]

    @classmethod
    def from_records(cls, records: Sequence[SubjectRecord]) -> "SurvivalDataset":
        if not records:
            raise DataError("no records")
        p = records[0].x.shape[0]
        if any(r.x.shape[0] != p for r in records):
            raise DataError("all records must share one covariate dimension")
        return cls(
            x=np.array([r.x for r in records], dtype=float),
            y=np.array([r.y for r in records], dtype=float),
            delta=np.array([r.delta for r in records], dtype=np.int64),
        )


@dataclass(frozen=True)
class ColumnSchema:
    """Column mapping for delimited input.

    ``covariates=None`` selects every column other than time and status,
    in file order (the conventional layout is ``time,status,x1..xp``).
    """

    time: str = "time"
    status: str = "status"
    covariates: tuple[str, ...] | None = None
    delimiter: str = ","


def load_dataset(source: str | Path | bytes | IO[str], schema: ColumnSchema | None = None) -> SurvivalDataset:
    """Parse a delimited byte/text stream into a validated dataset.

    Parameters
    ----------
    source : path, bytes, or text file object with a header row
    schema : column mapping; defaults to ``time``, ``status``, remaining
        columns as covariates, comma delimiter

    Raises
    ------
    DataError
        Empty input, missing columns, malformed rows (reported with the
        1-based data row number), non-positive times, or status values
        outside {0, 1}.
    """
    schema = schema or ColumnSchema()
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return _parse_rows(csv.reader(fh, delimiter=schema.delimiter), schema)
    if isinstance(source, bytes):
        return _parse_rows(csv.reader(io.StringIO(source.decode("utf-8")), delimiter=schema.delimiter), schema)
    return _parse_rows(csv.reader(source, delimiter=schema.delimiter), schema)


def _parse_rows(reader, schema: ColumnSchema) -> SurvivalDataset:
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("no records") from None
    header = [h.strip() for h in header]
    for name in (schema.time, schema.status):
        if name not in header:
            raise DataError(f"missing column: {name!r}")
    time_col = header.index(schema.time)
    status_col = header.index(schema.status)
    if schema.covariates is None:
        cov_cols = [j for j, h in enumerate(header) if j not in (time_col, status_col)]
        cov_names = [header[j] for j in cov_cols]
    else:
        for name in schema.covariates:
            if name not in header:
                raise DataError(f"missing column: {name!r}")
        cov_cols = [header.index(name) for name in schema.covariates]
        cov_names = list(schema.covariates)
    if not cov_cols:
        raise DataError("no covariate columns")

    ys, deltas, xs = [], [], []
    row_no = 0
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        row_no += 1
        if len(row) != len(header):
            raise DataError(f"row {row_no}: expected {len(header)} columns, got {len(row)}")
        try:
            y = float(row[time_col])
        except ValueError:
            raise DataError(f"row {row_no}: non-numeric time {row[time_col]!r}") from None
        if not np.isfinite(y) or y <= 0:
            raise DataError(f"non-positive time at row {row_no}")
        status_raw = row[status_col].strip()
        if status_raw not in ("0", "1"):
            raise DataError(f"row {row_no}: status must be 0 or 1, got {status_raw!r}")
        try:
            x = [float(row[j]) for j in cov_cols]
        except ValueError:
            raise DataError(f"row {row_no}: non-numeric covariate value") from None
        if not all(np.isfinite(v) for v in x):
            raise DataError(f"row {row_no}: non-finite covariate value")
        ys.append(y)
        deltas.append(int(status_raw))
        xs.append(x)
    if row_no == 0:
        raise DataError("no records")
    ds = SurvivalDataset(x=np.array(xs), y=np.array(ys), delta=np.array(deltas))
    object.__setattr__(ds, "covariate_names", tuple(cov_names))
    return ds


@dataclass(frozen=True, eq=False)
class RiskStructure:
    """Ordered failure times with tie groups and at-risk index sets.

    Indices are 0-based positions into the owning dataset.  Tied failures
    form one group and share the risk set of their common failure time;
    censored subjects whose time equals a failure time stay in that risk
    set (the ``>=`` in its definition).
    """

    data: SurvivalDataset
    failure_times: np.ndarray                 # (K,) strictly increasing
    tie_groups: tuple[np.ndarray, ...]        # subjects failing at t_k
    failing_order: np.ndarray                 # (m,) flattened tie groups
    risk_sets: tuple[np.ndarray, ...]         # {j : Y_j >= t_k}
    group_of_failure: np.ndarray              # (m,) failure -> group index

    @property
    def m(self) -> int:
        return self.failing_order.shape[0]

    @property
    def n_groups(self) -> int:
        return self.failure_times.shape[0]

    @cached_property
    def prefix(self) -> RiskPrefix:
        return RiskPrefix(self)


def build_risk_structure(data: SurvivalDataset) -> RiskStructure:
    """Index the distinct failure times, tie groups, and at-risk sets."""
    if data.m == 0:
        raise NoFailuresError("no failures: fiducial inversion undefined")
    fail_idx = np.flatnonzero(data.delta == 1)
    times = data.y[fail_idx]
    failure_times = np.unique(times)
    tie_groups = tuple(fail_idx[times == t] for t in failure_times)
    failing_order = np.concatenate(tie_groups)
    risk_sets = tuple(np.flatnonzero(data.y >= t) for t in failure_times)
    group_of_failure = np.concatenate(
        [np.full(len(g), k, dtype=np.intp) for k, g in enumerate(tie_groups)]
    )
    return RiskStructure(
        data=data,
        failure_times=failure_times,
        tie_groups=tie_groups,
        failing_order=failing_order,
        risk_sets=risk_sets,
        group_of_failure=group_of_failure,
    )
