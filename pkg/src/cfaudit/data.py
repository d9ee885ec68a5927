"""Tabular data model for audits.

A :class:`Dataset` is the package's common currency: protected
characteristics coded as small integers, a binary treatment indicator, a
binary outcome, real covariates, and a binarized screening decision.
Ingestion from delimited text, score binarization, and enumeration of
intersectional groups all live here.
"""

import csv
import io
import logging
import os
from dataclasses import dataclass
from itertools import combinations, product
from typing import Optional, Union

import numpy as np

from .errors import DomainError, EmptyInputError, RowParseError, SchemaError

logger = logging.getLogger(__name__)

#: A group is identified by one level code per protected characteristic.
GroupKey = tuple

TextSource = Union[str, os.PathLike, io.TextIOBase]


@dataclass(frozen=True)
class ColumnSpec:
    """Names the roles that columns of an input table play."""

    protected_columns: tuple
    treatment_column: str = "d"
    outcome_column: str = "y"
    covariate_columns: tuple = ()
    score_column: str = "s"
    score_threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "protected_columns", tuple(self.protected_columns))
        object.__setattr__(self, "covariate_columns", tuple(self.covariate_columns))
        if len(self.protected_columns) == 0:
            raise SchemaError("at least one protected column is required")
        named = (list(self.protected_columns)
                 + [self.treatment_column, self.outcome_column]
                 + list(self.covariate_columns) + [self.score_column])
        if len(set(named)) != len(named):
            raise SchemaError("column roles must name distinct columns: %r" % (named,))
        if not 0.0 < float(self.score_threshold) < 1.0:
            raise DomainError("score_threshold must lie strictly inside (0, 1)")


def binarize_score(value: float, threshold: float) -> int:
    """Binarize a screening score; values at the threshold map to 1."""
    if not 0.0 <= value <= 1.0:
        raise DomainError("score %r outside [0, 1]" % (value,))
    if not 0.0 < threshold < 1.0:
        raise DomainError("threshold %r outside (0, 1)" % (threshold,))
    return 1 if value >= threshold else 0


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable audit table.

    Attributes
    ----------
    a : (n, m) int array of protected-level codes, one column per
        characteristic; codes run 0..L_j-1 in order of first appearance
        at ingestion.
    d : (n,) 0/1 treatment indicators.
    y : (n,) 0/1 observed outcomes.
    x : (n, p) real covariates (p may be 0).
    s : (n,) 0/1 binarized screening decisions.
    level_maps : one dict per characteristic mapping raw level label to
        its integer code.
    spec : the :class:`ColumnSpec` the table was built against.
    """

    a: np.ndarray
    d: np.ndarray
    y: np.ndarray
    x: np.ndarray
    s: np.ndarray
    level_maps: tuple
    spec: ColumnSpec

    def __post_init__(self):
        a = _readonly(np.asarray(self.a, dtype=np.int64))
        d = _readonly(np.asarray(self.d, dtype=np.int8))
        y = _readonly(np.asarray(self.y, dtype=np.int8))
        x = _readonly(np.asarray(self.x, dtype=np.float64))
        s = _readonly(np.asarray(self.s, dtype=np.int8))
        if a.ndim != 2:
            raise DomainError("protected codes must form a 2-d array")
        n = a.shape[0]
        if n == 0:
            raise EmptyInputError("dataset has no records")
        if x.ndim != 2:
            x = x.reshape(n, -1)
            x = _readonly(x)
        for name, arr in (("d", d), ("y", y), ("s", s)):
            if arr.shape != (n,):
                raise DomainError("column %s has wrong length" % name)
            vals = np.unique(arr)
            if not np.all(np.isin(vals, (0, 1))):
                raise DomainError("column %s must be binary 0/1" % name)
        if x.shape[0] != n:
            raise DomainError("covariate block has wrong length")
        if not np.all(np.isfinite(x)):
            raise DomainError("covariates contain non-finite values")
        maps = tuple(dict(mp) for mp in self.level_maps)
        if a.shape[1] != len(maps):
            raise DomainError("one level map per protected characteristic required")
        for j, mp in enumerate(maps):
            codes = sorted(mp.values())
            if codes != list(range(len(codes))):
                raise DomainError("level codes for characteristic %d must be 0..L-1" % j)
            col = a[:, j]
            if col.size and (col.min() < 0 or col.max() >= len(codes)):
                raise DomainError("protected codes out of range for characteristic %d" % j)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "level_maps", maps)

    # -- basic shape -----------------------------------------------------
    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def n_characteristics(self) -> int:
        return self.a.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]

    def level_labels(self, j: int) -> list:
        """Raw labels of characteristic ``j`` ordered by code."""
        inv = {code: lab for lab, code in self.level_maps[j].items()}
        return [inv[c] for c in range(len(inv))]

    def group_labels(self, key: GroupKey) -> tuple:
        return tuple(self.level_labels(j)[c] for j, c in enumerate(key))

    # -- derived tables ---------------------------------------------------
    def with_protected(self, a_new: np.ndarray) -> "Dataset":
        """Same records with the protected block replaced (for permutation)."""
        a_new = np.asarray(a_new, dtype=np.int64)
        if a_new.shape != self.a.shape:
            raise DomainError("replacement protected block has wrong shape")
        return Dataset(a_new, self.d, self.y, self.x, self.s,
                       self.level_maps, self.spec)

    def subset(self, idx: np.ndarray) -> "Dataset":
        """Row subset / resample. Level maps are retained unchanged."""
        idx = np.asarray(idx)
        return Dataset(self.a[idx], self.d[idx], self.y[idx], self.x[idx],
                       self.s[idx], self.level_maps, self.spec)


@dataclass(frozen=True)
class GroupIndex:
    """Full cross-product of protected levels observed at ingestion."""

    groups: tuple            # ordered GroupKeys (lexicographic in codes)
    counts: tuple            # record count per group (zeros included)
    pairs: tuple             # unordered group pairs, canonical order
    n_levels: tuple          # levels per characteristic

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def position(self, key: GroupKey) -> int:
        return self.groups.index(tuple(key))


def group_codes(ds: Dataset) -> np.ndarray:
    """Flat group ordinal per record, aligned with enumerate_groups order."""
    n_levels = tuple(len(m) for m in ds.level_maps)
    return np.ravel_multi_index(tuple(ds.a[:, j] for j in range(ds.n_characteristics)),
                                n_levels)


def enumerate_groups(ds: Dataset) -> GroupIndex:
    """Enumerate intersectional groups, empty intersections included."""
    n_levels = tuple(len(m) for m in ds.level_maps)
    groups = tuple(product(*(range(L) for L in n_levels)))
    flat = group_codes(ds)
    counts = np.bincount(flat, minlength=len(groups))
    pairs = tuple(combinations(groups, 2))
    return GroupIndex(groups=groups, counts=tuple(int(c) for c in counts),
                      pairs=pairs, n_levels=n_levels)


# -- ingestion -------------------------------------------------------------

def _open_source(source: TextSource):
    if isinstance(source, io.TextIOBase):
        return source, False
    return open(os.fspath(source), "r", newline=""), True


def load_dataset(source: TextSource, spec: ColumnSpec) -> Dataset:
    """Read a delimited text table into a :class:`Dataset`.

    The first row is a header. Rows with missing (empty) values in any
    declared column are rejected and counted; any other malformed token
    raises with its row number. Scores are binarized against
    ``spec.score_threshold`` during ingestion.
    """
    stream, close = _open_source(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError("input has no header row")
        header = [h.strip() for h in header]
        pos = {}
        for role, cols in (("protected_column", spec.protected_columns),
                           ("treatment_column", (spec.treatment_column,)),
                           ("outcome_column", (spec.outcome_column,)),
                           ("covariate_column", spec.covariate_columns),
                           ("score_column", (spec.score_column,))):
            for c in cols:
                if c not in header:
                    raise SchemaError("%s '%s' not found in header" % (role, c))
                pos[c] = header.index(c)
        needed = ([pos[c] for c in spec.protected_columns]
                  + [pos[spec.treatment_column], pos[spec.outcome_column]]
                  + [pos[c] for c in spec.covariate_columns]
                  + [pos[spec.score_column]])

        a_rows, d_rows, y_rows, x_rows, s_rows = [], [], [], [], []
        level_maps = [dict() for _ in spec.protected_columns]
        rejected = 0
        for rownum, row in enumerate(reader, start=2):
            cells = [row[i].strip() if i < len(row) else "" for i in needed]
            if any(c == "" for c in cells):
                rejected += 1
                continue
            k = len(spec.protected_columns)
            prot, rest = cells[:k], cells[k:]
            d_tok, y_tok = rest[0], rest[1]
            xs = rest[2:-1]
            s_tok = rest[-1]
            if d_tok not in ("0", "1"):
                raise RowParseError("row %d: treatment token %r is not 0/1"
                                    % (rownum, d_tok))
            if y_tok not in ("0", "1"):
                raise RowParseError("row %d: outcome token %r is not 0/1"
                                    % (rownum, y_tok))
            try:
                xvals = [float(t) for t in xs]
            except ValueError:
                raise RowParseError("row %d: non-numeric covariate" % rownum)
            try:
                score = float(s_tok)
            except ValueError:
                raise RowParseError("row %d: non-numeric score %r" % (rownum, s_tok))
            try:
                s_bin = binarize_score(score, spec.score_threshold)
            except DomainError as exc:
                raise DomainError("row %d: %s" % (rownum, exc))
            codes = []
            for j, lab in enumerate(prot):
                mp = level_maps[j]
                if lab not in mp:
                    mp[lab] = len(mp)
                codes.append(mp[lab])
            a_rows.append(codes)
            d_rows.append(int(d_tok))
            y_rows.append(int(y_tok))
            x_rows.append(xvals)
            s_rows.append(s_bin)
        if rejected:
            logger.warning("rejected %d rows with missing values", rejected)
        if not a_rows:
            raise EmptyInputError("no usable data rows after ingestion")
        n = len(a_rows)
        x = np.asarray(x_rows, dtype=np.float64)
        if x.size == 0:
            x = np.empty((n, 0), dtype=np.float64)
        return Dataset(a=np.asarray(a_rows, dtype=np.int64),
                       d=np.asarray(d_rows, dtype=np.int8),
                       y=np.asarray(y_rows, dtype=np.int8),
                       x=x,
                       s=np.asarray(s_rows, dtype=np.int8),
                       level_maps=tuple(level_maps), spec=spec)
    finally:
        if close:
            stream.close()


def write_dataset(ds: Dataset, dest: TextSource) -> None:
    """Write a dataset back out in canonical column order.

    Column order is protected, treatment, outcome, covariates, score;
    floats use shortest round-trip formatting so a load/write/load cycle
    is an identity.
    """
    stream, close = (dest, False) if isinstance(dest, io.TextIOBase) \
        else (open(os.fspath(dest), "w", newline=""), True)
    try:
        w = csv.writer(stream, lineterminator="\n")
        sp = ds.spec
        w.writerow(list(sp.protected_columns)
                   + [sp.treatment_column, sp.outcome_column]
                   + list(sp.covariate_columns) + [sp.score_column])
        labels = [ds.level_labels(j) for j in range(ds.n_characteristics)]
        for i in range(ds.n):
            row = [labels[j][ds.a[i, j]] for j in range(ds.n_characteristics)]
            row += [str(int(ds.d[i])), str(int(ds.y[i]))]
            row += [repr(float(v)) for v in ds.x[i]]
            row += [str(int(ds.s[i]))]
            w.writerow(row)
    finally:
        if close:
            stream.close()


def default_spec(n_characteristics: int, n_covariates: int,
                 score_threshold: float = 0.5) -> ColumnSpec:
    """Column names used for generated tables: a1..am, d, y, x1..xp, s."""
    return ColumnSpec(
        protected_columns=tuple("a%d" % (j + 1) for j in range(n_characteristics)),
        treatment_column="d", outcome_column="y",
        covariate_columns=tuple("x%d" % (j + 1) for j in range(n_covariates)),
        score_column="s", score_threshold=score_threshold)


def dataset_from_arrays(a, d, y, x, s, spec: Optional[ColumnSpec] = None,
                        level_labels=None) -> Dataset:
    """Bundle already-coded arrays into a :class:`Dataset`.

    ``level_labels`` optionally gives the raw label list per
    characteristic; by default codes are their own labels ("0", "1", ...).
    """
    a = np.asarray(a, dtype=np.int64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    m = a.shape[1]
    if level_labels is None:
        maps = tuple({str(c): c for c in range(int(a[:, j].max()) + 1 if a.size else 1)}
                     for j in range(m))
    else:
        maps = tuple({lab: i for i, lab in enumerate(labs)} for labs in level_labels)
    if spec is None:
        spec = default_spec(m, x.shape[1])
    return Dataset(a=a, d=d, y=y, x=x, s=s, level_maps=maps, spec=spec)
