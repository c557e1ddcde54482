"""Permutation benchmark of split policies on real tabular data.

A delimited numeric file is cleaned (designated columns dropped, rows with
NaNs dropped, missing-token cells replaced by the column mean, all columns
centred). The average out-of-sample loss over random row permutations is
then compared for ``p = m/2``, ``p = 3m/4`` and the integrity-optimal ``p``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._parallel import check_seed, chunk_bounds, item_rng, ordered_map
from .errors import DataError, DomainError
from .integrity import SplitProblem, optimal_p

__all__ = [
    "Provenance",
    "Dataset",
    "load_dataset",
    "permutation_losses",
    "permutation_loss",
    "PolicyResult",
    "BenchReport",
    "bench_table",
    "POLICIES",
]

log = logging.getLogger(__name__)

DEFAULT_PERMUTATIONS = 10_000
POLICIES = ("half", "three_quarter", "optimal")

_PERM_CHUNK = 256


@dataclass
class Provenance:
    source: str
    log: list[str] = field(default_factory=list)

    def note(self, msg: str) -> None:
        log.info("%s: %s", self.source, msg)
        self.log.append(msg)


@dataclass
class Dataset:
    features: np.ndarray
    target: np.ndarray
    provenance: Provenance

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]


def _is_nan_token(cell: str) -> bool:
    s = cell.strip()
    if not s:
        return True
    try:
        return math.isnan(float(s))
    except ValueError:
        return False


def load_dataset(
    path: str | Path,
    target_column: int = 0,
    drop_columns: Sequence[int] = (),
    header: bool = False,
    missing_token: str = "?",
    delimiter: str = ",",
) -> Dataset:
    """Read and clean a delimited numeric table.

    Column indices refer to the file as written (0-based, before any column
    is dropped). Cells equal to ``missing_token`` are imputed with the mean of
    the remaining entries of their column, computed after NaN rows have been
    dropped. Empty cells and ``nan`` spellings count as NaN.

    Raises
    ------
    DataError
        A cell is neither numeric, NaN, nor the missing token; the message
        gives its 1-based line and 0-based column.
    DomainError
        Bad column indices, or nothing left after cleaning.
    """
    path = Path(path)
    prov = Provenance(str(path))
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    first_line = 1
    if header and rows:
        rows = rows[1:]
        first_line = 2
    rows = [(i + first_line, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not rows:
        raise DomainError(f"{path}: no data rows")

    width = len(rows[0][1])
    for line, r in rows:
        if len(r) != width:
            raise DataError(f"{path}:{line}: expected {width} columns, found {len(r)}")
    drop = set(int(c) for c in drop_columns)
    for c in drop | {target_column}:
        if not 0 <= c < width:
            raise DomainError(f"column index {c} out of range for {width} columns")
    if target_column in drop:
        raise DomainError(f"target column {target_column} is also listed in drop_columns")
    keep = [c for c in range(width) if c not in drop]
    if drop:
        prov.note(f"dropped columns {sorted(drop)}")

    token = missing_token.strip()
    values = []
    dropped_rows = 0
    for line, r in rows:
        cells = [r[c].strip() for c in keep]
        if any(c != token and _is_nan_token(c) for c in cells):
            dropped_rows += 1
            continue
        row = []
        for c, cell in zip(keep, cells):
            if cell == token:
                row.append(math.nan)
                continue
            try:
                row.append(float(cell))
            except ValueError:
                raise DataError(f"{path}:{line}: column {c}: non-numeric cell {cell!r}") from None
        values.append(row)
    if dropped_rows:
        prov.note(f"dropped {dropped_rows} rows containing NaN")
    if not values:
        raise DomainError(f"{path}: no rows left after dropping NaN rows")

    table = np.array(values, dtype=float)
    missing = np.isnan(table)
    if missing.any():
        for j in np.flatnonzero(missing.any(axis=0)):
            col = table[:, j]
            present = col[~missing[:, j]]
            if present.size == 0:
                raise DomainError(f"{path}: column {keep[j]} has no non-missing values")
            col[missing[:, j]] = present.mean()
            prov.note(f"imputed {int(missing[:, j].sum())} {missing_token!r} cells in column {keep[j]} "
                      f"with the mean after row drops")

    table = table - table.mean(axis=0)
    t = keep.index(target_column)
    target = table[:, t].copy()
    features = np.delete(table, t, axis=1)
    prov.note(f"target column {target_column}; centred {features.shape[1]} features and target")
    return Dataset(features, target, prov)


def _perm_chunk(data: Dataset, p: int, seed: int, lo: int, hi: int) -> tuple[np.ndarray, int]:
    x, y, m = data.features, data.target, data.m
    out = np.empty(hi - lo)
    deficient = 0
    for j, i in enumerate(range(lo, hi)):
        perm = item_rng(seed, i).permutation(m)
        train, test = perm[:p], perm[p:]
        coef, _, rank, _ = np.linalg.lstsq(x[train], y[train], rcond=None)
        if rank < data.n:
            deficient += 1
        r = x[test] @ coef - y[test]
        out[j] = r @ r / (m - p)
    return out, deficient


def permutation_losses(
    data: Dataset, p: int, permutations: int, seed: int, threads: int | None = None
) -> np.ndarray:
    """Test loss for each of ``permutations`` random row orders.

    Permutation ``i`` depends only on ``(seed, i)``. Rank-deficient training
    blocks get the minimum-norm least-squares fit and are counted in the
    dataset's provenance log.
    """
    seed = check_seed(seed)
    if not data.n + 1 <= p <= data.m - 1:
        raise DomainError(f"p={p} outside [n+1, m-1] = [{data.n + 1}, {data.m - 1}]")
    if permutations < 1:
        raise DomainError(f"permutations must be >= 1, got {permutations}")
    blocks = chunk_bounds(permutations, _PERM_CHUNK)
    parts = ordered_map(lambda b: _perm_chunk(data, p, seed, *b), blocks, threads)
    deficient = sum(d for _, d in parts)
    if deficient:
        data.provenance.note(
            f"p={p}: {deficient}/{permutations} rank-deficient training blocks fit by minimum norm"
        )
    return np.concatenate([l for l, _ in parts])


def permutation_loss(
    data: Dataset, p: int, permutations: int = DEFAULT_PERMUTATIONS, seed: int = 0, threads: int | None = None
) -> float:
    """Mean of :func:`permutation_losses`."""
    return math.fsum(permutation_losses(data, p, permutations, seed, threads)) / permutations


@dataclass
class PolicyResult:
    policy: str
    p: int
    mean_loss: float


@dataclass
class BenchReport:
    source: str
    m: int
    n: int
    permutations: int
    seed: int
    policies: list[PolicyResult]
    notes: list[str] = field(default_factory=list)

    def policy(self, name: str) -> PolicyResult:
        return next(r for r in self.policies if r.policy == name)

    @property
    def optimal_ratio(self) -> float:
        return self.policy("optimal").p / self.m

    def records(self) -> list[dict]:
        """One flat record per policy; ``ratio`` is that policy's ``p / m``."""
        return [
            {
                "policy": r.policy,
                "p": r.p,
                "mean_loss": r.mean_loss,
                "ratio": r.p / self.m,
                "m": self.m,
                "n": self.n,
                "permutations": self.permutations,
                "seed": self.seed,
            }
            for r in self.policies
        ]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def policy_sizes(m: int, n: int) -> tuple[dict[str, int], list[str]]:
    """Training sizes of the three policies, plus notes on any adjustment."""
    notes = []
    lo, hi = n + 1, m - 1
    sizes = {"half": _round_half_up(m / 2), "three_quarter": _round_half_up(3 * m / 4)}
    for name, p in list(sizes.items()):
        if not lo <= p <= hi:
            sizes[name] = min(max(p, lo), hi)
            notes.append(f"{name}: p={p} clamped to {sizes[name]} (needs n+1 <= p <= m-1)")
    if m >= n + 5:
        sizes["optimal"] = min(max(optimal_p(SplitProblem(m, n)), lo), hi)
    else:
        sizes["optimal"] = hi
        notes.append(f"optimal: m={m} < n+5, analytic optimum undefined; using p=m-1")
    return sizes, notes


def bench_table(
    data: Dataset, permutations: int = DEFAULT_PERMUTATIONS, seed: int = 0, threads: int | None = None
) -> BenchReport:
    """Average permutation loss for the half, three-quarter and optimal splits."""
    if data.m < data.n + 2:
        raise DomainError(f"need m >= n + 2 for any split, got m={data.m}, n={data.n}")
    sizes, notes = policy_sizes(data.m, data.n)
    for msg in notes:
        data.provenance.note(msg)
    results = [
        PolicyResult(name, sizes[name], permutation_loss(data, sizes[name], permutations, seed, threads))
        for name in POLICIES
    ]
    return BenchReport(data.provenance.source, data.m, data.n, permutations, seed, results, notes)
