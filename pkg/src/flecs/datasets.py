"""LIBSVM-format ingestion, worker partitioning, and synthetic problems."""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from typing import BinaryIO, Optional, Union

import numpy as np

__all__ = [
    "SparseRow",
    "SparseDataset",
    "Partition",
    "ParseError",
    "parse_libsvm",
    "load_libsvm",
    "to_libsvm",
    "partition_rows",
    "QuadraticProblem",
    "synthetic_quadratic",
    "synthetic_classification",
]

_GZIP_MAGIC = b"\x1f\x8b"


class ParseError(ValueError):
    """Malformed LIBSVM input."""


@dataclass(frozen=True)
class SparseRow:
    label: int
    features: dict[int, float]


@dataclass
class SparseDataset:
    """Rows of (label, sparse features) with a fixed feature dimension.

    Labels are always -1 or +1; feature indices are 0-based and < num_features.
    Read-only after construction.
    """

    rows: list[SparseRow]
    num_features: int

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=float)

    def dense_matrix(self) -> np.ndarray:
        a = np.zeros((self.num_rows, self.num_features))
        for i, row in enumerate(self.rows):
            for j, v in row.features.items():
                a[i, j] = v
        return a

    def subset(self, indices) -> "SparseDataset":
        return SparseDataset(
            rows=[self.rows[i] for i in indices], num_features=self.num_features
        )


@dataclass(frozen=True)
class Partition:
    """Disjoint row-index lists, one per worker, covering all rows."""

    assignments: list[list[int]]

    @property
    def num_workers(self) -> int:
        return len(self.assignments)


def _map_label(raw: float) -> int:
    # 0/1-coded labels map 0 -> -1, 1 -> +1; anything else maps by sign.
    if raw > 0:
        return 1
    return -1


def parse_libsvm(
    source: Union[bytes, str, BinaryIO], d_hint: Optional[int] = None
) -> SparseDataset:
    """Parse LIBSVM text (``label idx:val ...``, 1-based ascending indices).

    Accepts raw bytes, a string, or a binary stream; gzip input is detected by
    magic bytes. File indices are shifted to 0-based. The dimension is the max
    observed index, or ``d_hint`` if larger.
    """
    if isinstance(source, str):
        data = source.encode()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    if data[:2] == _GZIP_MAGIC:
        data = gzip.decompress(data)

    rows: list[SparseRow] = []
    max_index = 0
    for line_no, line in enumerate(data.decode().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            raw_label = float(tokens[0])
        except ValueError:
            raise ParseError(f"line {line_no}: bad label token {tokens[0]!r}")
        features: dict[int, float] = {}
        prev_idx = 0
        for tok in tokens[1:]:
            idx_s, _, val_s = tok.partition(":")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"line {line_no}: bad feature token {tok!r}")
            if idx < 1:
                raise ParseError(f"line {line_no}: index {idx} is not 1-based")
            if idx <= prev_idx:
                raise ParseError(
                    f"line {line_no}: indices must be ascending without duplicates"
                )
            prev_idx = idx
            features[idx - 1] = val
            max_index = max(max_index, idx)
        rows.append(SparseRow(label=_map_label(raw_label), features=features))

    if not rows:
        raise ParseError("empty dataset")
    d = max(max_index, d_hint or 0)
    if d == 0:
        raise ParseError("no features present and no dimension hint given")
    return SparseDataset(rows=rows, num_features=d)


def load_libsvm(path, d_hint: Optional[int] = None) -> SparseDataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh, d_hint=d_hint)


def to_libsvm(ds: SparseDataset) -> str:
    """Serialize back to LIBSVM text (re-parsing yields identical rows)."""
    lines = []
    for row in ds.rows:
        parts = [f"{row.label:+d}"]
        for idx in sorted(row.features):
            parts.append(f"{idx + 1}:{row.features[idx]!r}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def partition_rows(ds: SparseDataset, n: int, mode: str = "contiguous",
                   seed: int = 0) -> Partition:
    """Split row indices across n workers.

    ``contiguous``: consecutive equal blocks (remainder spread to the earliest
    workers). ``sorted_by_label``: rows sorted by label, then contiguous (the
    maximally heterogeneous split). ``shuffled``: seeded permutation, then
    contiguous.
    """
    if n < 1:
        raise ValueError(f"need at least 1 worker, got {n}")
    if n > ds.num_rows:
        raise ValueError(f"cannot split {ds.num_rows} rows across {n} workers")

    order = list(range(ds.num_rows))
    if mode == "contiguous":
        pass
    elif mode == "sorted_by_label":
        order.sort(key=lambda i: ds.rows[i].label)
    elif mode == "shuffled":
        rng = np.random.default_rng(np.random.SeedSequence([seed]))
        order = list(rng.permutation(ds.num_rows))
    else:
        raise ValueError(f"unknown partition mode {mode!r}")

    base, extra = divmod(ds.num_rows, n)
    assignments: list[list[int]] = []
    start = 0
    for i in range(n):
        size = base + (1 if i < extra else 0)
        assignments.append([int(j) for j in order[start : start + size]])
        start += size
    return Partition(assignments=assignments)


@dataclass
class QuadraticProblem:
    """n local quadratics 0.5 w^T H_i w - b_i^T w with a controlled average.

    The averaged curvature matrix has spectrum inside [mu, L] with both ends
    attained, and the analytic minimizer of the average is stored.
    """

    h_locals: list[np.ndarray]
    b_locals: list[np.ndarray]
    h_avg: np.ndarray = field(repr=False)
    b_avg: np.ndarray = field(repr=False)
    w_star: np.ndarray = field(repr=False)
    mu: float
    lip: float

    @property
    def d(self) -> int:
        return self.h_locals[0].shape[0]

    @property
    def n(self) -> int:
        return len(self.h_locals)


def synthetic_quadratic(
    d: int, mu: float, lip: float, n: int, seed: int = 0
) -> QuadraticProblem:
    """Generate a strongly convex synthetic problem split across n workers.

    All locals share a seeded random orthogonal eigenbasis; heterogeneity
    comes from splitting each average eigenvalue into unequal per-worker
    shares. Every local matrix is PSD and the average spectrum lies in
    [mu, lip] with mu and lip both attained.
    """
    if not (0 < mu <= lip):
        raise ValueError(f"need 0 < mu <= L, got mu={mu}, L={lip}")
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eigs = rng.uniform(mu, lip, size=d)
    eigs[0] = mu
    if d > 1:
        eigs[-1] = lip

    # Split each averaged eigenvalue into n nonnegative shares.
    shares = rng.uniform(0.2, 1.0, size=(n, d))
    shares *= n * eigs / shares.sum(axis=0)

    h_locals = [(basis * shares[i]) @ basis.T for i in range(n)]
    h_locals = [0.5 * (h + h.T) for h in h_locals]
    b_locals = [rng.standard_normal(d) for _ in range(n)]

    h_avg = (basis * eigs) @ basis.T
    h_avg = 0.5 * (h_avg + h_avg.T)
    b_avg = np.mean(b_locals, axis=0)
    w_star = np.linalg.solve(h_avg, b_avg)
    return QuadraticProblem(
        h_locals=h_locals,
        b_locals=b_locals,
        h_avg=h_avg,
        b_avg=b_avg,
        w_star=w_star,
        mu=mu,
        lip=lip,
    )


def synthetic_classification(
    rows: int, d: int, n_active: int = 14, seed: int = 0
) -> SparseDataset:
    """Deterministic binary-feature classification sample.

    Mimics the shape of one-hot census-style data (a few active 0/1 features
    per row) with labels drawn from a planted logistic model, for desk-scale
    experiments when no external dataset file is available.
    """
    if n_active > d:
        raise ValueError(f"n_active {n_active} exceeds dimension {d}")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    planted = rng.standard_normal(d)
    out_rows: list[SparseRow] = []
    for _ in range(rows):
        active = np.sort(rng.choice(d, size=n_active, replace=False))
        score = planted[active].sum()
        p = 1.0 / (1.0 + np.exp(-score))
        label = 1 if rng.random() < p else -1
        out_rows.append(
            SparseRow(label=label, features={int(j): 1.0 for j in active})
        )
    return SparseDataset(rows=out_rows, num_features=d)
