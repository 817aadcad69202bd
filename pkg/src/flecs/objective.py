"""Per-worker loss oracles: value, gradient, Hessian sketch, dense Hessian.

Three objective kinds are supported:

* ``logreg_l2``: mean logistic loss plus mu * ||w||^2,
* ``logreg_nonconvex``: mean logistic loss plus mu * sum_t w_t^2/(1+w_t^2)
  (bounded below by 0, for nonconvex-convergence experiments),
* ``quadratic``: 0.5 w^T H w - b^T w.

Logistic terms use overflow-safe formulations throughout; margins up to and
beyond |a^T w| = 700 are handled exactly. Hessian-sketch products are computed
as m Hessian-vector products without materializing the d-by-d Hessian, and
each call advances the worker's Hessian-vector product counter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .datasets import Partition, QuadraticProblem, SparseDataset

__all__ = [
    "LocalObjective",
    "GlobalObjective",
    "local_value",
    "local_gradient",
    "local_hessian_sketch",
    "local_hessian_dense",
    "global_value",
    "global_gradient",
    "from_partition",
    "from_quadratic",
]

KINDS = ("logreg_l2", "logreg_nonconvex", "quadratic")

DENSE_DIM_CAP = 25_000


@dataclass
class LocalObjective:
    """One worker's local function f_i and its Hessian-vector work counter."""

    kind: str
    d: int
    reg_mu: float = 0.0
    # logreg kinds: row matrix and +-1 labels
    a: Optional[sp.csr_matrix] = field(default=None, repr=False)
    labels: Optional[np.ndarray] = field(default=None, repr=False)
    # quadratic kind: curvature matrix and linear term
    h: Optional[np.ndarray] = field(default=None, repr=False)
    b: Optional[np.ndarray] = field(default=None, repr=False)
    hvp_count: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.reg_mu < 0:
            raise ValueError(f"regularization must be >= 0, got {self.reg_mu}")
        if self.kind == "quadratic":
            if self.h is None or self.b is None:
                raise ValueError("quadratic objective needs h and b")
        else:
            if self.a is None or self.labels is None:
                raise ValueError("logistic objective needs a row matrix and labels")
            if self.a.shape[1] != self.d:
                raise ValueError(
                    f"rows have {self.a.shape[1]} features, expected {self.d}"
                )
            if not np.all(np.isin(self.labels, (-1.0, 1.0))):
                raise ValueError("labels must be -1 or +1")

    @property
    def num_rows(self) -> int:
        return self.a.shape[0] if self.a is not None else 0


@dataclass
class GlobalObjective:
    """Average of n local objectives sharing kind, dimension, and reg_mu."""

    locals: list[LocalObjective]
    d: int

    def __post_init__(self) -> None:
        if not self.locals:
            raise ValueError("need at least one local objective")
        first = self.locals[0]
        for f in self.locals:
            if (f.kind, f.d, f.reg_mu) != (first.kind, first.d, first.reg_mu):
                raise ValueError("local objectives must share kind, d, and reg_mu")
            if f.d != self.d:
                raise ValueError("local dimension disagrees with global dimension")

    @property
    def n(self) -> int:
        return len(self.locals)

    @property
    def kind(self) -> str:
        return self.locals[0].kind

    def total_hvps(self) -> int:
        return sum(f.hvp_count for f in self.locals)


def _check_w(w: np.ndarray, d: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (d,):
        raise ValueError(f"expected a vector of length {d}, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("iterate contains non-finite entries")
    return w


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    z = np.exp(t[~pos])
    out[~pos] = z / (1.0 + z)
    return out


def _margins(f: LocalObjective, w: np.ndarray) -> np.ndarray:
    return f.labels * (f.a @ w)


def _reg_value(f: LocalObjective, w: np.ndarray) -> float:
    if f.kind == "logreg_l2":
        return f.reg_mu * float(w @ w)
    w2 = w * w
    return f.reg_mu * float(np.sum(w2 / (1.0 + w2)))


def _reg_gradient(f: LocalObjective, w: np.ndarray) -> np.ndarray:
    if f.kind == "logreg_l2":
        return 2.0 * f.reg_mu * w
    return f.reg_mu * 2.0 * w / (1.0 + w * w) ** 2


def _reg_hessian_diag(f: LocalObjective, w: np.ndarray) -> np.ndarray:
    if f.kind == "logreg_l2":
        return np.full_like(w, 2.0 * f.reg_mu)
    w2 = w * w
    return f.reg_mu * (2.0 - 6.0 * w2) / (1.0 + w2) ** 3


def local_value(f: LocalObjective, w: np.ndarray) -> float:
    w = _check_w(w, f.d)
    if f.kind == "quadratic":
        return 0.5 * float(w @ (f.h @ w)) - float(f.b @ w)
    u = _margins(f, w)
    loss = float(np.mean(np.logaddexp(0.0, -u)))
    return loss + _reg_value(f, w)


def local_gradient(f: LocalObjective, w: np.ndarray) -> np.ndarray:
    w = _check_w(w, f.d)
    if f.kind == "quadratic":
        return f.h @ w - f.b
    u = _margins(f, w)
    coeff = -f.labels * _sigmoid(-u) / f.num_rows
    return np.asarray(f.a.T @ coeff).ravel() + _reg_gradient(f, w)


def _logistic_hessian_weights(f: LocalObjective, w: np.ndarray) -> np.ndarray:
    sig = _sigmoid(_margins(f, w))
    return sig * (1.0 - sig)


def local_hessian_sketch(f: LocalObjective, w: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Hessian-sketch product: the local Hessian applied to each sketch column.

    Costs m Hessian-vector products on the worker (counted), never forming the
    d-by-d Hessian.
    """
    w = _check_w(w, f.d)
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != f.d:
        raise ValueError(f"sketch shape {s.shape} does not match dimension {f.d}")
    m = s.shape[1]
    f.hvp_count += m
    if f.kind == "quadratic":
        return f.h @ s
    weights = _logistic_hessian_weights(f, w)
    data_part = f.a.T @ (weights[:, None] * (f.a @ s)) / f.num_rows
    return np.asarray(data_part) + _reg_hessian_diag(f, w)[:, None] * s


def local_hessian_dense(
    f: LocalObjective, w: np.ndarray, dim_cap: int = DENSE_DIM_CAP
) -> np.ndarray:
    """Exact symmetric local Hessian, materialized densely.

    Refuses dimensions above ``dim_cap``; use the sketch oracle for problems
    that large. Counts d Hessian-vector products of worker-side work.
    """
    w = _check_w(w, f.d)
    if f.d > dim_cap:
        raise ValueError(
            f"dimension {f.d} exceeds the dense cap {dim_cap}; "
            "use the Hessian-sketch oracle instead"
        )
    f.hvp_count += f.d
    if f.kind == "quadratic":
        return f.h.copy()
    weights = _logistic_hessian_weights(f, w)
    data_part = (f.a.T @ sp.diags(weights) @ f.a) / f.num_rows
    dense = np.asarray(data_part.todense() if sp.issparse(data_part) else data_part)
    dense = dense + np.diag(_reg_hessian_diag(f, w))
    return 0.5 * (dense + dense.T)


def global_value(obj: GlobalObjective, w: np.ndarray) -> float:
    return float(np.mean([local_value(f, w) for f in obj.locals]))


def global_gradient(obj: GlobalObjective, w: np.ndarray) -> np.ndarray:
    return np.mean([local_gradient(f, w) for f in obj.locals], axis=0)


def _rows_to_csr(ds: SparseDataset, indices: list[int]) -> tuple[sp.csr_matrix, np.ndarray]:
    data, col_idx, indptr = [], [], [0]
    labels = np.empty(len(indices))
    for out_i, row_i in enumerate(indices):
        row = ds.rows[row_i]
        labels[out_i] = row.label
        for j in sorted(row.features):
            col_idx.append(j)
            data.append(row.features[j])
        indptr.append(len(col_idx))
    a = sp.csr_matrix(
        (np.array(data), np.array(col_idx, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(indices), ds.num_features),
    )
    return a, labels


def from_partition(
    ds: SparseDataset, part: Partition, kind: str, reg_mu: float
) -> GlobalObjective:
    """Build one logistic local objective per worker from a partitioned dataset."""
    if kind not in ("logreg_l2", "logreg_nonconvex"):
        raise ValueError(f"dataset-backed objectives must be logistic, got {kind!r}")
    locals_ = []
    for indices in part.assignments:
        if not indices:
            raise ValueError("every worker needs at least one row")
        a, labels = _rows_to_csr(ds, indices)
        locals_.append(
            LocalObjective(kind=kind, d=ds.num_features, reg_mu=reg_mu, a=a, labels=labels)
        )
    return GlobalObjective(locals=locals_, d=ds.num_features)


def from_quadratic(problem: QuadraticProblem) -> GlobalObjective:
    locals_ = [
        LocalObjective(kind="quadratic", d=problem.d, h=h, b=b)
        for h, b in zip(problem.h_locals, problem.b_locals)
    ]
    return GlobalObjective(locals=locals_, d=problem.d)
