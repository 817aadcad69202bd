"""Server-side per-worker Hessian approximation updates.

The server stores one curvature approximation per worker and refreshes it
each round from the reconstructed sketch product. Three rules:

* rank-m symmetric (SR1-style) update with truncated inner inverse,
* direct update: convex blend with the projected approximation Y M^+ Y^T,
* identity regularization: add the mean compressed-residual norm times I.

Every update returns a symmetric matrix; ill-conditioned inner factorizations
degrade to keeping the previous approximation rather than aborting the run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .compress import CompressedBlock, decompress
from .numerics import pinv_sym, sym_eig, truncate_sr1_inner

logger = logging.getLogger(__name__)

__all__ = [
    "ReconstructedSketch",
    "DenseHessianState",
    "FactoredHessianState",
    "reconstruct",
    "reconstruct_from_product",
    "update_lsr1_truncated",
    "update_direct",
    "update_regularized_identity",
]


@dataclass
class ReconstructedSketch:
    """Error-feedback reconstruction of one worker's Hessian-sketch product."""

    y_tilde: np.ndarray
    m_inner: np.ndarray


@dataclass
class DenseHessianState:
    """Per-worker d-by-d approximation held on the server."""

    worker_id: int
    b: np.ndarray

    def sketch_product(self, s: np.ndarray) -> np.ndarray:
        return self.b @ s

    def dense(self) -> np.ndarray:
        return self.b


@dataclass
class FactoredHessianState:
    """Low-memory stand-in for the direct rule with full blend weight.

    Stores only the latest reconstructed sketch pair (Y, M); the implied
    approximation Y M^+ Y^T is never materialized, and its action on a sketch
    costs O(d m^2).
    """

    worker_id: int
    y_f: np.ndarray
    m_f: np.ndarray

    def sketch_product(self, s: np.ndarray) -> np.ndarray:
        return self.y_f @ (pinv_sym(self.m_f) @ (self.y_f.T @ s))

    def dense(self) -> np.ndarray:
        return self.y_f @ pinv_sym(self.m_f) @ self.y_f.T


def _symmetrize(b: np.ndarray) -> np.ndarray:
    return 0.5 * (b + b.T)


def reconstruct_from_product(
    block: CompressedBlock, bs: np.ndarray, m_inner: np.ndarray
) -> ReconstructedSketch:
    """Restore the sketch product from the uplink, given B_i S precomputed."""
    y_tilde = decompress(block) + bs
    if y_tilde.shape != bs.shape:
        raise ValueError(
            f"payload shape {block.shape} does not match product shape {bs.shape}"
        )
    return ReconstructedSketch(y_tilde=y_tilde, m_inner=_symmetrize(np.asarray(m_inner, dtype=float)))


def reconstruct(
    block: CompressedBlock, b: np.ndarray, s: np.ndarray, m_inner: np.ndarray
) -> ReconstructedSketch:
    """Restore the worker's sketch product: decompressed residual plus B_i S."""
    b = np.asarray(b, dtype=float)
    s = np.asarray(s, dtype=float)
    if b.shape[1] != s.shape[0]:
        raise ValueError(f"shapes {b.shape} and {s.shape} do not align")
    return reconstruct_from_product(block, b @ s, m_inner)


def update_lsr1_truncated(
    b: np.ndarray,
    y_tilde: np.ndarray,
    m_inner: np.ndarray,
    s: np.ndarray,
    omega: float,
    bs: np.ndarray | None = None,
) -> np.ndarray:
    """Rank-m symmetric update with truncated inner inverse.

    Adds R U [L^-1]_trunc U^T R^T to B, where R is the sketch residual
    Y~ - B S and U L U^T is the eigendecomposition of the inner matrix
    M - S^T B S. Inner inverse entries with magnitude <= omega are dropped,
    which keeps the update bounded when the inner matrix is near singular.
    A zero residual leaves B unchanged.
    """
    if bs is None:
        bs = b @ s
    residual = y_tilde - bs
    inner = _symmetrize(m_inner - s.T @ bs)
    if not np.all(np.isfinite(residual)):
        raise ValueError("sketch residual contains non-finite entries")
    try:
        decomp = sym_eig(inner)
    except np.linalg.LinAlgError:
        logger.warning("inner eigendecomposition failed; keeping previous approximation")
        return b
    inv_trunc = truncate_sr1_inner(decomp.eigenvalues, omega)
    g = residual @ decomp.eigenvectors
    return _symmetrize(b + (g * inv_trunc) @ g.T)


def update_direct(
    b: np.ndarray, y_tilde: np.ndarray, m_inner: np.ndarray, beta: float
) -> np.ndarray:
    """Convex blend of the previous approximation with Y~ M^+ Y~^T."""
    if not (0.0 < beta <= 1.0):
        raise ValueError(f"blend weight must be in (0, 1], got {beta}")
    projected = y_tilde @ pinv_sym(m_inner) @ y_tilde.T
    return _symmetrize((1.0 - beta) * b + beta * projected)


def update_regularized_identity(b: np.ndarray, c_norms) -> np.ndarray:
    """Add the mean compressed-residual Frobenius norm times identity."""
    c_norms = np.asarray(c_norms, dtype=float)
    if c_norms.size == 0:
        raise ValueError("need at least one residual norm")
    return b + float(np.mean(c_norms)) * np.eye(b.shape[0])
