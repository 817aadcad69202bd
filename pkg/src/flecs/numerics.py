"""Dense linear-algebra kernels shared by the Hessian-learning and direction code.

All kernels are deterministic for fixed inputs. Square symmetric inputs are
symmetrized as (A + A^T)/2 before factorization, since compressed uplinks can
break exact symmetry of intermediate products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpectralDecomposition",
    "sym_eig",
    "thin_qr",
    "pinv_sym",
    "truncate_def1",
    "truncate_sr1_inner",
]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigendecomposition A = V diag(eigenvalues) V^T of a symmetric matrix.

    eigenvalues are ascending; eigenvectors has orthonormal columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _require_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


def sym_eig(a: np.ndarray) -> SpectralDecomposition:
    """Eigendecomposition of a (nearly) symmetric matrix.

    The input is symmetrized first, so callers may pass products that are
    symmetric only up to roundoff or compression noise.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    _require_finite(a, "matrix")
    sym = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(sym)
    return SpectralDecomposition(eigenvalues=vals, eigenvectors=vecs)


def thin_qr(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Economy QR factorization Y = Q R with Q d-by-m orthonormal, R m-by-m.

    Rank-deficient Y is allowed; R may then carry zero diagonal entries while
    Q keeps orthonormal columns.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {y.shape}")
    d, m = y.shape
    if d < m:
        raise ValueError(f"need at least as many rows as columns, got {d}x{m}")
    _require_finite(y, "matrix")
    q, r = np.linalg.qr(y, mode="reduced")
    return q, r


def pinv_sym(m: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Symmetric pseudo-inverse via eigendecomposition.

    Eigenvalues with |lambda| <= rtol * max|lambda| are inverted to zero; the
    rest to 1/lambda. The result is exactly symmetric.
    """
    decomp = sym_eig(m)
    vals = decomp.eigenvalues
    amax = np.max(np.abs(vals)) if vals.size else 0.0
    if amax == 0.0:
        return np.zeros_like(np.asarray(m, dtype=float))
    keep = np.abs(vals) > rtol * amax
    inv = np.zeros_like(vals)
    inv[keep] = 1.0 / vals[keep]
    v = decomp.eigenvectors
    out = (v * inv) @ v.T
    return 0.5 * (out + out.T)


def truncate_def1(
    decomp: SpectralDecomposition, omega: float, omega_cap: float
) -> tuple[np.ndarray, np.ndarray]:
    """Clamp eigenvalue magnitudes into [omega, omega_cap].

    Each eigenvalue maps to min(max(|lambda|, omega), omega_cap). Returns the
    clamped diagonal and its entrywise reciprocal, whose entries always lie in
    [1/omega_cap, 1/omega]; this interval is what makes the resulting inverse
    operator uniformly positive definite.
    """
    if not (omega > 0.0):
        raise ValueError(f"truncation floor must be positive, got {omega}")
    if omega_cap < omega:
        raise ValueError(
            f"truncation cap {omega_cap} must be >= floor {omega}"
        )
    clamped = np.clip(np.abs(decomp.eigenvalues), omega, omega_cap)
    return clamped, 1.0 / clamped


def truncate_sr1_inner(l_diag: np.ndarray, omega: float) -> np.ndarray:
    """Truncated inverse of the inner eigenvalue diagonal of the rank-m update.

    Entry j becomes 1/l_j, except that zero eigenvalues and entries with
    |1/l_j| <= omega are set to 0 (dropped from the update).
    """
    l_diag = np.asarray(l_diag, dtype=float)
    inv = np.zeros_like(l_diag)
    nonzero = l_diag != 0.0
    inv[nonzero] = 1.0 / l_diag[nonzero]
    inv[np.abs(inv) <= omega] = 0.0
    return inv
