"""Search-direction rules built on the server's aggregated curvature state.

All rules produce a descent step of the form -(A @ grad) for a positive
definite operator A (or a best-effort regularized solve). The truncated rules
carry guaranteed spectral bounds on A, which the step-size theory consumes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .numerics import pinv_sym, sym_eig, thin_qr, truncate_def1

logger = logging.getLogger(__name__)

__all__ = [
    "DirectionResult",
    "direction_truncated_inverse",
    "direction_fedsonia",
    "direction_regularized",
]

_EPS_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2)


@dataclass
class DirectionResult:
    """Search direction plus the spectral interval of the applied operator.

    ``spectrum_bounds`` is (mu1, mu2) with mu1 I <= A <= mu2 I guaranteed for
    the truncated rules, and None for the regularized solve (no guarantee).
    ``operator`` is the dense d-by-d A, filled only on request.
    """

    p: np.ndarray
    spectrum_bounds: Optional[tuple[float, float]]
    diagnostics: dict = field(default_factory=dict)
    operator: Optional[np.ndarray] = None


def direction_truncated_inverse(
    b_agg: np.ndarray,
    grad: np.ndarray,
    omega: float,
    omega_cap: float,
    materialize_operator: bool = False,
) -> DirectionResult:
    """Newton-type step through the eigenvalue-clamped inverse approximation.

    Clamping |lambda| into [omega, omega_cap] makes the inverse positive
    definite with spectrum in [1/omega_cap, 1/omega], so the step is a descent
    direction for any symmetric input.
    """
    decomp = sym_eig(b_agg)
    clamped, inv = truncate_def1(decomp, omega, omega_cap)
    v = decomp.eigenvectors
    p = -(v @ (inv * (v.T @ grad)))
    diag = {
        "floored": int(np.sum(np.abs(decomp.eigenvalues) < omega)),
        "capped": int(np.sum(np.abs(decomp.eigenvalues) > omega_cap)),
    }
    operator = (v * inv) @ v.T if materialize_operator else None
    return DirectionResult(
        p=p,
        spectrum_bounds=(1.0 / omega_cap, 1.0 / omega),
        diagnostics=diag,
        operator=operator,
    )


def direction_fedsonia(
    y_tilde_agg: np.ndarray,
    m_agg: np.ndarray,
    grad: np.ndarray,
    omega: float,
    omega_cap: float,
    rho: float,
    materialize_operator: bool = False,
) -> DirectionResult:
    """Curvature step in the sketched subspace, scaled gradient step outside.

    The aggregated sketch product is reduced by economy QR; the clamped
    inverse of the m-by-m projected curvature acts inside span(Y~), and the
    orthogonal complement of the gradient is scaled by rho. rho is clamped per
    call into [1/omega_cap, 1/max(inverse diagonal)], the interval for which
    the combined operator stays within its spectral bounds.
    """
    y_tilde_agg = np.asarray(y_tilde_agg, dtype=float)
    if y_tilde_agg.ndim != 2 or y_tilde_agg.shape[1] == 0:
        raise ValueError("need a d-by-m sketch product with m >= 1")
    q, r = thin_qr(y_tilde_agg)
    decomp = sym_eig(r @ pinv_sym(m_agg) @ r.T)
    clamped, inv = truncate_def1(decomp, omega, omega_cap)
    v_tilde = q @ decomp.eigenvectors

    lower = 1.0 / omega_cap
    upper = max(lower, float(np.min(clamped)))
    rho_eff = float(np.clip(rho, lower, upper))
    if rho_eff != rho:
        logger.info("rho %.3g clamped to %.3g (valid interval [%.3g, %.3g])",
                    rho, rho_eff, lower, upper)

    coeff = v_tilde.T @ grad
    g_par = v_tilde @ coeff
    g_perp = grad - g_par
    p = -(v_tilde @ (inv * coeff)) - rho_eff * g_perp

    diag = {
        "rho_used": rho_eff,
        "floored": int(np.sum(np.abs(decomp.eigenvalues) < omega)),
        "capped": int(np.sum(np.abs(decomp.eigenvalues) > omega_cap)),
    }
    operator = None
    if materialize_operator:
        d = grad.shape[0]
        operator = (v_tilde * inv) @ v_tilde.T + rho_eff * (
            np.eye(d) - v_tilde @ v_tilde.T
        )
    return DirectionResult(
        p=p,
        spectrum_bounds=(1.0 / omega_cap, 2.0 / omega),
        diagnostics=diag,
        operator=operator,
    )


def direction_regularized(
    b_agg: np.ndarray, grad: np.ndarray, lam: float
) -> DirectionResult:
    """Solve (B + lam I + eps I) p = -grad with escalating ridge eps.

    eps walks the ladder 0, 1e-8, 1e-7, ..., 1e-2 until a Cholesky solve
    succeeds and yields a descent direction; if every attempt fails, falls
    back to the plain negative gradient with a warning. No spectral bounds
    are guaranteed.
    """
    if lam < 0:
        raise ValueError(f"regularization must be >= 0, got {lam}")
    b_agg = np.asarray(b_agg, dtype=float)
    grad = np.asarray(grad, dtype=float)
    d = grad.shape[0]
    if not np.any(grad):
        return DirectionResult(p=np.zeros(d), spectrum_bounds=None,
                               diagnostics={"epsilon": 0.0, "lambda": lam})
    base = 0.5 * (b_agg + b_agg.T) + lam * np.eye(d)
    for eps in _EPS_LADDER:
        try:
            factor = scipy.linalg.cho_factor(base + eps * np.eye(d), lower=True)
            p = scipy.linalg.cho_solve(factor, -grad)
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError):
            continue
        if np.all(np.isfinite(p)) and float(p @ grad) < 0.0:
            return DirectionResult(
                p=p,
                spectrum_bounds=None,
                diagnostics={"epsilon": eps, "lambda": lam},
            )
    logger.warning("regularized solve failed at every ridge level; "
                   "falling back to the gradient step")
    return DirectionResult(
        p=-grad,
        spectrum_bounds=None,
        diagnostics={"epsilon": None, "lambda": lam, "fallback": True},
    )
