"""Pairwise barrier, robust constraint assembly and the single-constraint QP filter."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adaptation import AdaptationGains, AdaptiveState


class InfeasibleQP(RuntimeError):
    pass


@dataclass(frozen=True)
class BarrierEvaluation:
    h: float
    grad_p: np.ndarray
    grad_z: np.ndarray
    neighbor_id: int
    zeta: float

    @property
    def degenerate(self) -> bool:
        return not np.any(self.grad_p)


@dataclass(frozen=True)
class LinearConstraint:
    """Feasible set ``a . u + b >= 0``."""

    a: np.ndarray
    b: float

    def slack(self, u) -> float:
        return float(self.a @ np.asarray(u, dtype=float) + self.b)


def barrier(p, z, r_safe: float, E: float, V_z: float, neighbor_id: int = -1) -> BarrierEvaluation:
    """``h = |p - z|^2 - (2 r_safe)^2`` with its gradients and robustness margin ``zeta``."""
    if not r_safe > 0.0:
        raise ValueError("r_safe must be positive")
    diff = np.asarray(p, dtype=float) - np.asarray(z, dtype=float)
    h = float(diff @ diff) - (2.0 * r_safe) ** 2
    grad_p = 2.0 * diff
    grad_z = -grad_p
    zeta = float(np.linalg.norm(grad_p)) * E + float(np.linalg.norm(grad_z)) * V_z
    return BarrierEvaluation(h, grad_p, grad_z, int(neighbor_id), zeta)


def assemble_constraint(
    be: BarrierEvaluation,
    est: AdaptiveState,
    gains: AdaptationGains,
    psi,
    alpha: float | None = None,
) -> LinearConstraint:
    """Linear constraint on ``u`` that keeps the certificate decaying no faster than ``mu/2``."""
    alpha = gains.alpha if alpha is None else alpha
    a = (est.theta_hat + 0.5 * (1.0 + alpha)) * be.grad_p
    drift = np.asarray(psi, dtype=float) @ est.d_hat
    b = float(be.grad_p @ drift) - be.zeta + 0.5 * gains.mu * (be.h - gains.certificate_offset())
    return LinearConstraint(a, b)


def solve_cbf_qp(u_nom, c: LinearConstraint) -> np.ndarray:
    """Closest input to ``u_nom`` satisfying ``c``; closed-form half-space projection."""
    u_nom = np.asarray(u_nom, dtype=float)
    s = c.slack(u_nom)
    if s >= 0.0:
        return u_nom.copy()
    aa = float(c.a @ c.a)
    if aa == 0.0:
        raise InfeasibleQP(f"constraint 0 . u + {c.b!r} >= 0 cannot be met")
    return u_nom - (s / aa) * c.a


def hbar_diagnostic(h: float, theta_err: float, d_err, gains: AdaptationGains) -> float:
    """Barrier value discounted by the weighted squared estimation errors."""
    d_err = np.asarray(d_err, dtype=float).reshape(-1, 2)
    return float(h - gains.K * theta_err**2 - gains.Q @ np.einsum("ij,ij->i", d_err, d_err))
