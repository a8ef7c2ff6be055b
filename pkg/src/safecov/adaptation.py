"""Projection-based update laws for the fault and disturbance-weight estimates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAIN_MARGIN = 0.99
# radial rescaling lands a few ulps inside the bound so norms never round past it
_INSIDE = 1.0 - 4.0 * np.finfo(float).eps


def convex_bound(x, x_bar: float, eta: float) -> float:
    """``(x.x - x_bar^2) / (2 eta x_bar + eta^2)``: <= 0 inside radius x_bar, 1 at x_bar + eta."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float((x @ x - x_bar * x_bar) / (2.0 * eta * x_bar + eta * eta))


def convex_bound_grad(x, x_bar: float, eta: float) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return 2.0 * x / (2.0 * eta * x_bar + eta * eta)


def proj(x, y, x_bar: float, eta: float):
    """Projection operator on the ball bounded by ``convex_bound``.

    Removes the outward component of ``y`` (scaled by ``l(x)``) when ``x``
    is in the boundary layer and ``y`` points outward; otherwise returns ``y``.
    Output has the shape of ``y``.
    """
    y_arr = np.asarray(y, dtype=float)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    yv = np.atleast_1d(y_arr)
    lx = convex_bound(xv, x_bar, eta)
    g = convex_bound_grad(xv, x_bar, eta)
    gy = float(g @ yv)
    if lx > 0.0 and gy > 0.0:
        out = yv - lx * g * (gy / float(g @ g))
        return out.reshape(y_arr.shape) if y_arr.ndim else float(out[0])
    return y_arr.copy() if y_arr.ndim else float(y_arr)


def proj_rows(X, Y, x_bar, eta) -> np.ndarray:
    """Row-wise ``proj`` for ``(N, k)`` arrays with per-row bounds."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    x_bar = np.broadcast_to(np.asarray(x_bar, dtype=float), X.shape[:1])
    denom = 2.0 * eta * x_bar + eta * eta
    lx = (np.einsum("ij,ij->i", X, X) - x_bar**2) / denom
    G = 2.0 * X / denom[:, None]
    gy = np.einsum("ij,ij->i", G, Y)
    active = (lx > 0.0) & (gy > 0.0)
    out = Y.copy()
    if np.any(active):
        gg = np.einsum("ij,ij->i", G[active], G[active])
        out[active] -= (lx[active] * gy[active] / gg)[:, None] * G[active]
    return out


def clamp_rows(X, x_bar, eta) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    lim = np.broadcast_to(np.asarray(x_bar, dtype=float), X.shape[:1]) + eta
    r = np.linalg.norm(X, axis=1)
    scale = np.where(r > lim, _INSIDE * lim / np.where(r > 0.0, r, 1.0), 1.0)
    return X * scale[:, None]


def clamp_to_bound(x, x_bar: float, eta: float):
    """Radially rescale ``x`` onto ``|x| <= x_bar + eta`` if a discrete step overshot."""
    x_arr = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x_arr))
    lim = x_bar + eta
    if r > lim:
        k = _INSIDE * lim / r
        return x_arr * k if x_arr.ndim else float(x_arr * k)
    return x_arr.copy() if x_arr.ndim else float(x_arr)


@dataclass
class AdaptationGains:
    K: float
    Q: np.ndarray
    mu: float
    alpha: float
    nu: float
    d_bar: np.ndarray

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.d_bar = np.asarray(self.d_bar, dtype=float)
        if not self.K > 0.0 or np.any(self.Q <= 0.0):
            raise ValueError("adaptation gains K and Q must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.mu <= 0.0 or self.nu <= 0.0 or np.any(self.d_bar <= 0.0):
            raise ValueError("mu, nu and d_bar must be positive")

    @property
    def N(self) -> int:
        return len(self.Q)

    @property
    def theta_bar(self) -> float:
        return 0.5 * (1.0 - self.alpha)

    @property
    def theta_eta(self) -> float:
        return 0.5 * self.alpha

    def certificate_offset(self) -> float:
        """``K theta_bar^2 + sum_j Q_j d_bar_j^2``, the worst-case estimation budget."""
        return self.K * self.theta_bar**2 + float(self.Q @ self.d_bar**2)


@dataclass
class AdaptiveState:
    theta_hat: float
    d_hat: np.ndarray = field(default_factory=lambda: np.zeros((11, 2)))

    @classmethod
    def zeros(cls, N: int) -> "AdaptiveState":
        return cls(0.0, np.zeros((N, 2)))

    def copy(self) -> "AdaptiveState":
        return AdaptiveState(float(self.theta_hat), np.array(self.d_hat, dtype=float))

    def check_bounds(self, gains: AdaptationGains) -> None:
        lim = gains.theta_bar + gains.theta_eta
        if abs(self.theta_hat) > lim:
            raise AssertionError(f"|theta_hat| = {abs(self.theta_hat)!r} exceeds {lim!r}")
        norms = np.linalg.norm(self.d_hat, axis=1)
        over = norms > gains.d_bar + gains.nu
        if np.any(over):
            j = int(np.argmax(over))
            raise AssertionError(f"|d_hat[{j}]| = {norms[j]!r} exceeds {gains.d_bar[j] + gains.nu!r}")


def theta_update_rhs(state: AdaptiveState, grad_h_p, u, gains: AdaptationGains) -> float:
    raw = -float(np.dot(grad_h_p, u)) / (2.0 * gains.K) - 0.5 * gains.mu * state.theta_hat
    return proj(state.theta_hat, raw, gains.theta_bar, gains.theta_eta)


def d_update_rhs(state: AdaptiveState, grad_h_p, psi, gains: AdaptationGains) -> np.ndarray:
    grad = np.asarray(grad_h_p, dtype=float)
    psi = np.asarray(psi, dtype=float)
    raw = -(psi / (2.0 * gains.Q))[:, None] * grad[None, :] - 0.5 * gains.mu * state.d_hat
    return proj_rows(state.d_hat, raw, gains.d_bar, gains.nu)


def leak_rhs(state: AdaptiveState, gains: AdaptationGains) -> tuple[float, np.ndarray]:
    """Update rates when no barrier is active (gradient term absent)."""
    th = proj(state.theta_hat, -0.5 * gains.mu * state.theta_hat, gains.theta_bar, gains.theta_eta)
    dd = proj_rows(state.d_hat, -0.5 * gains.mu * state.d_hat, gains.d_bar, gains.nu)
    return th, dd


def euler_step(state: AdaptiveState, theta_rate: float, d_rate, dt: float, gains: AdaptationGains) -> AdaptiveState:
    """Advance the estimates one explicit step, then re-project onto the bounded sets."""
    th = clamp_to_bound(state.theta_hat + dt * theta_rate, gains.theta_bar, gains.theta_eta)
    dh = clamp_rows(state.d_hat + dt * np.asarray(d_rate, dtype=float), gains.d_bar, gains.nu)
    return AdaptiveState(float(th), dh)


def select_gains(
    h0: float,
    theta_hat0: float,
    d_hat0,
    *,
    alpha: float,
    nu: float,
    mu: float,
    d_bar,
    margin: float = GAIN_MARGIN,
) -> AdaptationGains:
    """Largest admissible ``K`` and ``Q_j`` for initial barrier value ``h0``, scaled by ``margin``."""
    if not h0 > 0.0:
        raise ValueError(f"initial barrier value must be positive, got h0 = {h0!r}")
    if abs(theta_hat0) > 0.5:
        raise ValueError(f"|theta_hat(0)| must not exceed 1/2, got {theta_hat0!r}")
    d_hat0 = np.asarray(d_hat0, dtype=float).reshape(-1, 2)
    N = len(d_hat0)
    d_bar = np.broadcast_to(np.asarray(d_bar, dtype=float), (N,)).copy()
    theta_bar = 0.5 * (1.0 - alpha)
    K = margin * h0 / (2.0 * (abs(theta_hat0) + theta_bar) ** 2)
    Q = margin * h0 / (2.0 * N * (np.linalg.norm(d_hat0, axis=1) + d_bar) ** 2)
    return AdaptationGains(K=K, Q=Q, mu=mu, alpha=alpha, nu=nu, d_bar=d_bar)
