"""Fixed-step simulation of faulty, disturbed agents under the coverage law and safety filter."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import adaptation as ad
from .config import ScenarioConfig
from .density import GaussianDensity, UniformDensity, cell_moments
from .fourier import FourierBasis, fit_weights
from .geometry import DomainPolygon, GeometryError, check_generators, clip_halfplane, polygon_area
from .safety import InfeasibleQP, assemble_constraint, barrier, hbar_diagnostic, solve_cbf_qp

log = logging.getLogger(__name__)

REFERENCE_GRID = 3001


class SimulationAbort(RuntimeError):
    def __init__(self, step: int, t: float, agent: int, message: str):
        super().__init__(f"step {step} (t = {t:.6g} s), agent {agent}: {message}")
        self.step = step
        self.t = t
        self.agent = agent
        self.message = message


def disturbance(t: float, T: float, d_max: float) -> np.ndarray:
    """Piecewise disturbance profile, identical in x and y."""
    if not 0.0 <= t <= T:
        raise ValueError(f"t = {t} outside [0, {T}]")
    if t < T / 6:
        v = 0.5 * d_max * t
    elif t < T / 3:
        v = d_max * t
    elif t < 2 * T / 3:
        v = 0.5 * d_max * (T / 2 - t)
    elif t < 5 * T / 6:
        v = -d_max
    else:
        v = 0.5 * d_max * (t - T)
    return np.array([v, v])


def disturbance_fn(cfg: ScenarioConfig):
    if cfg.disturbance == "none" or cfg.d_max == 0.0:
        return lambda t: np.zeros(2)
    return lambda t: disturbance(min(t, cfg.T), cfg.T, cfg.d_max)


def nominal_controller(p, c, k_p: float = 1.0) -> np.ndarray:
    """Gradient coverage law ``-k_p (p - c)`` toward the cell centroid."""
    return -k_p * (np.asarray(p, dtype=float) - np.asarray(c, dtype=float))


def apply_dynamics(p, u_applied, theta_true, d_t, dt: float) -> np.ndarray:
    """One explicit Euler step of ``p' = theta u + d``."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    return np.asarray(p, dtype=float) + dt * (theta_true * np.asarray(u_applied, dtype=float) + d_t)


def pairwise_distances(positions) -> np.ndarray:
    P = np.asarray(positions, dtype=float).reshape(-1, 2)
    diff = P[:, None, :] - P[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(D, np.inf)
    return D


def min_pairwise_distance(positions) -> float:
    P = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(P) < 2:
        raise ValueError("minimum pairwise distance needs at least two agents")
    return float(pairwise_distances(P).min())


def make_density(cfg: ScenarioConfig):
    if cfg.density == "uniform":
        return UniformDensity()
    return GaussianDensity(cfg.density_mean, cfg.density_sigma)


def reference_weights(cfg: ScenarioConfig, basis: FourierBasis) -> np.ndarray:
    """Least-squares basis weights of the configured disturbance, shape ``(N, 2)``."""
    dist = disturbance_fn(cfg)
    t = np.linspace(0.0, cfg.T, REFERENCE_GRID)
    samples = np.array([dist(s) for s in t])
    return fit_weights(basis, t, samples)


def tessellate(domain: DomainPolygon, P: np.ndarray, allow_outside: bool) -> list[np.ndarray]:
    """Bounded Voronoi cells; with ``allow_outside`` generators off the domain are tolerated."""
    if not allow_outside:
        check_generators(domain, P)
    else:
        D = pairwise_distances(P)
        if len(P) > 1 and D.min() <= 1e-9:
            i, j = np.unravel_index(np.argmin(D), D.shape)
            i, j = sorted((int(i), int(j)))
            raise GeometryError(f"generators {i} and {j} coincide")
    sq = np.einsum("ij,ij->i", P, P)
    cells = []
    for i in range(len(P)):
        cell = domain.vertices
        for j in range(len(P)):
            if i != j:
                cell = clip_halfplane(cell, P[j] - P[i], 0.5 * (sq[j] - sq[i]))
                if len(cell) == 0:
                    break
        cells.append(cell)
    return cells


@dataclass
class StepRecord:
    t: float
    positions: np.ndarray
    u_nom: np.ndarray
    u: np.ndarray
    h: np.ndarray
    hbar: np.ndarray
    theta_hat: np.ndarray
    dhat_max_norm: np.ndarray
    neighbor: np.ndarray
    min_dist: float
    H_cost: float
    max_centroid_gap: float = float("nan")

    @property
    def theta_hat_norm(self) -> np.ndarray:
        return np.abs(self.theta_hat)


@dataclass
class RunResult:
    config: ScenarioConfig
    records: list[StepRecord] = field(default_factory=list)
    status: str = "ok"
    abort: SimulationAbort | None = None
    gains: list = field(default_factory=list)
    d_ref: np.ndarray | None = None
    final_positions: np.ndarray | None = None
    collisions: list = field(default_factory=list)
    neighbor_switches: int = 0
    speed_bound_exceeded: int = 0
    outside_events: int = 0

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, k):
        return self.records[k]

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def min_distance(self) -> float:
        return float(np.min(self.series("min_dist"))) if self.records else float("nan")

    def first_violation_time(self) -> float | None:
        limit = 2.0 * self.config.r_safe
        for r in self.records:
            if r.min_dist < limit:
                return r.t
        return None


def _initial_gains(cfg: ScenarioConfig, P: np.ndarray) -> list:
    if cfg.n < 2:
        return [None] * cfg.n
    D = pairwise_distances(P)
    gains = []
    for i in range(cfg.n):
        h0 = float(D[i].min() ** 2 - (2.0 * cfg.r_safe) ** 2)
        gains.append(
            ad.select_gains(h0, 0.0, np.zeros((cfg.N, 2)), alpha=cfg.alpha, nu=cfg.nu, mu=cfg.mu, d_bar=cfg.d_bar)
            if h0 > 0.0
            else None
        )
    return gains


def run_scenario(cfg: ScenarioConfig, progress=None, nominal=None) -> RunResult:
    """Integrate the closed loop for ``cfg.steps`` steps and record every step.

    Each step: tessellate and integrate masses/centroids, form the nominal
    inputs, filter them (cbf mode) against each agent's nearest detected
    neighbour while integrating the estimate update laws, then advance the
    true dynamics. Geometric degeneracies and infeasible filters stop the
    run; the partial trace is kept and ``status`` says why.

    ``nominal(t, P, C)`` replaces the coverage law when given; it must
    return an ``(n, 2)`` array of nominal inputs.
    """
    cfg.validate()
    domain = cfg.domain_polygon()
    density = make_density(cfg)
    basis = FourierBasis(cfg.L, cfg.T)
    dist = disturbance_fn(cfg)
    theta = cfg.theta_vector()
    theta_star = theta - 0.5 * (1.0 + cfg.alpha)
    n, N = cfg.n, cfg.N
    cbf = cfg.mode == "cbf"
    allow_outside = cfg.outside_policy == "steer_back"

    P = cfg.positions().copy()
    V_prev = np.zeros_like(P)
    est = [ad.AdaptiveState.zeros(N) for _ in range(n)]
    result = RunResult(config=cfg, d_ref=reference_weights(cfg, basis))
    result.gains = _initial_gains(cfg, P)
    if cbf and n > 1 and any(g is None for g in result.gains):
        raise ValueError("cbf mode needs every initial barrier value to be positive")
    prev_neighbor = np.full(n, -1)

    for k in range(cfg.steps):
        t = k * cfg.dt
        try:
            cells = tessellate(domain, P, allow_outside)
        except GeometryError as exc:
            result.status = "degenerate"
            result.abort = SimulationAbort(k, t, _agent_in(str(exc)), str(exc))
            break

        C = np.empty_like(P)
        H = 0.0
        for i, cell in enumerate(cells):
            if len(cell) and polygon_area(cell) > 0.0:
                _, C[i], cost = cell_moments(cell, density, P[i], cfg.quadrature)
                H += cost
            else:
                # off-domain generator owning no region: zero mass, so the cost gradient vanishes
                C[i] = P[i]
        if nominal is None:
            U_nom = nominal_controller(P, C, cfg.k_p)
        else:
            U_nom = np.array(nominal(t, P.copy(), C.copy()), dtype=float).reshape(n, 2)
        U = U_nom.copy()

        D = pairwise_distances(P) if n > 1 else np.full((1, 1), np.inf)
        h = np.full(n, np.nan)
        hbar = np.full(n, np.nan)
        neighbor = np.full(n, -1)
        psi = basis(t)
        aborted = False
        new_est = est
        if n > 1:
            new_est = []
            for i in range(n):
                j = int(np.argmin(D[i]))
                detected = D[i, j] <= cfg.sensing_range
                if detected:
                    neighbor[i] = j
                    if np.hypot(*V_prev[j]) > cfg.V_z:
                        result.speed_bound_exceeded += 1
                if detected and D[i, j] == 0.0:
                    result.status = "degenerate"
                    result.abort = SimulationAbort(k, t, i, f"collision with agent {j}: barrier gradient vanishes")
                    aborted = True
                    break
                be = barrier(P[i], P[j], cfg.r_safe, cfg.E, cfg.V_z, j) if detected else None
                if be is not None:
                    h[i] = be.h
                gains = result.gains[i]
                if not cbf:
                    new_est.append(est[i])
                    continue
                if be is None:
                    th_rate, d_rate = ad.leak_rhs(est[i], gains)
                else:
                    c = assemble_constraint(be, est[i], gains, psi)
                    try:
                        U[i] = solve_cbf_qp(U_nom[i], c)
                    except InfeasibleQP as exc:
                        result.status = "infeasible"
                        result.abort = SimulationAbort(k, t, i, str(exc))
                        aborted = True
                        break
                    th_rate = ad.theta_update_rhs(est[i], be.grad_p, U[i], gains)
                    d_rate = ad.d_update_rhs(est[i], be.grad_p, psi, gains)
                    hbar[i] = hbar_diagnostic(
                        be.h, theta_star[i] - est[i].theta_hat, result.d_ref - est[i].d_hat, gains
                    )
                new_est.append(ad.euler_step(est[i], th_rate, d_rate, cfg.dt, gains))
            if aborted:
                break
        result.neighbor_switches += int(np.sum((prev_neighbor >= 0) & (neighbor >= 0) & (neighbor != prev_neighbor)))
        prev_neighbor = neighbor
        for i in np.flatnonzero(h < 0.0):
            result.collisions.append((t, int(i), int(neighbor[i])))

        result.records.append(
            StepRecord(
                t=t,
                positions=P.copy(),
                u_nom=U_nom,
                u=U,
                h=h,
                hbar=hbar,
                theta_hat=np.array([e.theta_hat for e in est]),
                dhat_max_norm=np.array([np.linalg.norm(e.d_hat, axis=1).max() for e in est]),
                neighbor=neighbor,
                min_dist=float(D.min()) if n > 1 else float("nan"),
                H_cost=H,
                max_centroid_gap=float(np.linalg.norm(P - C, axis=1).max()),
            )
        )
        d_t = dist(t)
        P_next = apply_dynamics(P, U, theta[:, None], d_t, cfg.dt)
        V_prev = (P_next - P) / cfg.dt
        P = P_next
        est = new_est
        outside = sum(not domain.contains(p) for p in P)
        result.outside_events += outside
        if progress is not None:
            progress(k)

    result.final_positions = P
    if result.status != "ok":
        log.warning("run %s (%s) stopped: %s", cfg.name, cfg.mode, result.abort)
    return result


def _agent_in(message: str) -> int:
    for tok in message.replace(",", " ").split():
        if tok.isdigit():
            return int(tok)
    return -1
