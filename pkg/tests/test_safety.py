import numpy as np
import pytest

from oracles import grid_qp_aligned, grid_qp_axis, random_qps
from safecov.adaptation import AdaptationGains, AdaptiveState
from safecov.safety import (
    InfeasibleQP,
    LinearConstraint,
    assemble_constraint,
    barrier,
    hbar_diagnostic,
    solve_cbf_qp,
)


def gains(K=1.0, Q=(0.0,), N=3, mu=2.0):
    Q = np.full(N, Q[0]) if len(Q) == 1 else np.asarray(Q)
    return AdaptationGains(K=K, Q=np.maximum(Q, 1e-300), mu=mu, alpha=0.1, nu=0.1, d_bar=np.full(N, 20.0))


def test_barrier_examples():
    be = barrier((0, 0), (1, 0), 0.25, 0.2, 10.0, neighbor_id=3)
    assert be.h == pytest.approx(0.75, abs=1e-15)
    assert np.array_equal(be.grad_p, [-2.0, 0.0])
    assert np.array_equal(be.grad_p, -be.grad_z)
    assert be.zeta == pytest.approx(20.4, abs=1e-12)
    assert be.neighbor_id == 3
    assert barrier((0, 0), (0.5, 0), 0.25, 0.2, 10.0).h == pytest.approx(0.0, abs=1e-15)


def test_barrier_degenerate_when_collocated():
    assert barrier((1, 1), (1, 1), 0.25, 0.2, 10.0).degenerate
    with pytest.raises(ValueError):
        barrier((0, 0), (1, 0), 0.0, 0.2, 10.0)


def test_constraint_coefficient():
    be = barrier((0, 0), (1, 0), 0.25, 0.0, 0.0)
    g = gains(K=0.5, Q=(0.001,))
    c = assemble_constraint(be, AdaptiveState.zeros(3), g, np.ones(3))
    assert np.allclose(c.a, [-1.1, 0.0], rtol=1e-15)


def test_constraint_offset_cancels_at_zero_margin():
    be = barrier((0, 0), (1, 0), 0.25, 0.2, 10.0)
    K = 0.75 / 0.45**2 * 0.5
    Q = np.full(3, 0.75 * 0.5 / (3 * 400.0))
    g = AdaptationGains(K=K, Q=Q, mu=2.0, alpha=0.1, nu=0.1, d_bar=np.full(3, 20.0))
    assert g.certificate_offset() == pytest.approx(0.75, rel=1e-14)
    c = assemble_constraint(be, AdaptiveState.zeros(3), g, np.ones(3))
    assert c.b == pytest.approx(-be.zeta, rel=1e-12)


def test_constraint_offset_example():
    be = barrier((0, 0), (1, 0), 0.25, 0.0, 0.0)
    K = 0.35 / 0.45**2
    Q = np.full(3, 0.35 / (3 * 400.0))
    g = AdaptationGains(K=K, Q=Q, mu=2.0, alpha=0.1, nu=0.1, d_bar=np.full(3, 20.0))
    c = assemble_constraint(be, AdaptiveState.zeros(3), g, np.ones(3))
    assert c.b == pytest.approx(0.05, abs=1e-12)


def test_constraint_disturbance_term():
    be = barrier((0, 0), (1, 0), 0.25, 0.0, 0.0)
    g = gains(K=1e-9, Q=(1e-12,))
    d_hat = np.array([[1.0, 0.0], [0.0, 5.0], [2.0, 0.0]])
    psi = np.array([1.0, 1.0, 0.5])
    c = assemble_constraint(be, AdaptiveState(0.0, d_hat), g, psi)
    # grad_p . (1*(1,0) + 1*(0,5) + 0.5*(2,0)) = -2 * 2 = -4; plus (mu/2) h
    assert c.b == pytest.approx(-4.0 + 0.75, abs=1e-8)


@pytest.mark.parametrize(
    "a, b, u_nom, want",
    [((1, 0), 0, (1, 0), (1, 0)), ((1, 0), 0, (-1, 0), (0, 0)), ((0, 1), -1, (0, 0), (0, 1))],
)
def test_qp_examples(a, b, u_nom, want):
    c = LinearConstraint(np.array(a, dtype=float), float(b))
    assert np.allclose(solve_cbf_qp(u_nom, c), want, atol=1e-15)


def test_qp_examples_against_grid():
    for a, b, u_nom in [((1, 0), 0, (-1, 0)), ((0, 1), -1, (0, 0))]:
        s = np.linspace(-2, 2, 401)
        X, Y = np.meshgrid(s, s)
        f = (X - u_nom[0]) ** 2 + (Y - u_nom[1]) ** 2
        f[a[0] * X + a[1] * Y + b < 0] = np.inf
        k = np.argmin(f)
        u = solve_cbf_qp(u_nom, LinearConstraint(np.array(a, float), float(b)))
        assert np.abs(u - (X.flat[k], Y.flat[k])).max() <= 4 / 400


def test_qp_infeasible():
    with pytest.raises(InfeasibleQP):
        solve_cbf_qp((0, 0), LinearConstraint(np.zeros(2), -1.0))
    assert np.array_equal(solve_cbf_qp((1, 2), LinearConstraint(np.zeros(2), 0.5)), [1, 2])


def test_qp_random_properties():
    a, b, u_nom = random_qps(10_000, seed=1)
    for k in range(len(a)):
        c = LinearConstraint(a[k], b[k])
        u = solve_cbf_qp(u_nom[k], c)
        s0 = c.slack(u_nom[k])
        assert c.slack(u) >= -1e-9
        # minimal invasiveness: distance moved equals the constraint gap
        assert np.linalg.norm(u - u_nom[k]) == pytest.approx(max(0.0, -s0) / np.linalg.norm(a[k]), abs=1e-12)
        if s0 < 0:
            assert abs(c.slack(u)) <= 1e-9


def test_qp_against_aligned_grid():
    a, b, u_nom = random_qps(500, seed=2)
    u_grid, h = grid_qp_aligned(a, b, u_nom)
    u = np.array([solve_cbf_qp(u_nom[k], LinearConstraint(a[k], b[k])) for k in range(len(a))])
    assert np.all(np.linalg.norm(u - u_grid, axis=1) <= h * (1 + 1e-9))


def test_qp_never_beaten_by_axis_grid():
    a, b, u_nom = random_qps(300, seed=3)
    best = grid_qp_axis(a, b, u_nom)
    u = np.array([solve_cbf_qp(u_nom[k], LinearConstraint(a[k], b[k])) for k in range(len(a))])
    f = ((u - u_nom) ** 2).sum(axis=1)
    assert np.all(f <= best + 1e-12)


def test_hbar_examples():
    g = AdaptationGains(K=1.8, Q=np.full(3, 1e-3), mu=2.0, alpha=0.1, nu=0.1, d_bar=np.full(3, 20.0))
    assert hbar_diagnostic(0.75, 0.0, np.zeros((3, 2)), g) == 0.75
    assert hbar_diagnostic(0.75, 0.05, np.zeros((3, 2)), g) == pytest.approx(0.7455, abs=1e-15)
    d_err = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]])
    assert hbar_diagnostic(0.75, 0.0, d_err, g) == pytest.approx(0.75 - 1e-3 * 5, abs=1e-15)
