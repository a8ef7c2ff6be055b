import math

import numpy as np
import pytest

from safecov.config import load_config
from safecov.fourier import FourierBasis
from safecov.simulation import (
    apply_dynamics,
    disturbance,
    min_pairwise_distance,
    nominal_controller,
    reference_weights,
    run_scenario,
)

BASE = load_config("paper_sec4")
LIMIT = 2 * 0.25 * (1 - 5e-3)


def certificate_failures(result, tol=1e-3):
    """Steps where h-bar drops faster than exp(-mu dt / 2) allows (same neighbour both steps)."""
    hb = result.series("hbar")
    nb = result.series("neighbor")
    decay = math.exp(-result.config.mu * result.config.dt / 2)
    same = (nb[1:] == nb[:-1]) & np.isfinite(hb[1:]) & np.isfinite(hb[:-1])
    return same & (hb[1:] < hb[:-1] * decay - tol)


def test_disturbance_examples():
    assert np.array_equal(disturbance(0.0, 30.0, 1.0), [0, 0])
    assert np.array_equal(disturbance(20.0, 30.0, 1.0), [-1, -1])
    assert np.array_equal(disturbance(30.0, 30.0, 1.0), [0, 0])
    assert np.array_equal(disturbance(6.0, 30.0, 1.0), [6.0, 6.0])
    assert np.array_equal(disturbance(12.0, 30.0, 1.0), [1.5, 1.5])
    for t in (-0.1, 30.01):
        with pytest.raises(ValueError):
            disturbance(t, 30.0, 1.0)


def test_nominal_controller():
    assert np.array_equal(nominal_controller((1.0, 2.0), (1.0, 2.0)), [0, 0])
    assert np.array_equal(nominal_controller((1.0, 0.0), (0.0, 0.0), 1.0), [-1, 0])


def test_dynamics():
    p = np.array([0.3, 0.4])
    assert np.array_equal(apply_dynamics(p, (0, 0), 0.7, (0, 0), 0.01), p)
    assert np.allclose(apply_dynamics(p, (1, 0), 1.0, (0, 0), 0.01), p + (0.01, 0), atol=1e-16)
    assert np.array_equal(apply_dynamics(p, (2, 0), 0.5, (-1, 0), 0.01), p)
    with pytest.raises(ValueError):
        apply_dynamics(p, (1, 0), 1.0, (0, 0), 0.0)


def test_min_pairwise_distance():
    assert min_pairwise_distance([(0, 0), (3, 4)]) == 5.0
    assert min_pairwise_distance([(0, 0), (1, 1), (0, 0)]) == 0.0
    ang = 2 * np.pi * np.arange(8) / 8
    r = 1.7
    assert min_pairwise_distance(np.c_[r * np.cos(ang), r * np.sin(ang)]) == pytest.approx(
        2 * r * np.sin(np.pi / 8), rel=1e-14
    )
    with pytest.raises(ValueError):
        min_pairwise_distance([(0, 0)])


def test_reference_weights_within_bound():
    w = reference_weights(BASE, FourierBasis(BASE.L, BASE.T))
    assert w.shape == (11, 2)
    assert np.linalg.norm(w, axis=1).max() < BASE.d_bar
    assert np.array_equal(w[:, 0], w[:, 1])


def test_single_agent_reaches_centroid():
    cfg = BASE.replace(
        n=1, initial_positions=((0.2, 2.1),), theta_true=(1.0,), disturbance="none",
        density="uniform", mode="nominal", T=10.0,
    )
    res = run_scenario(cfg)
    assert np.linalg.norm(res.final_positions[0] - (1.25, 1.25)) < 1e-3


def test_single_agent_modes_identical():
    cfg = BASE.replace(n=1, initial_positions=((0.6, 0.9),), T=3.0)
    a = run_scenario(cfg.replace(mode="nominal"))
    b = run_scenario(cfg.replace(mode="cbf"))
    assert np.array_equal(a.series("positions"), b.series("positions"))


def test_filter_idle_beyond_sensing_range():
    # four agents at the centroids of the quadrants: a fixed point of the coverage law
    quads = ((0.625, 0.625), (1.875, 0.625), (0.625, 1.875), (1.875, 1.875))
    cfg = BASE.replace(
        n=4, initial_positions=quads, theta_true=(1.0,), disturbance="none", density="uniform",
        sensing_range=1.0, T=2.0,
    )
    a = run_scenario(cfg.replace(mode="nominal"))
    b = run_scenario(cfg.replace(mode="cbf"))
    assert np.array_equal(a.series("positions"), b.series("positions"))
    assert np.abs(a.series("u")).max() < 1e-12


def _headon(mode, **kw):
    fields = dict(
        name="headon", mode=mode, n=2, initial_positions=((0.5, 1.25), (2.0, 1.25)),
        theta_true=(1.0,), disturbance="none", E=0.0, V_z=2.0, T=3.0,
    )
    cfg = BASE.replace(**{**fields, **kw})
    return run_scenario(cfg, nominal=lambda t, P, C: np.array([[1.0, 0.0], [-1.0, 0.0]]))


def test_headon_cbf_keeps_distance():
    res = _headon("cbf")
    assert res.ok
    assert res.min_distance() >= LIMIT
    assert np.nanmin(res.series("h")) >= -1e-3


def test_headon_nominal_collides():
    res = _headon("nominal")
    assert not res.ok or res.min_distance() < 0.5
    assert res.first_violation_time() is not None


def test_certificate_holds_with_moderate_gains():
    # small disturbance-weight bound and one harmonic keep the update laws non-stiff at this dt
    res = _headon("cbf", d_bar=0.5, L=1, theta_true=(0.5,))
    hb = res.series("hbar")
    assert np.all(hb[0] >= 0)
    assert not certificate_failures(res).any()


def test_estimates_bounded_every_step():
    res = run_scenario(BASE.replace(T=2.0))
    th = res.series("theta_hat")
    assert np.abs(th).max() <= 0.5
    assert (th + 0.55).min() >= 0.05
    assert res.series("dhat_max_norm").max() <= BASE.d_bar + BASE.nu


def test_dt_halving_regression():
    cfg = BASE.replace(mode="nominal", T=2.0, disturbance="none")
    a = run_scenario(cfg)
    b = run_scenario(cfg.replace(dt=0.0025))
    gap = np.abs(a.final_positions - b.final_positions).max()
    assert gap < 2e-3


def test_deterministic_records():
    cfg = BASE.replace(T=0.5)
    a, b = run_scenario(cfg), run_scenario(cfg)
    for name in ("positions", "u", "h", "hbar", "theta_hat", "H_cost"):
        assert np.array_equal(a.series(name), b.series(name), equal_nan=True)


def test_outside_policy_abort():
    res = run_scenario(BASE.replace(mode="nominal", outside_policy="abort", T=10.0))
    assert res.status == "degenerate"
    assert "outside the domain" in str(res.abort)
    assert len(res.records) == res.abort.step


def test_records_one_per_step():
    res = run_scenario(BASE.replace(T=0.25))
    t = res.series("t")
    assert len(t) == 50 and np.all(np.diff(t) > 0)


def test_nominal_hook_shape_checked():
    with pytest.raises(ValueError):
        run_scenario(BASE.replace(T=0.01), nominal=lambda t, P, C: np.zeros(3))
