"""Integrators, domains, tangent propagation, orbit records."""
import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attractorlab.core import (
    Domain, PlaneEvent, StepSettings, SystemModel, TangentFrame,
    integrate_flow, iterate_map, jacobian_at, propagate_tangent)
from attractorlab.errors import (
    DivergenceError, LabError, LocusProximityError, StepUnderflowError)
from attractorlab.zoo import build_model

finite_coord = st.floats(min_value=-100.0, max_value=100.0,
                         allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------------------
# Domain


def test_box_domain_contains_and_wrap():
    d = Domain.box([(-1.0, 1.0), (0.0, 2.0)])
    assert d.dim == 2
    inside = np.array([0.5, 1.5])
    assert bool(d.contains(inside))
    assert not bool(d.contains(np.array([1.5, 1.5])))
    # wrap is the identity on non-periodic coordinates, even outside the box
    out = np.array([3.0, -1.0])
    assert np.array_equal(d.wrap(out), out)


def test_torus_wrap_and_shortest_arc():
    d = Domain.torus(2)
    w = d.wrap(np.array([1.3, -0.25]))
    assert np.allclose(w, [0.3, 0.75])
    delta = d.wrapped_delta(np.array([0.9, 0.0]), np.array([0.1, 0.5]))
    assert np.allclose(np.abs(delta), [0.2, 0.5])
    assert float(d.distance(np.array([0.9, 0.0]), np.array([0.1, 0.5]))) == \
        pytest.approx(np.hypot(0.2, 0.5))


def test_product_domain_mixes_periodic_and_bounded():
    d = Domain.product([(-1, 1), (0, 2 * np.pi)], [False, True],
                       [1.0, 2 * np.pi])
    w = d.wrap(np.array([0.5, 2 * np.pi + 0.1]))
    assert np.allclose(w, [0.5, 0.1])
    # containment only constrains the bounded coordinate
    assert bool(d.contains(np.array([0.5, 100.0])))
    assert not bool(d.contains(np.array([1.5, 0.1])))


@given(st.lists(finite_coord, min_size=2, max_size=2))
def test_torus_wrap_idempotent(coords):
    d = Domain.torus(2)
    s = np.array(coords)
    once = d.wrap(s)
    assert np.all((once >= 0) & (once < 1))
    assert np.allclose(d.wrap(once), once)


@given(st.lists(finite_coord, min_size=2, max_size=2),
       st.lists(finite_coord, min_size=2, max_size=2))
def test_wrapped_delta_antisymmetric_and_short(a, b):
    d = Domain.torus(2)
    a, b = np.array(a), np.array(b)
    dab = d.wrapped_delta(a, b)
    dba = d.wrapped_delta(b, a)
    assert np.all(np.abs(dab) <= 0.5 + 1e-12)
    assert np.allclose(np.minimum(np.abs(dab + dba), np.abs(np.abs(dab + dba) - 1.0)),
                       0.0, atol=1e-9)


# ---------------------------------------------------------------------------
# Flow integration


def _linear_decay():
    return SystemModel(
        name="decay", kind="flow", dim=1, params={},
        domain=Domain.box([(-10.0, 10.0)]),
        rhs=lambda s: -np.asarray(s, dtype=float),
        jacobian=lambda s: np.broadcast_to(-np.eye(1), np.shape(s)[:-1] + (1, 1)).copy(),
        vectorized=True)


def _rotation_flow():
    def rhs(s):
        s = np.asarray(s, dtype=float)
        return np.stack([-s[..., 1], s[..., 0]], axis=-1)

    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    return SystemModel(
        name="rot", kind="flow", dim=2, params={},
        domain=Domain.box([(-5.0, 5.0)] * 2),
        rhs=rhs,
        jacobian=lambda s: np.broadcast_to(J, np.shape(s)[:-1] + (2, 2)).copy(),
        vectorized=True)


def test_rk4_matches_exponential_decay():
    orb = integrate_flow(_linear_decay(), np.array([2.0]), 1.0)
    assert float(orb.times[-1]) == pytest.approx(1.0)
    assert float(orb.final_state[0]) == pytest.approx(2.0 * np.exp(-1.0), abs=1e-9)


def test_rk4_fourth_order_convergence():
    errs = []
    for dt in (0.02, 0.01):
        orb = integrate_flow(_linear_decay(), np.array([1.0]), 1.0,
                             step=StepSettings(dt=dt))
        errs.append(abs(float(orb.final_state[0]) - np.exp(-1.0)))
    ratio = errs[0] / errs[1]
    assert 10.0 < ratio < 22.0


def test_rotation_closes_after_full_period():
    orb = integrate_flow(_rotation_flow(), np.array([1.0, 0.0]), 2 * np.pi,
                         step=StepSettings(dt=0.001))
    assert np.allclose(orb.final_state, [1.0, 0.0], atol=1e-9)


def test_adaptive_stepper_agrees_with_fixed():
    fixed = integrate_flow(_linear_decay(), np.array([1.0]), 1.0)
    adapt = integrate_flow(_linear_decay(), np.array([1.0]), 1.0,
                           step=StepSettings(adaptive=True, tol=1e-12))
    assert float(adapt.final_state[0]) == pytest.approx(
        float(fixed.final_state[0]), abs=1e-8)


def test_plane_event_truncates_at_crossing():
    ev = PlaneEvent(coord=0, value=0.0, direction=-1, terminal=True)
    orb = integrate_flow(_rotation_flow(), np.array([1.0, 0.0]), 10.0,
                         events=[ev])
    assert float(orb.times[-1]) == pytest.approx(np.pi / 2, abs=1e-6)
    assert np.allclose(orb.final_state, [0.0, 1.0], atol=1e-6)
    assert orb.meta["events"], "crossing should be recorded"


def test_divergence_raises():
    blow = SystemModel(
        name="blow", kind="flow", dim=1, params={},
        domain=Domain.box([(-np.inf, np.inf)]),
        rhs=lambda s: np.asarray(s, dtype=float) ** 2,
        vectorized=True)
    with pytest.raises(DivergenceError):
        integrate_flow(blow, np.array([1.0]), 2.0)


def test_adaptive_underflow_raises():
    with pytest.raises(StepUnderflowError):
        integrate_flow(_linear_decay(), np.array([1.0]), 1.0,
                       step=StepSettings(adaptive=True, tol=1e-300,
                                         min_dt=1e-6))


def test_flow_guard_rejects_maps():
    dbl = build_model({"model": "doubling", "params": {}})
    with pytest.raises(LabError):
        integrate_flow(dbl, np.array([0.1]), 1.0)


# ---------------------------------------------------------------------------
# Map iteration


def test_iterate_records_initial_state():
    dbl = build_model({"model": "doubling", "params": {}})
    orb = iterate_map(dbl, np.array([0.1]), 10)
    assert len(orb) == 11
    assert float(orb.states[0, 0]) == pytest.approx(0.1)
    assert np.all((orb.states >= 0) & (orb.states < 1))


def test_locus_hit_truncates():
    pl = build_model({"model": "pl_lorenz", "params": {}})
    orb = iterate_map(pl, np.array([0.3, 0.0]), 50)
    assert orb.truncated == "locus-hit"
    assert len(orb) == 1


def test_domain_escape_truncates():
    shift = SystemModel(
        name="shift", kind="map", dim=1, params={},
        domain=Domain.box([(-1.0, 1.0)]),
        step_fn=lambda s: np.asarray(s, dtype=float) + 0.4,
        vectorized=True)
    orb = iterate_map(shift, np.array([0.0]), 50)
    assert orb.truncated == "domain-escape"
    assert float(orb.meta["escape_state"][0]) == pytest.approx(1.2)


def test_map_divergence_truncates():
    grow = SystemModel(
        name="grow", kind="map", dim=1, params={},
        domain=Domain.box([(-np.inf, np.inf)]),
        step_fn=lambda s: 10.0 * np.asarray(s, dtype=float),
        vectorized=True)
    orb = iterate_map(grow, np.array([1.0]), 100)
    assert orb.truncated == "divergence"
    assert len(orb) < 20


def test_orbit_csv_round_trips_exactly(tmp_path):
    lor = build_model({"model": "lorenz", "params": {}})
    orb = integrate_flow(lor, np.array([1.0, 1.0, 1.0]), 2.0)
    path = tmp_path / "orbit.csv"
    orb.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], orb.times)
    assert np.array_equal(data[:, 1:], orb.states)


# ---------------------------------------------------------------------------
# Jacobians


def test_finite_difference_matches_analytic_jacobian():
    lor = build_model({"model": "lorenz", "params": {}})
    fd_model = dataclasses.replace(lor, jacobian=None)
    s = np.array([1.3, -2.1, 17.0])
    assert np.allclose(jacobian_at(fd_model, s), jacobian_at(lor, s),
                       atol=1e-5)


def test_jacobian_refuses_points_on_the_cut():
    pl = build_model({"model": "pl_lorenz", "params": {}})
    fd_model = dataclasses.replace(pl, jacobian=None)
    with pytest.raises(LocusProximityError):
        jacobian_at(fd_model, np.array([0.2, 1e-12]))


# ---------------------------------------------------------------------------
# Tangent propagation


def test_tangent_growth_matches_cat_spectrum():
    cat = build_model({"model": "cat_map", "params": {}})
    lam = np.log((3 + np.sqrt(5)) / 2)
    orb, frame = propagate_tangent(cat, np.array([0.1234, 0.5678]),
                                   TangentFrame.identity(2, 2), 2000, 10)
    rates = frame.log_growth / 2000
    assert rates[0] == pytest.approx(lam, abs=1e-2)
    assert rates[1] == pytest.approx(-lam, abs=1e-2)
    assert frame.orthonormality_defect() < 1e-10


def test_tangent_growth_vanishes_for_rigid_rotation():
    orb, frame = propagate_tangent(_rotation_flow(), np.array([1.0, 0.0]),
                                   TangentFrame.identity(2, 2), 20.0, 1.0)
    assert np.max(np.abs(frame.log_growth / 20.0)) < 1e-6
