"""Model constructors: vector fields, maps, parameter validation."""
import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attractorlab.core import iterate_map, jacobian_at
from attractorlab.errors import ConfigError
from attractorlab.zoo import (
    MODEL_NAMES, GeomLorenzParams, SaddleNodeParams, SolidTorusParams,
    TrigPerturbation, WildMapParams, build_model, make_circle_family,
    make_geometric_lorenz, make_pl_lorenz, make_saddle_node_flow,
    make_solid_torus_map, make_torus_automorphism, make_torus_endomorphism,
    make_wild_map, solid_torus_params)

point3 = st.lists(st.floats(min_value=-30.0, max_value=30.0,
                            allow_nan=False), min_size=3, max_size=3)


# ---------------------------------------------------------------------------
# Registry


def test_registry_builds_every_model():
    for name in MODEL_NAMES:
        m = build_model({"model": name, "params": {}})
        assert m.dim >= 1
        assert m.kind in ("flow", "map")


def test_unknown_model_is_listed():
    with pytest.raises(ConfigError) as err:
        build_model({"model": "quux", "params": {}})
    assert "lorenz" in str(err.value)


def test_unknown_param_key_is_named():
    with pytest.raises(ConfigError) as err:
        build_model({"model": "lorenz", "params": {"sigmaa": 10.0}})
    assert "sigmaa" in str(err.value)


# ---------------------------------------------------------------------------
# Lorenz flow


def test_lorenz_equilibria_are_roots():
    lor = build_model({"model": "lorenz", "params": {}})
    r, b = 28.0, 8.0 / 3.0
    c = np.sqrt(b * (r - 1))
    for eq in ([0.0, 0.0, 0.0], [c, c, r - 1], [-c, -c, r - 1]):
        assert np.max(np.abs(lor.rhs(np.array(eq)))) < 1e-12


@given(point3)
def test_lorenz_divergence_is_constant_trace(pt):
    lor = build_model({"model": "lorenz", "params": {}})
    J = jacobian_at(lor, np.array(pt))
    assert float(np.trace(J)) == pytest.approx(-(10.0 + 1.0 + 8.0 / 3.0))


@given(point3)
def test_lorenz_symmetry_equivariance(pt):
    lor = build_model({"model": "lorenz", "params": {}})
    s = np.array(pt)
    flipped = s * np.array([-1.0, -1.0, 1.0])
    lhs = lor.rhs(flipped)
    rhs = lor.rhs(s) * np.array([-1.0, -1.0, 1.0])
    assert np.allclose(lhs, rhs, atol=1e-9)


# ---------------------------------------------------------------------------
# Trig perturbation handle


def test_trig_perturbation_derivative_and_bounds():
    g = TrigPerturbation(0.05, harmonic=3, phase=0.7, offset=0.1)
    th = np.linspace(0.0, 1.0, 17)
    fd = (g(th + 1e-7) - g(th - 1e-7)) / 2e-7
    assert np.allclose(g.deriv(th), fd, atol=1e-6)
    sup_g, sup_gp = g.c1_bounds()
    assert sup_g >= float(np.max(np.abs(g(th))))
    assert sup_gp >= float(np.max(np.abs(g.deriv(th))))


# ---------------------------------------------------------------------------
# Circle and torus maps


def test_circle_step_is_lift_mod_one():
    g = TrigPerturbation(0.1)
    m = make_circle_family(3, g, 0.2)
    th = np.array([0.37])
    # step_fn returns the raw lift; the iterator wraps it
    lift = float(m.step_fn(th)[0])
    assert lift == pytest.approx(3 * 0.37 + float(g(0.37)) + 0.2, abs=1e-12)
    wrapped = float(m.wrap(m.step_fn(th))[0])
    assert wrapped == pytest.approx(lift % 1.0, abs=1e-12)


def test_doubling_is_the_m2_circle_family():
    dbl = build_model({"model": "doubling", "params": {}})
    assert dbl.structure["m"] == 2
    orb = iterate_map(dbl, np.array([0.3]), 3)
    assert np.allclose(orb.states[:, 0], [0.3, 0.6, 0.2, 0.4])


def test_cat_map_matches_matrix_action():
    cat = build_model({"model": "cat_map", "params": {}})
    A = np.asarray(cat.structure["matrix"])
    assert np.array_equal(A, [[2, 1], [1, 1]])
    s = np.array([0.37, 0.91])
    assert np.allclose(cat.wrap(cat.step_fn(s)), (A @ s) % 1.0)


def test_automorphism_needs_unit_determinant():
    make_torus_automorphism([[1, 1], [0, 1]])  #|det| = 1 is fine
    with pytest.raises(ConfigError):
        make_torus_automorphism([[2, 0], [0, 1]])
    with pytest.raises(ConfigError):
        make_torus_automorphism([[1.5, 0], [0, 1]])
    with pytest.raises(ConfigError):
        make_torus_automorphism([[1, 0, 0], [0, 1, 0]])


def test_endomorphism_accepts_expanding_rejects_singular():
    make_torus_endomorphism([[2, 0], [0, 1]])
    with pytest.raises(ConfigError):
        make_torus_endomorphism([[1, 0], [0, 0]])


# ---------------------------------------------------------------------------
# Geometric Lorenz section map


def test_geometric_lorenz_is_a_skew_product():
    gl = build_model({"model": "geometric_lorenz", "params": {}})
    one_d = gl.structure["one_d_map"]
    for s in ([0.2, 0.5], [-0.4, -0.7], [0.1, 0.05]):
        out = gl.step_fn(np.array(s))
        assert float(out[1]) == pytest.approx(float(one_d(s[1])), abs=1e-12)


def test_geometric_lorenz_one_d_derivative():
    gl = build_model({"model": "geometric_lorenz", "params": {}})
    f, fp = gl.structure["one_d_map"], gl.structure["one_d_deriv"]
    y = np.array([0.3, -0.6, 0.85])
    fd = (f(y + 1e-7) - f(y - 1e-7)) / 2e-7
    assert np.allclose(fp(y), fd, rtol=1e-5)


def test_geometric_lorenz_rejects_overshooting_branches():
    with pytest.raises(ConfigError) as err:
        make_geometric_lorenz(GeomLorenzParams(a1=0.9))
    assert "a1" in str(err.value)


def test_pl_lorenz_constructor_guards():
    with pytest.raises(ConfigError):
        make_pl_lorenz(slope_x=0.6, x_off=0.5)
    with pytest.raises(ConfigError):
        make_pl_lorenz(slope_y=0.9)


def test_pl_lorenz_branches():
    pl = build_model({"model": "pl_lorenz", "params": {}})
    up = pl.step_fn(np.array([0.0, 0.5]))
    dn = pl.step_fn(np.array([0.0, -0.5]))
    assert np.allclose(up, [0.55, 0.0], atol=1e-12)
    assert np.allclose(dn, [-0.55, 0.0], atol=1e-12)


# ---------------------------------------------------------------------------
# Wild map


@pytest.mark.parametrize("kw", [
    {"rho": 0.6}, {"eta": 0.3}, {"ax": 1.1}, {"cz": 0.5, "dz": 0.6},
])
def test_wild_params_are_validated(kw):
    with pytest.raises(ConfigError):
        WildMapParams(**kw)


def test_wild_jacobian_matches_finite_differences_off_the_cut():
    wild = make_wild_map(WildMapParams())
    fd_model = dataclasses.replace(wild, jacobian=None)
    s = np.array([0.4, 1.3, -0.2])
    assert np.allclose(jacobian_at(wild, s), jacobian_at(fd_model, s),
                       atol=1e-5)


def test_wild_structure_declares_the_cut():
    wild = build_model({"model": "wild", "params": {}})
    assert wild.structure["locus_coord"] == 0
    assert wild.structure["graph_block"] == 2


# ---------------------------------------------------------------------------
# Solid torus map


def test_solid_torus_fiber_image_stays_in_the_disk():
    st_map = make_solid_torus_map(SolidTorusParams())
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform(-0.7, 0.7, size=2)
        th = rng.uniform(0.0, 1.0)
        out = st_map.step_fn(np.array([x[0], x[1], th]))
        assert np.hypot(out[0], out[1]) <= 1.0 + 1e-12


def test_solid_torus_rejects_impossible_geometry():
    with pytest.raises(ConfigError):
        make_solid_torus_map(SolidTorusParams(mu_c=1.2))
    with pytest.raises(ConfigError):
        make_solid_torus_map(SolidTorusParams(mu_c=0.9, offset=0.5))


def test_solid_torus_params_from_dict():
    p = solid_torus_params({"m": 3, "mu_c": 0.1, "g_amplitude": 0.02})
    assert p.m == 3 and p.mu_c == 0.1
    assert isinstance(p.g, TrigPerturbation)
    with pytest.raises(ConfigError) as err:
        solid_torus_params({"mu_sea": 0.1})
    assert "mu_sea" in str(err.value)


# ---------------------------------------------------------------------------
# Saddle-node normal form


def test_saddle_node_rhs_components():
    m = make_saddle_node_flow(SaddleNodeParams(mu=0.02, C=((-1.0,),),
                                               Omega=(2.0,)))
    out = m.rhs(np.array([0.5, 0.1, 0.3]))
    assert np.allclose(out, [-0.5, 0.02 + 0.01, 2.0])


def test_saddle_node_requires_stable_y_block():
    with pytest.raises(ConfigError):
        make_saddle_node_flow(SaddleNodeParams(C=((1.0,),)))
    with pytest.raises(ConfigError):
        make_saddle_node_flow(SaddleNodeParams(C=((1.0, 0.0),)))
