"""Certified condition checks: grids, sup-norms, verdicts, witnesses."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from attractorlab.core import Domain, Locus, SystemModel
from attractorlab.errors import (
    ConditionInconsistencyError, ConfigError, SingularBlockError)
from attractorlab.verify import (
    GridSpec, check_anosov_matrix, check_expansion, check_lorenz_conditions,
    check_pseudohyperbolic, check_saddle_focus_gap, compute_q)
from attractorlab.zoo import WildMapParams, build_model, make_wild_map

CAT_GAP = (3 - np.sqrt(5)) / 2  # distance of the closest eigenvalue from 1


def _by_name(report):
    return {c.condition: c for c in report.conditions}


# ---------------------------------------------------------------------------
# Anosov matrix check


def test_cat_matrix_is_anosov():
    rep = check_anosov_matrix([[2, 1], [1, 1]])
    assert rep.passed
    conds = _by_name(rep)
    assert set(conds) == {"integer_entries", "unimodular",
                         "spectrum_off_unit_circle"}
    assert conds["spectrum_off_unit_circle"].witness_value == \
        pytest.approx(1.0 - CAT_GAP, abs=1e-12)


def test_identity_fails_on_the_unit_circle():
    rep = check_anosov_matrix([[1, 0], [0, 1]])
    assert not rep.passed
    c = _by_name(rep)["spectrum_off_unit_circle"]
    assert not c.holds
    re_part, im_part = c.detail["closest_eigenvalue"]
    assert np.hypot(re_part, im_part) == pytest.approx(1.0)


def test_non_unimodular_and_non_integer_matrices_fail():
    rep = check_anosov_matrix([[2, 0], [0, 1]])
    assert not _by_name(rep)["unimodular"].holds
    rep = check_anosov_matrix([[1.5, 0.3], [0.2, 1.1]])
    assert not _by_name(rep)["integer_entries"].holds


def test_rotation_matrix_fails_spectrum():
    rep = check_anosov_matrix([[0, 1], [-1, 0]])
    assert not rep.passed
    assert not _by_name(rep)["spectrum_off_unit_circle"].holds


def test_non_square_matrix_is_a_config_error():
    with pytest.raises(ConfigError):
        check_anosov_matrix([[1, 0, 0], [0, 1, 0]])


@given(st.lists(st.integers(min_value=-3, max_value=3), min_size=4, max_size=4))
def test_anosov_verdict_matches_direct_linear_algebra(entries):
    A = np.array(entries, dtype=float).reshape(2, 2)
    rep = check_anosov_matrix(A)
    det_ok = abs(round(float(np.linalg.det(A)))) == 1
    moduli = np.abs(np.linalg.eigvals(A))
    spectrum_ok = bool(np.all(np.abs(moduli - 1.0) > 1e-9))
    assert rep.passed == (det_ok and spectrum_ok)


# ---------------------------------------------------------------------------
# Expansion check for circle endomorphisms


def test_doubling_expansion_certificate():
    rep = check_expansion(build_model({"model": "doubling", "params": {}}))
    assert rep.passed
    c = _by_name(rep)["uniform_expansion"]
    assert c.witness_value == pytest.approx(0.5)  # sup 1/|G'|


def test_rotation_is_not_expanding():
    rot = build_model({"model": "circle", "params": {"m": 1, "omega": 0.3}})
    assert not check_expansion(rot).passed


def test_expansion_rejects_flows():
    lor = build_model({"model": "lorenz", "params": {}})
    with pytest.raises(ConfigError):
        check_expansion(lor)


# ---------------------------------------------------------------------------
# Cut-plane condition suite


def test_pl_benchmark_norms_and_q():
    pl = build_model({"model": "pl_lorenz", "params": {}})
    rep = check_lorenz_conditions(pl)
    assert rep.passed
    norms = rep.derived["norms"]
    assert norms["fx"] == pytest.approx(0.4, abs=1e-12)
    assert norms["gy_inv"] == pytest.approx(0.5, abs=1e-12)
    assert norms["gx"] == pytest.approx(0.0, abs=1e-12)
    assert norms["gy_inv_fy"] == pytest.approx(0.0, abs=1e-12)
    assert rep.derived["q"] == pytest.approx(2.1486832980505138, abs=1e-12)
    assert rep.derived["q_squared_variant"] == pytest.approx(
        2.1797958971132712, abs=1e-12)


def test_geometric_lorenz_passes_the_suite():
    gl = build_model({"model": "geometric_lorenz", "params": {}})
    rep = check_lorenz_conditions(gl)
    assert rep.passed
    assert rep.derived["q"] > 1.0


def _narrow_band_violator():
    """Contraction 0.5 in bulk but 1.05 inside |y| < 0.01."""
    width = 0.004

    def bump(y):
        return np.exp(-(y / width) ** 2)

    def step(s):
        s = np.asarray(s, dtype=float)
        x, y = s[..., 0], s[..., 1]
        xn = x * (0.5 + 0.55 * bump(y))
        yn = 2.0 * y - np.sign(y)
        return np.stack([xn, yn], axis=-1)

    def jac(s):
        s = np.asarray(s, dtype=float)
        x, y = s[..., 0], s[..., 1]
        J = np.zeros(np.shape(s)[:-1] + (2, 2))
        J[..., 0, 0] = 0.5 + 0.55 * bump(y)
        J[..., 0, 1] = x * 0.55 * bump(y) * (-2.0 * y / width ** 2)
        J[..., 1, 1] = 2.0
        return J

    return SystemModel(
        name="band_violator", kind="map", dim=2, params={},
        domain=Domain.box([(-1.0, 1.0), (-1.0, 1.0)]),
        step_fn=step, jacobian=jac, vectorized=True,
        locus=Locus(distance=lambda s: np.abs(np.asarray(s)[..., 1])),
        structure={"locus_coord": 1})


def test_violator_fails_contraction_inside_the_band():
    rep = check_lorenz_conditions(_narrow_band_violator())
    assert not rep.passed
    a = _by_name(rep)["x_contraction"]
    assert not a.holds
    assert a.witness_value > 1.0
    assert abs(a.witness_point[1]) < 0.01


def test_condition_suite_needs_a_2d_cut_map():
    lor = build_model({"model": "lorenz", "params": {}})
    with pytest.raises(ConfigError):
        check_lorenz_conditions(lor)


def test_grid_refinement_never_lowers_a_sup():
    gl = build_model({"model": "geometric_lorenz", "params": {}})
    coarse = check_lorenz_conditions(gl, grid=GridSpec(points_per_axis=9))
    fine = check_lorenz_conditions(
        gl, grid=GridSpec(points_per_axis=9).refine().refine())
    for name, c in _by_name(coarse).items():
        if name == "product_gap":
            continue  # threshold moves too; compare raw sups only
        assert _by_name(fine)[name].witness_value >= c.witness_value - 1e-15


# ---------------------------------------------------------------------------
# compute_q


def test_compute_q_variants_and_errors():
    pl = build_model({"model": "pl_lorenz", "params": {}})
    rep = check_lorenz_conditions(pl)
    with pytest.raises(ConfigError):
        compute_q(rep, variant="cubed")
    bad = check_lorenz_conditions(_narrow_band_violator())
    with pytest.raises(ValueError):
        compute_q(bad)


@given(st.floats(min_value=0.01, max_value=0.9),
       st.floats(min_value=0.01, max_value=0.9),
       st.floats(min_value=0.0, max_value=0.2),
       st.floats(min_value=0.0, max_value=0.2))
def test_q_exceeds_one_whenever_the_inequalities_hold(a, v, c, m):
    # build a fake passing report through the pl benchmark's shape
    from attractorlab.verify import ConditionReport, ConditionResult
    bval = v * a + 2.0 * np.sqrt(v * c * m)
    holds = a < 1 and v < 1 and bval < 1 and c * m < (1 - a) * (1 - v)
    if not holds:
        return
    conds = [
        ConditionResult("x_contraction", True, a, threshold=1.0),
        ConditionResult("cross_term_gap", True, float(bval), threshold=1.0),
        ConditionResult("y_expansion", True, v, threshold=1.0),
        ConditionResult("product_gap", True, c * m,
                        threshold=(1 - a) * (1 - v)),
    ]
    rep = ConditionReport("lorenz_conditions", conds, {},
                          derived={"norms": {"fx": a, "gy_inv": v,
                                             "gx": c, "gy_inv_fy": m}})
    assert compute_q(rep) > 1.0
    assert compute_q(rep, variant="squared") > 1.0


def test_inconsistent_norms_raise():
    from attractorlab.verify import ConditionReport, ConditionResult
    # radicand 1 - v^2 a - 4vcm < 0 while the flags (wrongly) claim a pass
    norms = {"fx": 0.99, "gy_inv": 0.99, "gx": 0.3, "gy_inv_fy": 0.3}
    conds = [ConditionResult(n, True, 0.0, threshold=1.0)
             for n in ("x_contraction", "cross_term_gap", "y_expansion",
                       "product_gap")]
    rep = ConditionReport("lorenz_conditions", conds, {},
                          derived={"norms": norms})
    with pytest.raises(ConditionInconsistencyError):
        compute_q(rep)


# ---------------------------------------------------------------------------
# Saddle-focus exponent gap


def test_saddle_focus_verdicts():
    good = check_saddle_focus_gap(
        {"gamma": 1.0, "lambda": 0.3, "omega": 2.0, "alphas": [0.8]})
    assert good.passed
    assert good.derived["rho"] == pytest.approx(0.3)
    shallow = check_saddle_focus_gap(
        {"gamma": 1.0, "lambda": 0.6, "omega": 2.0})
    conds = _by_name(shallow)
    assert not conds["gap_exceeds_double"].holds
    assert not conds["index_below_half"].holds
    no_twist = check_saddle_focus_gap(
        {"gamma": 1.0, "lambda": 0.3, "omega": 0.0})
    assert not _by_name(no_twist)["nonzero_twist"].holds


# ---------------------------------------------------------------------------
# Pseudo-hyperbolicity (3D cut map)


def test_wild_defaults_pass_all_six():
    rep = check_pseudohyperbolic(make_wild_map(WildMapParams()))
    assert rep.passed
    conds = _by_name(rep)
    assert set(conds) == {
        "xphi_block_invertible", "locus_limits_vanish", "foliation_gap",
        "fiber_contraction", "holder_bounds", "quotient_area_expansion"}
    assert conds["locus_limits_vanish"].witness_value < 1e-3


def test_slow_locus_decay_is_caught():
    rep = check_pseudohyperbolic(make_wild_map(WildMapParams(eta=0.5)))
    assert not rep.passed
    conds = _by_name(rep)
    assert not conds["locus_limits_vanish"].holds
    failing = {n for n, c in conds.items() if not c.holds}
    assert failing == {"locus_limits_vanish"}


def test_weak_fiber_rates_break_the_gap():
    rep = check_pseudohyperbolic(
        make_wild_map(WildMapParams(cz=0.05, dz=0.95)))
    assert not rep.passed
    conds = _by_name(rep)
    assert not conds["foliation_gap"].holds
    assert conds["fiber_contraction"].holds  # 0.95 still contracts


def test_beta_must_sit_between_the_exponents():
    wild = make_wild_map(WildMapParams())
    with pytest.raises(ConfigError):
        check_pseudohyperbolic(wild, beta=0.2)  # below rho = 0.4


def test_pseudohyperbolic_needs_a_locus():
    cat = build_model({"model": "cat_map", "params": {}})
    with pytest.raises(ConfigError):
        check_pseudohyperbolic(cat)


def test_singular_graph_block_is_reported():
    from attractorlab.verify import block_derivatives

    def step(s):
        s = np.asarray(s, dtype=float)
        # constant phi image makes the leading (x, phi) block singular
        return np.stack([0.5 * s[..., 0], np.ones_like(s[..., 1]),
                         0.3 * s[..., 2]], axis=-1)

    def jac(s):
        J = np.zeros(np.shape(s)[:-1] + (3, 3))
        J[..., 0, 0] = 0.5
        J[..., 2, 2] = 0.3
        return J

    model = SystemModel(
        name="flat_phi", kind="map", dim=3, params={},
        domain=Domain.product([(-1, 1), (0, 2 * np.pi), (-1, 1)],
                              [False, True, False], [1.0, 2 * np.pi, 1.0]),
        step_fn=step, jacobian=jac, vectorized=True,
        locus=Locus(distance=lambda s: np.abs(np.asarray(s)[..., 0])),
        structure={"graph_block": 2, "rho": 0.4, "eta": 1.0,
                   "locus_coord": 0})
    with pytest.raises(SingularBlockError):
        block_derivatives(model, np.array([0.5, 1.0, 0.2]))
    # the grid check degrades to a failed invertibility verdict instead
    rep = check_pseudohyperbolic(model)
    assert not rep.passed
    assert not _by_name(rep)["xphi_block_invertible"].holds
