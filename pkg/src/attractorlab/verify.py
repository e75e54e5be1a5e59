"""Sampled verification of hyperbolicity-style inequalities.

Sup-norms are estimated over a tensor grid that excludes a thin band
around the map's singularity locus, augmented with geometric sheets
|locus-coord| = 2^-k that approach the cut.  Results are evidence, not
proof: every report records the grid it used, and every failed condition
carries a concrete witness point.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .core import SystemModel
from .errors import ConditionInconsistencyError, ConfigError, SingularBlockError

__all__ = [
    "GridSpec", "ConditionResult", "ConditionReport", "BlockDerivatives",
    "check_anosov_matrix", "check_expansion", "check_lorenz_conditions",
    "compute_q", "check_saddle_focus_gap", "block_derivatives",
    "check_pseudohyperbolic",
]

MARGIN = 1e-6
UNIT_CIRCLE_TOL = 1e-9
DET_FLOOR = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Sampling plan for sup estimates.

    points_per_axis counts the level-0 grid; each refinement level nests
    the previous grid exactly (bounded axes keep endpoints and go from n
    to 2n-1 points, periodic axes double), so sampled sups are
    non-decreasing under refinement.  locus_depth sheets at distance 2^-k
    from the cut feed limit checks and catch near-cut blowups.
    """

    points_per_axis: int = 33
    delta: float = 1e-4
    locus_depth: int = 40
    sheet_points: int = 9
    level: int = 0

    def refine(self) -> "GridSpec":
        return dataclasses.replace(self, level=self.level + 1)

    def axis_count(self, periodic: bool, coarse: bool = False) -> int:
        n = self.sheet_points if coarse else self.points_per_axis
        if periodic:
            return n * 2 ** self.level
        return (n - 1) * 2 ** self.level + 1

    def meta(self) -> dict:
        return {"n": self.points_per_axis, "delta": self.delta,
                "level": self.level, "locus_depth": self.locus_depth,
                "sheet_points": self.sheet_points}


def _axis_points(model: SystemModel, i: int, grid: GridSpec,
                 coarse: bool = False) -> np.ndarray:
    dom = model.domain
    if dom.periodic[i]:
        n = grid.axis_count(True, coarse)
        return np.linspace(0.0, dom.period[i], n, endpoint=False)
    lo, hi = dom.lower[i], dom.upper[i]
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ConfigError(f"grid sampling needs finite bounds on axis {i}")
    return np.linspace(lo, hi, grid.axis_count(False, coarse))


def _product(axes: list[np.ndarray]) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def condition_samples(model: SystemModel, grid: GridSpec
                      ) -> tuple[np.ndarray, list[tuple[int, np.ndarray]]]:
    """Bulk sample points plus locus-approach sheets.

    Returns (points, sheets) where sheets is a list of (k, pts) with the
    locus coordinate at +/- 2^-k.  Bulk points exclude |locus| < delta;
    sup estimates should combine both, limits use the sheets alone.
    """
    lc = model.structure.get("locus_coord")
    pts = _product([_axis_points(model, i, grid) for i in range(model.dim)])
    sheets: list[tuple[int, np.ndarray]] = []
    if lc is None:
        return pts, sheets
    pts = pts[np.abs(pts[:, lc]) >= grid.delta]
    others = [_axis_points(model, i, grid, coarse=True)
              for i in range(model.dim) if i != lc]
    base = _product(others) if others else np.zeros((1, 0))
    lo, hi = model.domain.lower[lc], model.domain.upper[lc]
    for k in range(1, grid.locus_depth + 1):
        vals = [v for v in (2.0 ** -k, -(2.0 ** -k)) if lo < v < hi]
        rows = []
        for v in vals:
            block = np.insert(base, lc, v, axis=1)
            rows.append(block)
        if rows:
            sheets.append((k, np.concatenate(rows, axis=0)))
    return pts, sheets


def _sample_jacobians(model: SystemModel, pts: np.ndarray,
                      fd_scale: float = 1e-6) -> np.ndarray:
    """Jacobians at many points; finite differences cap the step near the cut."""
    if model.jacobian is not None:
        if model.vectorized:
            return np.asarray(model.jacobian(pts))
        return np.stack([np.asarray(model.jacobian(p)) for p in pts])
    f = model.step_fn if model.kind == "map" else model.rhs
    if not model.vectorized:
        raise ConfigError("finite-difference sampling needs a vectorized model")
    pts = np.asarray(pts, dtype=float)
    n, d = pts.shape
    lc = model.structure.get("locus_coord")
    J = np.empty((n, d, d))
    for j in range(d):
        h = fd_scale * np.maximum(1.0, np.abs(pts[:, j]))
        if lc is not None and j == lc:
            # one-branch differencing: never step across the cut
            h = np.minimum(h, np.abs(pts[:, lc]) / 8.0)
        e = np.zeros(d)
        e[j] = 1.0
        fp = np.asarray(f(pts + h[:, None] * e))
        fm = np.asarray(f(pts - h[:, None] * e))
        diff = model.domain.wrapped_delta(fp, fm) if model.kind == "map" else fp - fm
        J[:, :, j] = diff / (2.0 * h[:, None])
    return J


def _opnorm(M: np.ndarray) -> np.ndarray:
    return np.linalg.svd(M, compute_uv=False)[..., 0]


# ---------------------------------------------------------------------------
# Reports


@dataclass
class ConditionResult:
    condition: str
    holds: bool
    witness_value: float
    threshold: float | None = None
    witness_point: list | None = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"condition": self.condition, "holds": bool(self.holds),
                "witness_value": _jsonable(self.witness_value),
                "threshold": _jsonable(self.threshold),
                "witness_point": _jsonable(self.witness_point),
                "detail": _jsonable(self.detail)}


@dataclass
class ConditionReport:
    name: str
    conditions: list[ConditionResult]
    grid: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.conditions)

    def find(self, condition: str) -> ConditionResult:
        for c in self.conditions:
            if c.condition == condition:
                return c
        raise KeyError(condition)

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "grid": self.grid,
                "derived": _jsonable(self.derived),
                "conditions": [c.to_json() for c in self.conditions]}


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _point(pts, idx) -> list:
    return [float(x) for x in np.atleast_2d(pts)[idx]]


# ---------------------------------------------------------------------------
# Linear torus maps


def check_anosov_matrix(A) -> ConditionReport:
    """Integer entries, |det| = 1, and spectrum off the unit circle."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError("matrix must be square")
    integral = bool(np.all(A == np.rint(A)))
    det = float(np.linalg.det(A))
    unimodular = bool(abs(abs(det) - 1.0) < 0.5)  # integer det, so exact
    eigs = np.linalg.eigvals(A)
    gaps = np.abs(np.abs(eigs) - 1.0)
    i = int(np.argmin(gaps))
    off_circle = bool(gaps[i] > UNIT_CIRCLE_TOL)
    conds = [
        ConditionResult("integer_entries", integral,
                        float(np.max(np.abs(A - np.rint(A))))),
        ConditionResult("unimodular", unimodular, abs(det), threshold=1.0),
        ConditionResult("spectrum_off_unit_circle", off_circle,
                        float(gaps[i]), threshold=UNIT_CIRCLE_TOL,
                        detail={"closest_eigenvalue": [eigs[i].real, eigs[i].imag]}),
    ]
    return ConditionReport(
        "anosov_matrix", conds,
        derived={"det": det,
                 "eigenvalues": [[e.real, e.imag] for e in eigs],
                 "moduli": sorted(float(a) for a in np.abs(eigs))})


def check_expansion(model: SystemModel, grid: GridSpec = GridSpec()
                    ) -> ConditionReport:
    """sup of the inverse-derivative norm over the grid; holds iff < 1."""
    if model.kind != "map":
        raise ConfigError("expansion check applies to maps")
    pts, sheets = condition_samples(model, grid)
    if sheets:
        pts = np.concatenate([pts] + [s for _, s in sheets], axis=0)
    lift_deriv = model.structure.get("lift_deriv")
    if model.dim == 1 and lift_deriv is not None:
        slopes = np.abs(np.asarray(lift_deriv(pts[:, 0])))
        with np.errstate(divide="ignore"):
            inv = np.where(slopes > 0, 1.0 / slopes, np.inf)
    else:
        J = _sample_jacobians(model, pts)
        smin = np.linalg.svd(J, compute_uv=False)[..., -1]
        with np.errstate(divide="ignore"):
            inv = np.where(smin > 0, 1.0 / smin, np.inf)
    i = int(np.argmax(inv))
    sup = float(inv[i])
    res = ConditionResult("uniform_expansion", bool(sup < 1.0 - MARGIN), sup,
                          threshold=1.0 - MARGIN, witness_point=_point(pts, i))
    return ConditionReport("expansion", [res], grid.meta(),
                           derived={"sup_inverse_derivative": sup})


# ---------------------------------------------------------------------------
# Two-branch return-map conditions


def check_lorenz_conditions(model: SystemModel, grid: GridSpec = GridSpec(),
                            margin: float = MARGIN) -> ConditionReport:
    """Contraction/expansion inequalities for a cut 2D return map.

    With the map written (x, y) -> (f(x, y), g(x, y)) and the cut along
    {y = 0}, checks
      (a) sup|f_x| < 1
      (b) sup(1/|g_y|) sup|f_x| + 2 sqrt(sup(1/|g_y|) sup|g_x| sup|f_y/g_y|) < 1
      (c) sup(1/|g_y|) < 1
      (d) sup|f_y/g_y| sup|g_x| < (1 - sup|f_x|)(1 - sup(1/|g_y|))
    over the cut domain, locus sheets included.
    """
    if model.dim != 2 or model.structure.get("locus_coord") != 1:
        raise ConfigError("condition suite expects a 2D map cut along {y = 0}")
    pts, sheets = condition_samples(model, grid)
    if sheets:
        pts = np.concatenate([pts] + [s for _, s in sheets], axis=0)
    J = _sample_jacobians(model, pts)
    fx, fy = np.abs(J[:, 0, 0]), J[:, 0, 1]
    gx, gy = np.abs(J[:, 1, 0]), J[:, 1, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        gy_inv = np.where(np.abs(gy) > 0, 1.0 / np.abs(gy), np.inf)
        comp = np.where(np.abs(gy) > 0, np.abs(fy / gy), np.inf)

    ia, ic = int(np.argmax(fx)), int(np.argmax(gy_inv))
    ig, im = int(np.argmax(gx)), int(np.argmax(comp))
    Fx, Gyi = float(fx[ia]), float(gy_inv[ic])
    Gx, Comp = float(gx[ig]), float(comp[im])

    a = ConditionResult("x_contraction", bool(Fx < 1.0 - margin), Fx,
                        threshold=1.0 - margin, witness_point=_point(pts, ia))
    bval = Gyi * Fx + 2.0 * np.sqrt(Gyi * Gx * Comp)
    b = ConditionResult("cross_term_gap", bool(bval < 1.0 - margin), float(bval),
                        threshold=1.0 - margin,
                        witness_point=_point(pts, im if Gx * Comp > 0 else ia))
    c = ConditionResult("y_expansion", bool(Gyi < 1.0 - margin), Gyi,
                        threshold=1.0 - margin, witness_point=_point(pts, ic))
    dthr = (1.0 - Fx) * (1.0 - Gyi) - margin
    dval = Comp * Gx
    d = ConditionResult("product_gap",
                        bool(Fx < 1.0 and Gyi < 1.0 and dval < dthr),
                        float(dval), threshold=float(dthr),
                        witness_point=_point(pts, im))
    norms = {"fx": Fx, "gy_inv": Gyi, "gx": Gx, "gy_inv_fy": Comp}
    report = ConditionReport("lorenz_conditions", [a, b, c, d],
                             grid.meta(), derived={"norms": norms})
    if report.passed:
        report.derived["q"] = compute_q(report)
        report.derived["q_squared_variant"] = compute_q(report, variant="squared")
    return report


def compute_q(report: ConditionReport, variant: str = "printed") -> float:
    """Saddle coefficient from the four sup-norms of a passing report.

    The printed radicand is 1 - v^2 a - 4 v c m with a = sup|f_x|,
    v = sup(1/|g_y|), c = sup|g_x|, m = sup|f_y/g_y|; the "squared"
    variant uses v^2 a^2 for the middle term.  Both exceed 1 whenever
    the four inequalities hold strictly.
    """
    if variant not in ("printed", "squared"):
        raise ConfigError(f"unknown variant {variant!r}")
    norms = report.derived.get("norms")
    if norms is None:
        raise ValueError("report carries no sup-norms")
    if not report.passed:
        raise ValueError("q is defined only when all four conditions hold")
    a, v = norms["fx"], norms["gy_inv"]
    c, m = norms["gx"], norms["gy_inv_fy"]
    mid = v * v * (a if variant == "printed" else a * a)
    radicand = 1.0 - mid - 4.0 * v * c * m
    if radicand < 0:
        raise ConditionInconsistencyError(
            f"negative radicand {radicand}: sup-norm set is inconsistent "
            "with the cross-term inequality")
    q = (1.0 + a * v + np.sqrt(radicand)) / (2.0 * v)
    if q <= 1.0:
        raise ConditionInconsistencyError(
            f"q = {q} <= 1 despite all conditions holding")
    return float(q)


def check_saddle_focus_gap(exponents: dict) -> ConditionReport:
    """Ordering, nonzero twist, and the 2:1 expansion gap for a saddle focus.

    exponents: {"gamma": unstable rate, "lambda": leading stable rate,
    "omega": twist frequency, "alphas": remaining stable rates (real parts)}.
    """
    gamma = float(exponents["gamma"])
    lam = float(exponents["lambda"])
    omega = float(exponents["omega"])
    alphas = [float(a) for a in exponents.get("alphas", ())]
    ordering = gamma > 0 and 0 < lam and all(lam < a for a in alphas)
    rho = lam / gamma if gamma > 0 else np.inf
    conds = [
        ConditionResult("exponent_ordering", bool(ordering),
                        min([lam] + [a - lam for a in alphas] + [gamma]),
                        threshold=0.0,
                        detail={"gamma": gamma, "lambda": lam, "alphas": alphas}),
        ConditionResult("nonzero_twist", bool(omega != 0.0), abs(omega),
                        threshold=0.0),
        ConditionResult("gap_exceeds_double", bool(gamma > 2.0 * lam),
                        2.0 * lam, threshold=gamma),
        ConditionResult("index_below_half", bool(rho < 0.5), float(rho),
                        threshold=0.5),
    ]
    return ConditionReport("saddle_focus_gap", conds, derived={"rho": float(rho)})


# ---------------------------------------------------------------------------
# Graph-transform block conditions


@dataclass(frozen=True)
class BlockDerivatives:
    """Schur-style blocks of the derivative at a point off the cut.

    With the map split as (graph coords) = g(.), (fiber coords) = f(.):
      A = df/dz - df/dw (dg/dw)^-1 dg/dz      (effective fiber derivative)
      B = df/dw (dg/dw)^-1
      C = (dg/dw)^-1 dg/dz
      D = (dg/dw)^-1
    where w is the graph block and z the fiber block.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x: float


def _blocks(model: SystemModel, pts: np.ndarray
            ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Batched (A, B, C, D, det_gw) at pts."""
    gdim = model.structure.get("graph_block")
    if gdim is None:
        raise ConfigError("model does not declare a graph/fiber split")
    J = _sample_jacobians(model, np.atleast_2d(pts))
    Jgw = J[:, :gdim, :gdim]
    Jgz = J[:, :gdim, gdim:]
    Jfw = J[:, gdim:, :gdim]
    Jfz = J[:, gdim:, gdim:]
    det = np.linalg.det(Jgw)
    ok = np.abs(det) > DET_FLOOR
    D = np.full_like(Jgw, np.nan)
    if ok.any():
        D[ok] = np.linalg.inv(Jgw[ok])
    B = Jfw @ D
    C = D @ Jgz
    A = Jfz - B @ Jgz
    return A, B, C, D, det


def block_derivatives(model: SystemModel, s) -> BlockDerivatives:
    s = np.asarray(s, dtype=float)
    lc = model.structure.get("locus_coord", 0)
    A, B, C, D, det = _blocks(model, s[None, :])
    if abs(det[0]) <= DET_FLOOR:
        raise SingularBlockError(s.tolist(), float(det[0]))
    return BlockDerivatives(A[0], B[0], C[0], D[0], float(s[lc]))


def check_pseudohyperbolic(model: SystemModel, grid: GridSpec = GridSpec(),
                           beta: float | None = None,
                           limit_tol: float = 1e-3,
                           margin: float = MARGIN) -> ConditionReport:
    """Invariant-foliation block conditions for a cut graph/fiber map.

    Sup conditions sample the grid plus the locus sheets; the two limit
    conditions walk |x| = 2^-k, k = 1..20, and require monotone decay to
    below limit_tol.  Boundedness of the beta-weighted blocks is tested
    along the full sheet sequence: the deep-tail maximum must not exceed
    the shallow-half maximum by more than 5%.
    """
    rho = model.structure.get("rho")
    eta = model.structure.get("eta")
    if beta is None:
        if rho is None or eta is None:
            raise ConfigError("beta is required when the model declares no "
                              "spiral exponents")
        beta = 0.5 * (rho + eta)
    if rho is not None and eta is not None and not (rho < beta < eta):
        raise ConfigError(f"beta must lie in ({rho}, {eta}), got {beta}")

    pts, sheets = condition_samples(model, grid)
    if not sheets:
        raise ConfigError("pseudo-hyperbolicity check needs a locus")
    bulk = np.concatenate([pts] + [s for _, s in sheets], axis=0)
    A, B, C, D, det = _blocks(model, bulk)

    imin = int(np.argmin(np.abs(det)))
    ct0 = ConditionResult("xphi_block_invertible",
                          bool(np.abs(det[imin]) > DET_FLOOR),
                          float(np.abs(det[imin])), threshold=DET_FLOOR,
                          witness_point=_point(bulk, imin))
    ok = np.abs(det) > DET_FLOOR
    if not ok.any():
        # singular everywhere: nothing left to bound, report ct0 alone
        return ConditionReport("pseudo_hyperbolicity", [ct0], grid.meta(),
                               derived={"beta": float(beta)})
    nA, nB = _opnorm(A[ok]), _opnorm(B[ok])
    nC, nD = _opnorm(C[ok]), _opnorm(D[ok])
    good = bulk[ok]
    detD = 1.0 / np.abs(det[ok])

    supB, supC = float(np.max(nB)), float(np.max(nC))
    cross = float(np.sqrt(supB * supC))

    i2 = int(np.argmax(nA * nD))
    v2 = float(np.sqrt(nA[i2] * nD[i2]) + cross)
    ct2 = ConditionResult("foliation_gap", bool(v2 < 1.0 - margin), v2,
                          threshold=1.0 - margin, witness_point=_point(good, i2),
                          detail={"sup_sqrt_AD": float(np.sqrt(nA[i2] * nD[i2])),
                                  "cross_term": cross})
    i3 = int(np.argmax(nA))
    v3 = float(nA[i3] + cross)
    ct3 = ConditionResult("fiber_contraction", bool(v3 < 1.0 - margin), v3,
                          threshold=1.0 - margin, witness_point=_point(good, i3),
                          detail={"sup_A": float(nA[i3]), "cross_term": cross})
    i5 = int(np.argmax(detD))
    v5 = float(np.sqrt(detD[i5]) + cross)
    ct5 = ConditionResult("quotient_area_expansion", bool(v5 < 1.0 - margin),
                          v5, threshold=1.0 - margin,
                          witness_point=_point(good, i5),
                          detail={"sup_sqrt_detD": float(np.sqrt(detD[i5])),
                                  "cross_term": cross})

    # limit and boundedness sequences along the sheets
    seq, seq_detail = [], {"k": [], "AD": [], "C": []}
    wA, wD, wB, wC = [], [], [], []
    for k, sp in sheets:
        Ak, Bk, Ck, Dk, detk = _blocks(model, sp)
        okk = np.abs(detk) > DET_FLOOR
        if not okk.all():
            seq.append(np.inf)
            continue
        a, b = _opnorm(Ak), _opnorm(Bk)
        c, d = _opnorm(Ck), _opnorm(Dk)
        x = 2.0 ** -k
        if k <= 20:
            seq_detail["k"].append(k)
            seq_detail["AD"].append(float(np.max(a * d)))
            seq_detail["C"].append(float(np.max(c)))
            seq.append(max(np.max(a * d), np.max(c)))
        wA.append(float(np.max(a)) * x ** -beta)
        wD.append(float(np.max(d)) * x ** beta)
        wB.append(float(np.max(b)))
        wC.append(float(np.max(c)))
    seq = np.asarray(seq)
    monotone = bool(np.all(np.diff(seq) <= 1e-12))
    ct1 = ConditionResult("locus_limits_vanish",
                          bool(monotone and seq[-1] < limit_tol),
                          float(seq[-1]), threshold=limit_tol,
                          detail={**seq_detail, "monotone": monotone})

    bounded, ratios = True, {}
    for name, w in (("A_scaled", wA), ("D_scaled", wD), ("B", wB), ("C", wC)):
        w = np.asarray(w)
        half = max(1, len(w) // 2)
        head, tail = float(np.max(w[:half])), float(np.max(w[half:]))
        r = tail / head if head > 0 else (0.0 if tail == 0 else np.inf)
        ratios[name] = {"head_max": head, "tail_max": tail, "ratio": r}
        bounded &= tail <= 1.05 * head + 1e-12
    ct4 = ConditionResult("holder_bounds", bool(bounded),
                          float(max(v["ratio"] for v in ratios.values())),
                          threshold=1.05,
                          detail={"beta": float(beta), "sequences": ratios,
                                  "note": "boundedness only; continuity "
                                          "modulus not sampled"})

    return ConditionReport(
        "pseudo_hyperbolicity", [ct0, ct1, ct2, ct3, ct4, ct5], grid.meta(),
        derived={"beta": float(beta), "sup_B": supB, "sup_C": supC})
