"""Built-in model constructors.

Every constructor returns a vectorized SystemModel with an analytic
Jacobian where the parameterization permits one.  Callables accept states
of shape (..., dim).
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .core import Domain, Locus, SystemModel
from .errors import ConfigError

__all__ = [
    "LorenzParams", "SaddleNodeParams", "SolidTorusParams",
    "GeomLorenzParams", "WildMapParams", "TrigPerturbation",
    "sine_perturbation", "make_lorenz", "make_saddle_node_flow",
    "make_torus_automorphism", "make_torus_endomorphism",
    "make_circle_family", "make_solid_torus_map", "make_geometric_lorenz",
    "make_pl_lorenz", "make_wild_map", "build_model", "MODEL_NAMES",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TrigPerturbation:
    """amplitude * sin(2 pi harmonic * t + phase) + offset.

    One-periodic with closed-form derivative and C1 bounds, so theorem
    hypotheses that need sup|g| and sup|g'| can be certified without
    sampling error.
    """

    amplitude: float = 0.0
    harmonic: int = 1
    phase: float = 0.0
    offset: float = 0.0

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(TWO_PI * self.harmonic * t + self.phase)

    def deriv(self, t):
        w = TWO_PI * self.harmonic
        return self.amplitude * w * np.cos(w * t + self.phase)

    def c1_bounds(self) -> tuple[float, float]:
        """(sup|g|, sup|g'|) over one period."""
        return (abs(self.offset) + abs(self.amplitude),
                abs(self.amplitude) * TWO_PI * abs(self.harmonic))


def sine_perturbation(amplitude: float, harmonic: int = 1,
                      phase: float = 0.0) -> TrigPerturbation:
    return TrigPerturbation(amplitude, harmonic, phase)


def _as_handle(value) -> Callable | None:
    """Wrap scalars as constant callables; pass callables through."""
    if value is None or callable(value):
        return value
    c = float(value)
    return lambda *args: c


# ---------------------------------------------------------------------------
# Lorenz flow


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    r: float = 28.0
    b: float = 8.0 / 3.0


def make_lorenz(p: LorenzParams = LorenzParams()) -> SystemModel:
    """Classic three-variable convection flow.

    Divergence is constant, -(sigma + 1 + b), and the equations commute
    with (x, y, z) -> (-x, -y, z); both facts are recorded in ``structure``
    for verification tests.
    """
    sigma, r, b = p.sigma, p.r, p.b

    def rhs(s):
        x, y, z = s[..., 0], s[..., 1], s[..., 2]
        return np.stack([sigma * (y - x), r * x - y - x * z, x * y - b * z], axis=-1)

    def jac(s):
        x, y, z = s[..., 0], s[..., 1], s[..., 2]
        J = np.zeros(np.shape(s)[:-1] + (3, 3))
        J[..., 0, 0] = -sigma
        J[..., 0, 1] = sigma
        J[..., 1, 0] = r - z
        J[..., 1, 1] = -1.0
        J[..., 1, 2] = -x
        J[..., 2, 0] = y
        J[..., 2, 1] = x
        J[..., 2, 2] = -b
        return J

    equilibria = [np.zeros(3)]
    if r > 1:
        w = np.sqrt(b * (r - 1))
        equilibria += [np.array([w, w, r - 1]), np.array([-w, -w, r - 1])]

    return SystemModel(
        name="lorenz", kind="flow", dim=3,
        params={"sigma": sigma, "r": r, "b": b},
        domain=Domain.box([(-np.inf, np.inf)] * 3),
        rhs=rhs, jacobian=jac, vectorized=True,
        structure={
            "divergence": -(sigma + 1.0 + b),
            "symmetry": lambda s: np.asarray(s) * np.array([-1.0, -1.0, 1.0]),
            "equilibria": equilibria,
            # default box for cell-graph analyses; covers the attractor at
            # the classic parameters
            "cell_box": ((-25.0, 25.0), (-25.0, 25.0), (0.0, 50.0)),
        })


# ---------------------------------------------------------------------------
# Saddle-node normal-form flow


@dataclass(frozen=True)
class SaddleNodeParams:
    """dy = C y, dz = mu + z^2, dtheta = Omega; theta components are angular."""

    mu: float = 0.01
    C: tuple = ()        # square matrix (rows) or () for no y block
    Omega: tuple = ()    # angular speeds, () for no theta block


def make_saddle_node_flow(p: SaddleNodeParams = SaddleNodeParams()) -> SystemModel:
    C = np.atleast_2d(np.asarray(p.C, dtype=float)) if len(p.C) else np.zeros((0, 0))
    if C.size and C.shape[0] != C.shape[1]:
        raise ConfigError("C must be square")
    if C.size:
        ev = np.linalg.eigvals(C)
        if np.max(ev.real) >= 0:
            raise ConfigError(f"C must be strictly stable, eigenvalue real parts {ev.real}")
    Omega = np.asarray(p.Omega, dtype=float)
    ny, nth = C.shape[0], Omega.size
    dim = ny + 1 + nth
    zi = ny  # index of the slow coordinate
    mu = float(p.mu)

    def rhs(s):
        out = np.empty_like(np.asarray(s, dtype=float))
        if ny:
            out[..., :ny] = np.einsum("ij,...j->...i", C, s[..., :ny])
        out[..., zi] = mu + s[..., zi] ** 2
        if nth:
            out[..., zi + 1:] = Omega
        return out

    def jac(s):
        J = np.zeros(np.shape(s)[:-1] + (dim, dim))
        if ny:
            J[..., :ny, :ny] = C
        J[..., zi, zi] = 2.0 * s[..., zi]
        return J

    bounds = [(-np.inf, np.inf)] * (ny + 1) + [(0.0, 1.0)] * nth
    periodic = [False] * (ny + 1) + [True] * nth
    return SystemModel(
        name="saddle_node", kind="flow", dim=dim,
        params={"mu": mu, "C": C.tolist(), "Omega": Omega.tolist()},
        domain=Domain.product(bounds, periodic, [1.0] * dim),
        rhs=rhs, jacobian=jac, vectorized=True,
        structure={"z_index": zi})


# ---------------------------------------------------------------------------
# Torus maps


def _check_integer_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError("matrix must be square")
    if not np.allclose(A, np.rint(A)):
        raise ConfigError("matrix entries must be integers")
    return np.rint(A)


def make_torus_automorphism(A) -> SystemModel:
    """theta -> A theta (mod 1) with integer A, |det A| = 1."""
    A = _check_integer_matrix(A)
    det = round(float(np.linalg.det(A)))
    if abs(det) != 1:
        raise ConfigError(f"automorphism needs |det A| = 1, got {det}")
    return _linear_torus_model("torus_automorphism", A)


def make_torus_endomorphism(A, g: Callable | None = None,
                            omega=None) -> SystemModel:
    """theta -> A theta + g(theta) + omega (mod 1), integer A, |det A| >= 1."""
    A = _check_integer_matrix(A)
    det = round(float(np.linalg.det(A)))
    if abs(det) < 1:
        raise ConfigError(f"covering map needs |det A| >= 1, got {det}")
    return _linear_torus_model("torus_endomorphism", A, g, omega)


def _linear_torus_model(name, A, g=None, omega=None) -> SystemModel:
    k = A.shape[0]
    w = np.zeros(k) if omega is None else np.broadcast_to(
        np.asarray(omega, dtype=float), (k,)).copy()

    if g is None:
        At = A.T.astype(float)

        def step(s):
            return s @ At + w

        def jac(s):
            return np.broadcast_to(A, np.shape(s)[:-1] + (k, k)).copy()
        jacobian = jac
    else:
        def step(s):
            return np.einsum("ij,...j->...i", A, s) + np.asarray(g(s)) + w
        jacobian = None  # finite differences for custom perturbations

    return SystemModel(
        name=name, kind="map", dim=k,
        params={"matrix": A.astype(int).tolist(), "omega": w.tolist()},
        domain=Domain.torus(k),
        step_fn=step, jacobian=jacobian, vectorized=True,
        structure={"matrix": A, "g": g, "omega": w,
                   "constant_jacobian": g is None})


def make_circle_family(m: int, g: Callable | None = None,
                       omega: float = 0.0) -> SystemModel:
    """theta -> m theta + g(theta) + omega (mod 1) on the circle.

    g must be 1-periodic.  When g is a TrigPerturbation (or exposes
    ``deriv``), the Jacobian and the lift derivative are analytic.
    """
    m = int(m)
    gp = getattr(g, "deriv", None)

    def lift(t):
        t = np.asarray(t, dtype=float)
        base = m * t + omega
        return base + g(t) if g is not None else base

    def step(s):
        s = np.asarray(s, dtype=float)
        th = s[..., 0]
        return lift(th)[..., None]

    jacobian = None
    if g is None or gp is not None:
        def jacobian(s):
            th = np.asarray(s, dtype=float)[..., 0]
            slope = m + (gp(th) if gp is not None else 0.0)
            return np.asarray(slope)[..., None, None] + np.zeros(
                np.shape(s)[:-1] + (1, 1))

    def lift_deriv(t):
        t = np.asarray(t, dtype=float)
        return m + (gp(t) if gp is not None else np.zeros_like(t))

    return SystemModel(
        name="circle", kind="map", dim=1,
        params={"m": m, "omega": float(omega),
                "g": repr(g) if g is not None else None},
        domain=Domain.torus(1),
        step_fn=step, jacobian=jacobian, vectorized=True,
        structure={"m": m, "g": g, "gprime": gp, "omega": float(omega),
                   "lift": lift,
                   "lift_deriv": lift_deriv if (g is None or gp is not None) else None,
                   "expanding_1d": abs(m) >= 2 and g is None,
                   "constant_jacobian": g is None})


# ---------------------------------------------------------------------------
# Solid-torus (solenoid / blue-sky) family


@dataclass(frozen=True)
class SolidTorusParams:
    """Skew map on the solid torus D^2 x S^1, state (x1, x2, theta).

    x_bar     = mu_c x + offset e(2 pi theta) + mu f_pert(x, theta)
    theta_bar = m theta + g(theta) + omega + mu h_pert(x, theta)  (mod 1)

    mu scales the perturbation handles, so their C1 size tends to zero
    with mu; mu_c is the fiber contraction and offset the embedding radius.
    """

    m: int = 2
    omega: float = 0.0
    mu: float = 0.0
    mu_c: float = 0.2
    offset: float = 0.25
    fiber_radius: float = 1.0
    g: TrigPerturbation | None = None
    f_pert: Callable | None = None
    h_pert: Callable | None = None
    pert_amplitude: float = 0.0  # builds default trig f_pert/h_pert when > 0


def _default_f_pert(amp):
    def f(x, th):
        s = np.sin(TWO_PI * th) * amp
        c = np.cos(TWO_PI * th) * amp
        return np.stack([s, c], axis=-1)
    f.theta_deriv = lambda x, th: np.stack(
        [TWO_PI * amp * np.cos(TWO_PI * th), -TWO_PI * amp * np.sin(TWO_PI * th)], axis=-1)
    f.bound = abs(amp)
    return f


def _default_h_pert(amp):
    def h(x, th):
        return amp * np.sin(TWO_PI * th + 1.0)
    h.theta_deriv = lambda x, th: amp * TWO_PI * np.cos(TWO_PI * th + 1.0)
    h.bound = abs(amp)
    return h


def make_solid_torus_map(p: SolidTorusParams = SolidTorusParams()) -> SystemModel:
    if not (0.0 <= p.mu_c < 1.0):
        raise ConfigError(f"fiber contraction mu_c must be in [0, 1), got {p.mu_c}")
    if p.offset <= 0 or p.mu_c * p.fiber_radius + p.offset > p.fiber_radius:
        raise ConfigError("fiber image must stay inside the disk: "
                          "need mu_c * r + offset <= r")
    f_pert = p.f_pert
    h_pert = p.h_pert
    if p.pert_amplitude and f_pert is None:
        f_pert = _default_f_pert(p.pert_amplitude)
    if p.pert_amplitude and h_pert is None:
        h_pert = _default_h_pert(p.pert_amplitude)
    g = p.g
    gp = getattr(g, "deriv", None)
    m, omega, mu, mu_c, off, r = (int(p.m), float(p.omega), float(p.mu),
                                  float(p.mu_c), float(p.offset),
                                  float(p.fiber_radius))

    def step(s):
        s = np.asarray(s, dtype=float)
        x, th = s[..., :2], s[..., 2]
        u = TWO_PI * th
        xb = mu_c * x + off * np.stack([np.cos(u), np.sin(u)], axis=-1)
        if mu and f_pert is not None:
            xb = xb + mu * np.asarray(f_pert(x, th))
        tb = m * th + omega
        if g is not None:
            tb = tb + g(th)
        if mu and h_pert is not None:
            tb = tb + mu * np.asarray(h_pert(x, th))
        return np.concatenate([xb, tb[..., None]], axis=-1)

    analytic = ((f_pert is None or hasattr(f_pert, "theta_deriv"))
                and (h_pert is None or hasattr(h_pert, "theta_deriv"))
                and (g is None or gp is not None))
    jacobian = None
    if analytic:
        def jacobian(s):
            s = np.asarray(s, dtype=float)
            x, th = s[..., :2], s[..., 2]
            u = TWO_PI * th
            J = np.zeros(np.shape(s)[:-1] + (3, 3))
            J[..., 0, 0] = mu_c
            J[..., 1, 1] = mu_c
            dx_dth = off * TWO_PI * np.stack([-np.sin(u), np.cos(u)], axis=-1)
            if mu and f_pert is not None:
                dx_dth = dx_dth + mu * np.asarray(f_pert.theta_deriv(x, th))
            J[..., :2, 2] = dx_dth
            slope = m + (gp(th) if gp is not None else 0.0)
            if mu and h_pert is not None:
                slope = slope + mu * np.asarray(h_pert.theta_deriv(x, th))
            J[..., 2, 2] = slope
            return J

    # reject families whose fiber map is not a contraction
    if mu_c >= 1.0:
        raise ConfigError("sampled fiber derivative must contract")

    return SystemModel(
        name="solid_torus", kind="map", dim=3,
        params={"m": m, "omega": omega, "mu": mu, "mu_c": mu_c,
                "offset": off, "fiber_radius": r,
                "pert_amplitude": float(p.pert_amplitude)},
        domain=Domain.product([(-r, r), (-r, r), (0.0, 1.0)],
                              [False, False, True], [1.0, 1.0, 1.0]),
        step_fn=step, jacobian=jacobian, vectorized=True,
        structure={"m": m, "mu_c": mu_c, "offset": off, "fiber_radius": r,
                   "mu": mu, "g": g, "gprime": gp,
                   "f_bound": mu * getattr(f_pert, "bound", 0.0) if f_pert else 0.0,
                   "h_bound": mu * getattr(h_pert, "bound", 0.0) if h_pert else 0.0,
                   "builtin_fiber": p.f_pert is None})


# ---------------------------------------------------------------------------
# Geometric Lorenz return map


@dataclass(frozen=True)
class GeomLorenzParams:
    """Two-branch return map on {|x| <= 1, |y| < 2} cut along {y = 0}.

    Branch for y > 0:  (x, y) -> (x1s + phi1(x,y) y^a, y1s + psi1(x,y) y^a)
    Branch for y < 0:  (x, y) -> (x2s + phi2(x,y)(-y)^a, y2s + psi2(x,y)(-y)^a)

    a1 and a2 are the separatrix values (the y->0 limits of phi1 and psi2).
    Correction handles default to constants: phi1 = a1, psi2 = a2,
    phi2 = -a1, psi1 = -a2, which makes mirrored separatrix parameters
    (x2s, y2s) = (-x1s, -y1s) commute with the flip (x, y) -> (-x, -y).
    Handles may be floats or callables f(x, y).
    """

    x1s: float = 0.55
    y1s: float = -0.8
    x2s: float = -0.55
    y2s: float = 0.8
    a1: float = 0.4  # small enough that x images clear |x| = 1 with room
    a2: float = -1.8704968956452428  # -2 * 0.8**0.3: branches exactly onto the core
    alpha: float = 0.7
    phi1: object = None
    phi2: object = None
    psi1: object = None
    psi2: object = None

    @classmethod
    def symmetric_full_branch(cls, alpha: float = 0.7, core: float = 0.8,
                              x1s: float = 0.55, a1: float = 0.4) -> "GeomLorenzParams":
        """Symmetric parameters whose 1D section map has exact full branches.

        The y-branch amplitude 2 * core^(1 - alpha) maps (0, core] onto
        (-core, core] exactly; the minimal slope on the core is 2 * alpha,
        so alpha > 1/2 gives uniform expansion.
        """
        amp = 2.0 * core ** (1.0 - alpha)
        return cls(x1s=x1s, y1s=-core, x2s=-x1s, y2s=core,
                   a1=a1, a2=-amp, alpha=alpha)


def make_geometric_lorenz(p: GeomLorenzParams = GeomLorenzParams()) -> SystemModel:
    if not (0.0 < p.alpha < 1.0):
        raise ConfigError(f"alpha must be in (0, 1), got {p.alpha}")
    if p.a1 == 0.0 or p.a2 == 0.0:
        raise ConfigError("separatrix values a1, a2 must be nonzero")
    if not (0.5 <= p.x1s <= 1.0) or not (-1.0 <= p.x2s <= -0.5):
        raise ConfigError("x1s must lie in [1/2, 1] and x2s in [-1, -1/2]")
    if abs(p.y1s) >= 2.0 or abs(p.y2s) >= 2.0:
        raise ConfigError("separatrix y values must satisfy |y| < 2")

    alpha = float(p.alpha)
    phi1 = _as_handle(p.phi1 if p.phi1 is not None else p.a1)
    psi2 = _as_handle(p.psi2 if p.psi2 is not None else p.a2)
    phi2 = _as_handle(p.phi2 if p.phi2 is not None else -p.a1)
    psi1 = _as_handle(p.psi1 if p.psi1 is not None else -p.a2)
    constant = all(v is None for v in (p.phi1, p.phi2, p.psi1, p.psi2))
    c_phi1, c_psi1 = p.a1, -p.a2
    c_phi2, c_psi2 = -p.a1, p.a2

    if constant:
        # branch x images over the section strip must stay inside the square
        hi1 = abs(p.x1s) + abs(c_phi1) * abs(p.y2s) ** alpha
        hi2 = abs(p.x2s) + abs(c_phi2) * abs(p.y1s) ** alpha
        if max(hi1, hi2) > 1.0:
            raise ConfigError(
                f"branch x images reach {max(hi1, hi2):.4f} > 1; shrink a1 "
                "or the separatrix y values so the map sends the square "
                "into itself")

    def branch_plus(x, y):
        w = np.abs(y) ** alpha
        return (p.x1s + phi1(x, y) * w, p.y1s + psi1(x, y) * w)

    def branch_minus(x, y):
        w = np.abs(y) ** alpha
        return (p.x2s + phi2(x, y) * w, p.y2s + psi2(x, y) * w)

    def step(s):
        s = np.asarray(s, dtype=float)
        x, y = s[..., 0], s[..., 1]
        xp, yp = branch_plus(x, y)
        xm, ym = branch_minus(x, y)
        pos = y > 0
        return np.stack([np.where(pos, xp, xm), np.where(pos, yp, ym)], axis=-1)

    jacobian = None
    if constant:
        def jacobian(s):
            s = np.asarray(s, dtype=float)
            y = s[..., 1]
            w = alpha * np.abs(y) ** (alpha - 1.0)
            pos = y > 0
            # d/dy (-y)^alpha = -alpha (-y)^(alpha-1) on y < 0
            J = np.zeros(np.shape(s)[:-1] + (2, 2))
            J[..., 0, 1] = np.where(pos, c_phi1 * w, -c_phi2 * w)
            J[..., 1, 1] = np.where(pos, c_psi1 * w, -c_psi2 * w)
            return J

    if constant:
        def one_d_map(y):
            y = np.asarray(y, dtype=float)
            w = np.abs(y) ** alpha
            return np.where(y > 0, p.y1s + c_psi1 * w, p.y2s + c_psi2 * w)
        def one_d_deriv(y):
            y = np.asarray(y, dtype=float)
            w = alpha * np.abs(y) ** (alpha - 1.0)
            return np.where(y > 0, c_psi1 * w, -c_psi2 * w)
    else:
        one_d_map = one_d_deriv = None

    if p.a1 > 0 and p.a2 > 0:
        case = "orientable"
    elif p.a1 < 0 and p.a2 < 0:
        case = "nonorientable"
    else:
        case = "semiorientable"

    return SystemModel(
        name="geometric_lorenz", kind="map", dim=2,
        params={"x1s": p.x1s, "y1s": p.y1s, "x2s": p.x2s, "y2s": p.y2s,
                "a1": p.a1, "a2": p.a2, "alpha": alpha},
        domain=Domain.box([(-1.0, 1.0), (-2.0, 2.0)]),
        step_fn=step, jacobian=jacobian,
        locus=Locus(lambda s: np.abs(np.asarray(s)[..., 1]), "section cut {y = 0}"),
        vectorized=True,
        structure={"branch_plus": branch_plus, "branch_minus": branch_minus,
                   "section_limits": (p.y1s, p.y2s),
                   "x_limits": (p.x1s, p.x2s),
                   "alpha": alpha, "constant_corrections": constant,
                   "one_d_map": one_d_map, "one_d_deriv": one_d_deriv,
                   "orientation_case": case, "locus_coord": 1})


def make_pl_lorenz(slope_x: float = 0.4, slope_y: float = 2.0,
                   x_off: float = 0.55) -> SystemModel:
    """Piecewise-linear stand-in for the two-branch return map.

    (x, y) -> (slope_x x + sign(y) x_off, slope_y y - sign(y) (slope_y - 1))
    on [-1, 1]^2 cut along {y = 0}.  Constant derivative blocks make every
    sup-norm exact, so this is the closed-form benchmark for the condition
    suite.
    """
    if abs(slope_x) + abs(x_off) > 1.0:
        raise ConfigError("need |slope_x| + |x_off| <= 1 to keep x in [-1, 1]")
    if slope_y <= 1.0:
        raise ConfigError("slope_y must exceed 1")
    c = slope_y - 1.0

    def step(s):
        s = np.asarray(s, dtype=float)
        x, y = s[..., 0], s[..., 1]
        sg = np.sign(y)
        return np.stack([slope_x * x + sg * x_off, slope_y * y - sg * c], axis=-1)

    def jac(s):
        J = np.zeros(np.shape(s)[:-1] + (2, 2))
        J[..., 0, 0] = slope_x
        J[..., 1, 1] = slope_y
        return J

    def one_d_map(y):
        y = np.asarray(y, dtype=float)
        return slope_y * y - np.sign(y) * c

    return SystemModel(
        name="pl_lorenz", kind="map", dim=2,
        params={"slope_x": slope_x, "slope_y": slope_y, "x_off": x_off},
        domain=Domain.box([(-1.0, 1.0), (-1.0, 1.0)]),
        step_fn=step, jacobian=jac,
        locus=Locus(lambda s: np.abs(np.asarray(s)[..., 1]), "section cut {y = 0}"),
        vectorized=True,
        structure={"section_limits": (-c, c), "x_limits": (x_off, -x_off),
                   "one_d_map": one_d_map,
                   "one_d_deriv": lambda y: np.full(np.shape(y), slope_y),
                   "constant_corrections": True, "locus_coord": 1})


# ---------------------------------------------------------------------------
# Spiral-gluing map with a wild attractor


@dataclass(frozen=True)
class WildMapParams:
    """Map on {|x| <= 1} x S^1 x {|z| <= 1}, discontinuous on {x = 0}.

    x_bar   = ax |x|^rho cos(Omega ln|x| + phi)
    phi_bar = aphi |x|^rho sin(Omega ln|x| + phi)      (mod 2 pi)
    z_bar   = (cz + dz z |x|^eta) sign(x)

    rho < 1/2 makes the (x, phi) block expand area near the locus while
    the z fiber contracts; eta > rho controls how fast the fiber coupling
    dies out approaching {x = 0}.
    """

    rho: float = 0.4
    eta: float = 1.0
    ax: float = 0.9
    aphi: float = 3.0
    cz: float = 0.5
    dz: float = 0.1
    Omega: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.rho < 0.5):
            raise ConfigError(f"rho must be in (0, 1/2), got {self.rho}")
        if self.eta <= self.rho:
            raise ConfigError(f"eta must exceed rho, got eta={self.eta} rho={self.rho}")
        if self.ax <= 0 or self.ax > 1.0:
            raise ConfigError("ax must be in (0, 1]")
        if self.cz <= 0 or self.cz + abs(self.dz) > 1.0:
            raise ConfigError("need 0 < cz and cz + |dz| <= 1 to keep |z| <= 1")


def make_wild_map(p: WildMapParams = WildMapParams()) -> SystemModel:
    rho, eta, Om = p.rho, p.eta, p.Omega
    ax, aphi, cz, dz = p.ax, p.aphi, p.cz, p.dz

    def step(s):
        s = np.asarray(s, dtype=float)
        x, phi, z = s[..., 0], s[..., 1], s[..., 2]
        X = np.abs(x)
        sg = np.sign(x)
        u = Om * np.log(X) + phi
        w = X ** rho
        return np.stack([ax * w * np.cos(u), aphi * w * np.sin(u),
                         (cz + dz * z * X ** eta) * sg], axis=-1)

    def jac(s):
        s = np.asarray(s, dtype=float)
        x, phi, z = s[..., 0], s[..., 1], s[..., 2]
        X = np.abs(x)
        sg = np.sign(x)
        u = Om * np.log(X) + phi
        wm1 = X ** (rho - 1.0)
        w = X ** rho
        J = np.zeros(np.shape(s)[:-1] + (3, 3))
        J[..., 0, 0] = ax * wm1 * sg * (rho * np.cos(u) - Om * np.sin(u))
        J[..., 0, 1] = -ax * w * np.sin(u)
        J[..., 1, 0] = aphi * wm1 * sg * (rho * np.sin(u) + Om * np.cos(u))
        J[..., 1, 1] = aphi * w * np.cos(u)
        J[..., 2, 0] = dz * z * eta * X ** (eta - 1.0)
        J[..., 2, 2] = dz * X ** eta * sg
        return J

    return SystemModel(
        name="wild", kind="map", dim=3,
        params={"rho": rho, "eta": eta, "ax": ax, "aphi": aphi,
                "cz": cz, "dz": dz, "Omega": Om},
        domain=Domain.product([(-1.0, 1.0), (0.0, TWO_PI), (-1.0, 1.0)],
                              [False, True, False], [1.0, TWO_PI, 1.0]),
        step_fn=step, jacobian=jac,
        locus=Locus(lambda s: np.abs(np.asarray(s)[..., 0]), "cut {x = 0}"),
        vectorized=True,
        structure={"graph_block": 2, "rho": rho, "eta": eta, "locus_coord": 0})


# ---------------------------------------------------------------------------
# Config registry


def _take(params: dict, allowed: dict):
    """Validate params against allowed {key: default}; reject unknowns."""
    unknown = set(params) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown parameter(s) {sorted(unknown)}; "
                          f"allowed: {sorted(allowed)}")
    merged = dict(allowed)
    merged.update(params)
    return merged


def _build_lorenz(params):
    kw = _take(params, {"sigma": 10.0, "r": 28.0, "b": 8.0 / 3.0})
    return make_lorenz(LorenzParams(**kw))


def _build_saddle_node(params):
    kw = _take(params, {"mu": 0.01, "C": (), "Omega": ()})
    return make_saddle_node_flow(SaddleNodeParams(
        mu=kw["mu"], C=tuple(map(tuple, kw["C"])) if kw["C"] else (),
        Omega=tuple(kw["Omega"])))


def _build_automorphism(params):
    kw = _take(params, {"matrix": [[2, 1], [1, 1]]})
    return make_torus_automorphism(kw["matrix"])


def _build_endomorphism(params):
    kw = _take(params, {"matrix": [[2]], "omega": None})
    return make_torus_endomorphism(kw["matrix"], omega=kw["omega"])


def _build_circle(params):
    kw = _take(params, {"m": 1, "omega": 0.0, "g_amplitude": 0.0,
                        "g_harmonic": 1, "g_phase": 0.0})
    g = None
    if kw["g_amplitude"]:
        g = TrigPerturbation(kw["g_amplitude"], int(kw["g_harmonic"]), kw["g_phase"])
    return make_circle_family(kw["m"], g, kw["omega"])


def _build_doubling(params):
    _take(params, {})
    return make_circle_family(2)


def solid_torus_params(params: dict) -> SolidTorusParams:
    """SolidTorusParams from a flat config dict (unknown keys rejected)."""
    kw = _take(params, {"m": 2, "omega": 0.0, "mu": 0.0, "mu_c": 0.2,
                        "offset": 0.25, "fiber_radius": 1.0,
                        "g_amplitude": 0.0, "pert_amplitude": 0.0})
    g = TrigPerturbation(kw["g_amplitude"]) if kw["g_amplitude"] else None
    return SolidTorusParams(
        m=int(kw["m"]), omega=kw["omega"], mu=kw["mu"], mu_c=kw["mu_c"],
        offset=kw["offset"], fiber_radius=kw["fiber_radius"], g=g,
        pert_amplitude=kw["pert_amplitude"])


def _build_solid_torus(params):
    return make_solid_torus_map(solid_torus_params(params))


def _build_geometric_lorenz(params):
    base = GeomLorenzParams()
    kw = _take(params, {"x1s": base.x1s, "y1s": base.y1s, "x2s": base.x2s,
                        "y2s": base.y2s, "a1": base.a1, "a2": base.a2,
                        "alpha": base.alpha, "mu1": 0.0, "mu2": 0.0})
    return make_geometric_lorenz(GeomLorenzParams(
        x1s=kw["x1s"], y1s=kw["y1s"] + kw["mu1"],
        x2s=kw["x2s"], y2s=kw["y2s"] - kw["mu2"],
        a1=kw["a1"], a2=kw["a2"], alpha=kw["alpha"]))


def _build_pl_lorenz(params):
    kw = _take(params, {"slope_x": 0.4, "slope_y": 2.0, "x_off": 0.55})
    return make_pl_lorenz(**kw)


def _build_wild(params):
    base = WildMapParams()
    kw = _take(params, {"rho": base.rho, "eta": base.eta, "ax": base.ax,
                        "aphi": base.aphi, "cz": base.cz, "dz": base.dz,
                        "Omega": base.Omega})
    return make_wild_map(WildMapParams(**kw))


_REGISTRY = {
    "lorenz": _build_lorenz,
    "saddle_node": _build_saddle_node,
    "torus_automorphism": _build_automorphism,
    "cat_map": lambda params: _build_automorphism(
        _take(params, {"matrix": [[2, 1], [1, 1]]})),
    "torus_endomorphism": _build_endomorphism,
    "circle": _build_circle,
    "doubling": _build_doubling,
    "solid_torus": _build_solid_torus,
    "geometric_lorenz": _build_geometric_lorenz,
    "pl_lorenz": _build_pl_lorenz,
    "wild": _build_wild,
}

MODEL_NAMES = tuple(sorted(_REGISTRY))


def build_model(config: dict) -> SystemModel:
    """Build a model from {"model": name, "params": {...}}.

    Unknown top-level keys, unknown model names, and unknown parameter
    names are all rejected with the offending name in the message.
    """
    if not isinstance(config, dict):
        raise ConfigError("model config must be a JSON object")
    extra = set(config) - {"model", "params"}
    if extra:
        raise ConfigError(f"unknown config key(s) {sorted(extra)}; "
                          "expected 'model' and 'params'")
    name = config.get("model")
    if name not in _REGISTRY:
        raise ConfigError(f"unknown model {name!r}; available: {', '.join(MODEL_NAMES)}")
    params = config.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'params' must be an object")
    return _REGISTRY[name](params)
