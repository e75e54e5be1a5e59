"""Core state, model, and propagation machinery.

Models are plain containers: a right-hand side for flows or a step map for
maps, an optional analytic Jacobian, a domain that knows which coordinates
are angular, and an optional discontinuity locus.  Everything downstream
(verification, symbolic dynamics, scans) works through this interface.
"""
from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (DivergenceError, LabError, LocusProximityError,
                     StepUnderflowError)

__all__ = [
    "DEFAULT_SEED", "Domain", "Locus", "SystemModel", "StepSettings",
    "PlaneEvent", "Orbit", "TangentFrame", "integrate_flow", "iterate_map",
    "jacobian_at", "propagate_tangent",
]

DEFAULT_SEED = 20260819

# Iterates closer than this to a discontinuity locus are treated as hits.
LOCUS_DELTA = 1e-9


@dataclass(frozen=True)
class Domain:
    """Product of intervals, some of which may be periodic (angular)."""

    lower: np.ndarray
    upper: np.ndarray
    periodic: np.ndarray
    period: np.ndarray

    @classmethod
    def box(cls, bounds: Sequence[tuple[float, float]]) -> "Domain":
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
        k = len(bounds)
        return cls(lo, hi, np.zeros(k, dtype=bool), np.ones(k))

    @classmethod
    def torus(cls, k: int, period: float = 1.0) -> "Domain":
        return cls(np.zeros(k), np.full(k, period),
                   np.ones(k, dtype=bool), np.full(k, period))

    @classmethod
    def product(cls, bounds, periodic, periods) -> "Domain":
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
        return cls(lo, hi, np.asarray(periodic, dtype=bool),
                   np.asarray(periods, dtype=float))

    @property
    def dim(self) -> int:
        return self.lower.size

    def wrap(self, s: np.ndarray) -> np.ndarray:
        """Reduce angular coordinates to [0, period); other coords untouched."""
        if not self.periodic.any():
            return s
        if self.periodic.all():
            m = np.mod(s, self.period)
            # mod rounds tiny negatives up to the period itself; fold them back
            return np.where(m >= self.period, 0.0, m)
        out = np.array(s, dtype=float, copy=True)
        p = self.period[self.periodic]
        m = np.mod(out[..., self.periodic], p)
        out[..., self.periodic] = np.where(m >= p, 0.0, m)
        return out

    def contains(self, s: np.ndarray) -> np.ndarray:
        """True where all non-periodic coordinates are inside their interval."""
        free = ~self.periodic
        if not free.any():
            return np.ones(np.shape(s)[:-1], dtype=bool)
        x = np.asarray(s)[..., free]
        ok = (x >= self.lower[free]) & (x <= self.upper[free])
        return ok.all(axis=-1)

    def wrapped_delta(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """a - b with angular differences reduced to the shortest arc."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        if self.periodic.any():
            p = self.period[self.periodic]
            d[..., self.periodic] = np.mod(d[..., self.periodic] + 0.5 * p, p) - 0.5 * p
        return d

    def distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.wrapped_delta(a, b), axis=-1)


@dataclass(frozen=True)
class Locus:
    """Discontinuity locus, described by an unsigned distance function."""

    distance: Callable[[np.ndarray], np.ndarray]
    description: str = ""


@dataclass(frozen=True)
class SystemModel:
    """A flow (rhs) or a map (step_fn) together with its geometry.

    Callables take a state of shape (..., dim) and are vectorized over
    leading axes when ``vectorized`` is set.  ``jacobian`` may be None, in
    which case finite differences are used and flagged by callers.
    ``structure`` carries model-specific handles (branch maps, analytic
    perturbation derivatives, block splits) that specialised analyses use.
    """

    name: str
    kind: str  # "flow" | "map"
    dim: int
    params: Mapping
    domain: Domain
    rhs: Callable | None = None
    step_fn: Callable | None = None
    jacobian: Callable | None = None
    locus: Locus | None = None
    vectorized: bool = False
    structure: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("flow", "map"):
            raise ValueError(f"kind must be 'flow' or 'map', got {self.kind!r}")
        if self.kind == "flow" and self.rhs is None:
            raise ValueError("flow model needs rhs")
        if self.kind == "map" and self.step_fn is None:
            raise ValueError("map model needs step_fn")

    def wrap(self, s: np.ndarray) -> np.ndarray:
        return self.domain.wrap(s)


@dataclass(frozen=True)
class StepSettings:
    """Integrator settings.  Fixed-step RK4 unless ``adaptive`` is set."""

    dt: float = 0.01
    adaptive: bool = False
    tol: float = 1e-10
    escape_radius: float = 1e6
    min_dt: float = 1e-12
    max_dt: float = 1.0


DEFAULT_STEP = StepSettings()


@dataclass(frozen=True)
class PlaneEvent:
    """Crossing of the hyperplane {state[coord] == value}."""

    coord: int
    value: float
    direction: int = 0  # +1 upward only, -1 downward only, 0 either
    terminal: bool = True


@dataclass
class Orbit:
    """Sampled trajectory.  times[i] pairs with states[i]."""

    times: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)
    truncated: str | None = None

    def __len__(self) -> int:
        return self.times.size

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        write_orbit_csv(path, self)


def write_orbit_csv(path, orbit: Orbit) -> None:
    """Write `t,c0,c1,...` rows with float64 round-trip precision."""
    dim = orbit.states.shape[1]
    header = "t," + ",".join(f"c{i}" for i in range(dim))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t, row in zip(orbit.times, orbit.states):
            cells = [f"{t:.17g}"] + [f"{v:.17g}" for v in row]
            fh.write(",".join(cells) + "\n")


@dataclass
class TangentFrame:
    """Orthonormal basis carried along an orbit with accumulated log growth."""

    basis: np.ndarray       # (dim, k), orthonormal columns
    log_growth: np.ndarray  # (k,)

    @classmethod
    def identity(cls, dim: int, k: int) -> "TangentFrame":
        return cls(np.eye(dim, k), np.zeros(k))

    def orthonormality_defect(self) -> float:
        g = self.basis.T @ self.basis
        return float(np.max(np.abs(g - np.eye(g.shape[0]))))


# ---------------------------------------------------------------------------
# RK4 stepping


def _rk4_step(rhs, s, dt):
    k1 = rhs(s)
    k2 = rhs(s + (0.5 * dt) * k1)
    k3 = rhs(s + (0.5 * dt) * k2)
    k4 = rhs(s + dt * k3)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_escape(s, t, radius):
    if not np.all(np.isfinite(s)) or np.linalg.norm(s) > radius:
        raise DivergenceError(t, s, radius)


def _crossing_sign(event: PlaneEvent, prev_val, new_val):
    if prev_val * new_val > 0 or prev_val == new_val:
        return False
    rising = new_val > prev_val
    if event.direction > 0 and not rising:
        return False
    if event.direction < 0 and rising:
        return False
    return True


def _refine_crossing(rhs, s_prev, dt, event: PlaneEvent):
    """Bisect the substep fraction at which the coordinate crosses the plane."""
    f = lambda h: _rk4_step(rhs, s_prev, h)[event.coord] - event.value
    lo, hi = 0.0, dt
    flo = s_prev[event.coord] - event.value
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo < 1e-15 * max(dt, 1.0):
            break
    h = 0.5 * (lo + hi)
    return h, _rk4_step(rhs, s_prev, h)


def integrate_flow(model: SystemModel, s0, t_end: float,
                   step: StepSettings | None = None,
                   events: Sequence[PlaneEvent] = (),
                   record_stride: int = 1,
                   t0: float = 0.0) -> Orbit:
    """Integrate a flow over [t0, t0 + t_end] with fixed-step RK4.

    Set ``step.adaptive`` for step-doubling error control.  Angular
    coordinates are reduced after every step.  Raises DivergenceError when
    the state norm exceeds ``step.escape_radius`` and StepUnderflowError
    when adaptive refinement stalls (e.g. against a discontinuity locus).
    Plane-crossing events are located by bisection inside the offending
    step; a terminal event truncates the orbit at the crossing.
    """
    if model.kind != "flow":
        raise LabError(f"integrate_flow needs a flow model, got {model.kind!r}")
    cfg = step or DEFAULT_STEP
    s = model.wrap(np.asarray(s0, dtype=float))
    if s.shape != (model.dim,):
        raise LabError(f"initial state has shape {s.shape}, expected ({model.dim},)")
    _check_escape(s, t0, cfg.escape_radius)

    times = [t0]
    states = [s.copy()]
    hits: list[tuple[float, int]] = []
    t = t0
    t_stop = t0 + t_end
    dt_cur = cfg.dt
    n_steps = 0

    while t < t_stop - 1e-12 * max(1.0, abs(t_stop)):
        h = min(dt_cur, t_stop - t)
        if cfg.adaptive:
            s_new, h, dt_cur = _adaptive_step(model.rhs, s, h, cfg)
        else:
            s_new = _rk4_step(model.rhs, s, h)
        terminal_hit = False
        for idx, ev in enumerate(events):
            prev_val = s[ev.coord] - ev.value
            new_val = s_new[ev.coord] - ev.value
            if _crossing_sign(ev, prev_val, new_val):
                h_cross, s_cross = _refine_crossing(model.rhs, s, h, ev)
                hits.append((t + h_cross, idx))
                if ev.terminal:
                    s_new, h = s_cross, h_cross
                    terminal_hit = True
                break
        t += h
        s = model.wrap(s_new)
        _check_escape(s, t, cfg.escape_radius)
        n_steps += 1
        if terminal_hit or n_steps % record_stride == 0 or t >= t_stop - 1e-12:
            times.append(t)
            states.append(s.copy())
        if terminal_hit:
            break

    meta = {"model": model.name, "params": dict(model.params),
            "initial_state": np.asarray(s0, dtype=float).tolist(),
            "dt": cfg.dt, "adaptive": cfg.adaptive,
            "events": [(float(tc), i) for tc, i in hits]}
    return Orbit(np.array(times), np.array(states), meta)


def _adaptive_step(rhs, s, h, cfg: StepSettings):
    """One accepted step with step-doubling error control.

    Returns (new_state, step_taken, next_dt).
    """
    while True:
        full = _rk4_step(rhs, s, h)
        half = _rk4_step(rhs, _rk4_step(rhs, s, 0.5 * h), 0.5 * h)
        err = np.max(np.abs(half - full)) / 15.0
        scale = cfg.tol * max(1.0, float(np.max(np.abs(s))))
        if err <= scale or h <= cfg.min_dt:
            if h <= cfg.min_dt and err > scale:
                raise StepUnderflowError(
                    f"adaptive step stalled at h={h:.3g} (error {err:.3g})")
            grow = 0.9 * (scale / max(err, 1e-300)) ** 0.2
            nxt = float(np.clip(h * min(grow, 5.0), cfg.min_dt, cfg.max_dt))
            return half, h, nxt
        h = max(cfg.min_dt, h * max(0.2, 0.9 * (scale / err) ** 0.2))


def iterate_map(model: SystemModel, s0, n: int,
                locus_delta: float = LOCUS_DELTA,
                escape_radius: float = 1e6) -> Orbit:
    """Iterate a map n times, recording every state including s0.

    The orbit is truncated with reason "locus-hit" when an iterate lands
    within ``locus_delta`` of the discontinuity locus and "domain-escape"
    when the image leaves the model's domain box.
    """
    if model.kind != "map":
        raise LabError(f"iterate_map needs a map model, got {model.kind!r}")
    s = model.wrap(np.asarray(s0, dtype=float))
    if s.shape != (model.dim,):
        raise LabError(f"initial state has shape {s.shape}, expected ({model.dim},)")
    states = [s.copy()]
    truncated = None
    escape_state = None
    for _ in range(n):
        if model.locus is not None and float(model.locus.distance(s)) < locus_delta:
            truncated = "locus-hit"
            break
        s_new = model.wrap(np.asarray(model.step_fn(s), dtype=float))
        if not np.all(np.isfinite(s_new)) or np.linalg.norm(s_new) > escape_radius:
            truncated = "divergence"
            escape_state = s_new
            break
        if not bool(model.domain.contains(s_new)):
            truncated = "domain-escape"
            escape_state = s_new
            break
        s = s_new
        states.append(s.copy())
    arr = np.array(states)
    meta = {"model": model.name, "params": dict(model.params),
            "initial_state": np.asarray(s0, dtype=float).tolist()}
    if escape_state is not None:
        meta["escape_state"] = np.asarray(escape_state).tolist()
    return Orbit(np.arange(arr.shape[0], dtype=float), arr, meta, truncated)


# ---------------------------------------------------------------------------
# Jacobians


def jacobian_at(model: SystemModel, s, fd_scale: float = 1e-6) -> np.ndarray:
    """Jacobian of the rhs (flow) or step map at s.

    Uses the model's analytic Jacobian when present, otherwise central
    finite differences with per-coordinate step fd_scale * max(1, |s_i|).
    Differencing across a discontinuity locus raises LocusProximityError.
    """
    s = np.asarray(s, dtype=float)
    if model.jacobian is not None:
        return np.asarray(model.jacobian(s), dtype=float)
    f = model.rhs if model.kind == "flow" else model.step_fn
    h = fd_scale * np.maximum(1.0, np.abs(s))
    if model.locus is not None and float(model.locus.distance(s)) < 2.0 * float(np.max(h)):
        raise LocusProximityError(
            f"state within finite-difference reach of locus "
            f"{model.locus.description or ''}".strip())
    J = np.empty((model.dim, model.dim))
    for i in range(model.dim):
        e = np.zeros(model.dim)
        e[i] = h[i]
        fp = np.asarray(f(s + e), dtype=float)
        fm = np.asarray(f(s - e), dtype=float)
        if model.kind == "map":
            diff = model.domain.wrapped_delta(fp, fm)
        else:
            diff = fp - fm
        J[:, i] = diff / (2.0 * h[i])
    return J


def _jacobian_fn(model: SystemModel):
    """Callable J(s) for tangent propagation, batched when possible."""
    if model.jacobian is not None:
        return lambda s: np.asarray(model.jacobian(s), dtype=float)
    return lambda s: jacobian_at(model, s)


# ---------------------------------------------------------------------------
# Tangent propagation (QR-renormalized)


def _qr_positive(v: np.ndarray):
    """QR with positive diagonal; returns (Q, |diag R|). Batched over
    leading axes."""
    q, r = np.linalg.qr(v)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    sign = np.where(diag < 0.0, -1.0, 1.0)
    q = q * sign[..., None, :]
    return q, np.abs(diag)


def propagate_tangent(model: SystemModel, s0, frame0, span,
                      renorm_interval, step: StepSettings | None = None):
    """Carry a tangent frame along the orbit of s0, renormalizing by QR.

    For flows ``span`` is a duration and ``renorm_interval`` a time;
    the variational equation dV/dt = J(x(t)) V is integrated alongside the
    state.  For maps ``span`` is an iteration count and ``renorm_interval``
    a number of steps.  Returns (orbit sampled at renorm checkpoints,
    TangentFrame with accumulated log growth per direction).
    """
    frame = frame0 if isinstance(frame0, TangentFrame) else TangentFrame(
        np.array(frame0, dtype=float), np.zeros(np.shape(frame0)[1]))
    V = frame.basis.copy()
    log_growth = frame.log_growth.copy()
    s = model.wrap(np.asarray(s0, dtype=float))
    jac = _jacobian_fn(model)

    times = [0.0]
    states = [s.copy()]

    if model.kind == "flow":
        cfg = step or DEFAULT_STEP
        dt = cfg.dt
        n_sub = max(1, int(round(renorm_interval / dt)))
        n_blocks = max(1, int(round(span / (n_sub * dt))))
        rhs = model.rhs
        for _ in range(n_blocks):
            for _ in range(n_sub):
                s, V = _rk4_tangent_step(rhs, jac, s, V, dt)
            s = model.wrap(s)
            _check_escape(s, times[-1], cfg.escape_radius)
            V, growth = _qr_positive(V)
            log_growth += np.log(np.maximum(growth, 1e-300))
            times.append(times[-1] + n_sub * dt)
            states.append(s.copy())
    else:
        n_sub = max(1, int(renorm_interval))
        total = int(span)
        done = 0
        while done < total:
            block = min(n_sub, total - done)
            for _ in range(block):
                if model.locus is not None and float(model.locus.distance(s)) < LOCUS_DELTA:
                    total = done  # truncate
                    break
                V = jac(s) @ V
                s = model.wrap(np.asarray(model.step_fn(s), dtype=float))
                done += 1
            V, growth = _qr_positive(V)
            log_growth += np.log(np.maximum(growth, 1e-300))
            times.append(float(done))
            states.append(s.copy())

    orbit = Orbit(np.array(times), np.array(states),
                  {"model": model.name, "renorm_interval": renorm_interval})
    return orbit, TangentFrame(V, log_growth)


def _rk4_tangent_step(rhs, jac, s, V, dt):
    """One RK4 step of the coupled state + variational system."""
    k1 = rhs(s);              m1 = jac(s) @ V
    s2 = s + 0.5 * dt * k1;   V2 = V + 0.5 * dt * m1
    k2 = rhs(s2);             m2 = jac(s2) @ V2
    s3 = s + 0.5 * dt * k2;   V3 = V + 0.5 * dt * m2
    k3 = rhs(s3);             m3 = jac(s3) @ V3
    s4 = s + dt * k3;         V4 = V + dt * m3
    k4 = rhs(s4);             m4 = jac(s4) @ V4
    s_new = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    V_new = V + (dt / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
    return s_new, V_new


# ---------------------------------------------------------------------------
# Batched Benettin engines (internal; public wrappers live in analysis)


def _benettin_map_batch(model: SystemModel, S0: np.ndarray, n_steps: int, k: int,
                        renorm_interval: int = 1, history: bool = False,
                        locus_delta: float = LOCUS_DELTA):
    """Tangent growth along a batch of map orbits.

    S0 has shape (B, dim).  Members whose orbit hits the discontinuity
    locus are frozen at that point; their step counts are reported.
    Returns (log_sums (B, k), steps (B,), history list of (step, estimates)).
    Requires a vectorized model.
    """
    B, dim = S0.shape
    S = model.wrap(np.array(S0, dtype=float))
    # a coordinate axis can sit exactly in a singular Jacobian's kernel
    # (a step that ignores one coordinate kills that axis in one hit), so
    # start from a fixed generic frame instead of identity columns
    gen = np.random.default_rng(2_718_281).standard_normal((dim, dim))
    Q0, _ = np.linalg.qr(gen)
    V = np.broadcast_to(Q0[:, :k], (B, dim, k)).copy()
    log_sums = np.zeros((B, k))
    steps = np.zeros(B, dtype=int)
    active = np.ones(B, dtype=bool)
    jac = _jacobian_fn(model)
    hist: list[tuple[int, np.ndarray]] = []

    # Locus-free models admit a cheap inner loop: validity is checked at
    # block boundaries only, and a member that went bad inside a block is
    # rolled back to the block start, so its credited steps stay in sync
    # with its accumulated growth.
    fast = model.locus is None
    const_J = None
    if fast and model.structure.get("constant_jacobian"):
        const_J = np.asarray(jac(S[:1]), dtype=float)[0]
    pow_cache: dict[int, np.ndarray] = {}
    step_fn = model.step_fn
    if model.domain.periodic.all():
        period = model.domain.period

        def wrap(s):
            return np.mod(s, period)
    else:
        wrap = model.domain.wrap

    done = 0
    while done < n_steps and active.any():
        block = min(renorm_interval, n_steps - done)
        was_active = active.copy()
        if fast:
            S_snap = S.copy()
            V_snap = V.copy()
            if const_J is not None:
                Jblk = pow_cache.get(block)
                if Jblk is None:
                    Jblk = np.linalg.matrix_power(const_J, block)
                    pow_cache[block] = Jblk
                for _ in range(block):
                    S = wrap(np.asarray(step_fn(S), dtype=float))
                V = Jblk @ V
            else:
                for _ in range(block):
                    V = jac(S) @ V
                    S = wrap(np.asarray(step_fn(S), dtype=float))
            ok = (np.isfinite(S).all(axis=-1) & model.domain.contains(S)
                  & np.isfinite(V).all(axis=(-2, -1)))
            bad = active & ~ok
            if bad.any():
                S[bad] = S_snap[bad]
                V[bad] = V_snap[bad]
                active[bad] = False
            steps[active] += block
            was_active = active.copy()
        else:
            for _ in range(block):
                d = np.asarray(model.locus.distance(S))
                active &= d >= locus_delta
                if not active.any():
                    break
                J = jac(S)                  # (B, dim, dim)
                Vn = J @ V
                Sn = model.wrap(np.asarray(step_fn(S), dtype=float))
                # freeze members whose image leaves the domain or blows up
                good = np.isfinite(Sn).all(axis=-1) & model.domain.contains(Sn)
                active &= good
                V[active] = Vn[active]
                S[active] = Sn[active]
                steps[active] += 1
        done += block
        Q, growth = _qr_positive(V)
        V = Q
        # members frozen mid-block still get credit for the steps they
        # took; V stops updating at the freeze, so growth stays correct
        log_sums[was_active] += np.log(np.maximum(growth[was_active], 1e-300))
        if history:
            with np.errstate(divide="ignore", invalid="ignore"):
                est = log_sums / np.maximum(steps[:, None], 1)
            hist.append((done, est.copy()))
    return log_sums, steps, hist


def _benettin_flow_batch(model: SystemModel, S0: np.ndarray, duration: float,
                         k: int, renorm_interval: float = 1.0,
                         step: StepSettings | None = None,
                         history: bool = False):
    """Tangent growth along a batch of flow orbits (fixed-step RK4).

    Returns (log_sums (B, k), elapsed time, history list of (t, estimates)).
    Requires a vectorized model.
    """
    cfg = step or DEFAULT_STEP
    dt = cfg.dt
    B, dim = S0.shape
    S = model.wrap(np.array(S0, dtype=float))
    V = np.broadcast_to(np.eye(dim, k), (B, dim, k)).copy()
    log_sums = np.zeros((B, k))
    jac = _jacobian_fn(model)
    rhs = model.rhs
    n_sub = max(1, int(round(renorm_interval / dt)))
    n_blocks = max(1, int(round(duration / (n_sub * dt))))
    hist: list[tuple[float, np.ndarray]] = []
    t = 0.0
    for _ in range(n_blocks):
        for _ in range(n_sub):
            S, V = _rk4_tangent_step(rhs, jac, S, V, dt)
        t += n_sub * dt
        S = model.wrap(S)
        if not np.all(np.isfinite(S)) or np.max(np.linalg.norm(S, axis=-1)) > cfg.escape_radius:
            raise DivergenceError(t, S[np.argmax(np.linalg.norm(S, axis=-1))],
                                  cfg.escape_radius)
        V, growth = _qr_positive(V)
        log_sums += np.log(np.maximum(growth, 1e-300))
        if history:
            hist.append((t, log_sums / t))
    return log_sums, t, hist
