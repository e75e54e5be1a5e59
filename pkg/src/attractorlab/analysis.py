"""Quantitative attractor characterization.

Lyapunov spectra via QR-renormalized tangent propagation, box-counting
dimension, recurrence-time statistics, periodic-orbit search with stability
classification, and chain-recurrent attractor extraction on a cell graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .core import (
    DEFAULT_SEED, DEFAULT_STEP, LOCUS_DELTA, Orbit, StepSettings, SystemModel,
    _benettin_flow_batch, _benettin_map_batch, _jacobian_fn, _rk4_step,
    jacobian_at)
from .errors import (
    ConfigError, InsufficientRecurrenceError, ResolutionTooFineError)

__all__ = [
    "LyapunovResult", "lyapunov_spectrum",
    "BoxCountResult", "box_counting_dimension",
    "recurrence_times",
    "PeriodicOrbitRecord", "find_periodic_points",
    "CellGraph", "build_cell_graph", "ChainAttractor", "chain_attractor",
]

NEUTRAL_TOL = 1e-9


# ---------------------------------------------------------------------------
# Lyapunov spectra


@dataclass
class LyapunovResult:
    """Exponents sorted descending, plus the running-estimate history."""

    exponents: np.ndarray
    history_times: np.ndarray
    history: np.ndarray  # (len(history_times), k), rows sorted descending
    drift: float
    converged: bool
    settings: dict

    def to_json(self) -> dict:
        return {
            "exponents": [float(v) for v in self.exponents],
            "drift": float(self.drift),
            "converged": bool(self.converged),
            "settings": dict(self.settings),
            "history": {
                "t": [float(t) for t in self.history_times],
                "estimates": [[float(v) for v in row] for row in self.history],
            },
        }


def _draw_state(model: SystemModel, rng: np.random.Generator) -> np.ndarray:
    lo, hi = model.domain.lower, model.domain.upper
    finite = np.isfinite(lo) & np.isfinite(hi)
    s = rng.standard_normal(model.dim)
    s[finite] = rng.uniform(lo[finite], hi[finite])
    return s


def lyapunov_spectrum(model: SystemModel, s0=None, duration: float = 1000.0,
                      k: int | None = None, renorm_interval: float | None = None,
                      step: StepSettings | None = None, seed: int | None = None,
                      drift_bound: float = 0.05) -> LyapunovResult:
    """k largest Lyapunov exponents along the orbit of s0.

    For maps ``duration`` is an iteration count and ``renorm_interval`` a
    step count (default 1); for flows they are time spans (default renorm
    every 1.0 time unit).  The convergence history holds the running
    estimates at every renormalization; drift is the spread of those
    estimates over the final 10% of the run, relative to the exponent
    scale, and the result is flagged unconverged when it exceeds
    drift_bound.
    """
    if not model.vectorized:
        raise ConfigError("lyapunov_spectrum needs a vectorized model")
    k = model.dim if k is None else int(k)
    if not (1 <= k <= model.dim):
        raise ConfigError(f"k must be in 1..{model.dim}")
    rng = np.random.default_rng(DEFAULT_SEED if seed is None else seed)
    drawn = s0 is None
    s0 = _draw_state(model, rng) if drawn else np.asarray(s0, dtype=float)
    if s0.shape != (model.dim,):
        raise ConfigError(f"s0 must have shape ({model.dim},)")

    if model.kind == "map":
        ri = 1 if renorm_interval is None else max(1, int(renorm_interval))
        n = int(duration)
        log_sums, steps, hist = _benettin_map_batch(
            model, s0[None, :], n, k, renorm_interval=ri, history=True)
        span_done = float(steps[0])
        if span_done == 0:
            raise ConfigError("orbit froze immediately (locus or escape at s0)")
        exponents = log_sums[0] / span_done
        times = np.array([t for t, _ in hist], dtype=float)
        rows = np.array([est[0] for _, est in hist], dtype=float)
        settings = {"kind": "map", "duration": n, "renorm_interval": ri,
                    "k": k, "steps_completed": int(steps[0])}
    else:
        ri = 1.0 if renorm_interval is None else float(renorm_interval)
        cfg = step or DEFAULT_STEP
        log_sums, elapsed, hist = _benettin_flow_batch(
            model, s0[None, :], float(duration), k, renorm_interval=ri,
            step=cfg, history=True)
        exponents = log_sums[0] / elapsed
        times = np.array([t for t, _ in hist], dtype=float)
        rows = np.array([est[0] for _, est in hist], dtype=float)
        settings = {"kind": "flow", "duration": float(duration),
                    "renorm_interval": ri, "k": k, "dt": cfg.dt}
    settings["seed"] = (DEFAULT_SEED if seed is None else seed) if drawn else None
    settings["s0"] = [float(v) for v in s0]

    order = np.argsort(exponents)[::-1]
    exponents = exponents[order]
    rows = np.sort(rows, axis=1)[:, ::-1]
    tail = rows[times >= 0.9 * times[-1]] if times.size else rows
    if tail.size:
        spread = float(np.max(tail.max(axis=0) - tail.min(axis=0)))
    else:
        spread = np.inf
    drift = spread / max(float(np.max(np.abs(exponents))), 0.1)
    return LyapunovResult(exponents, times, rows, drift,
                          bool(drift < drift_bound), settings)


# ---------------------------------------------------------------------------
# Box-counting dimension


@dataclass(frozen=True)
class BoxCountResult:
    dimension: float
    r2: float
    scales: np.ndarray
    counts: np.ndarray
    degenerate: bool

    def __float__(self) -> float:
        return self.dimension


def box_counting_dimension(points: np.ndarray,
                           scales: np.ndarray | None = None) -> BoxCountResult:
    """Least-squares slope of log N(h) against log(1/h).

    N(h) counts occupied cells of an axis-aligned grid of pitch h.  The
    default scales are seven dyadic fractions span/4 .. span/256 of the
    largest coordinate span.  A fit with r^2 < 0.98 is flagged degenerate
    (not fatal; the caller decides).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ConfigError("points must be a (n, dim) array")
    if pts.shape[0] < 10_000:
        raise ConfigError(f"need at least 10^4 points, got {pts.shape[0]}")
    if not np.isfinite(pts).all():
        raise ConfigError("points contain non-finite values")
    lo = pts.min(axis=0)
    span = float(np.max(pts.max(axis=0) - lo))
    if span == 0.0:
        raise ConfigError("point cloud is a single point")
    if scales is None:
        scales = span / 2.0 ** np.arange(2, 9)
    scales = np.asarray(scales, dtype=float)
    if scales.size < 4:
        raise ConfigError("need at least 4 scales")
    if np.any(scales <= 0):
        raise ConfigError("scales must be positive")

    counts = np.empty(scales.size)
    for i, h in enumerate(scales):
        idx = np.floor((pts - lo) / h).astype(np.int64)
        counts[i] = np.unique(idx, axis=0).shape[0]
    x = np.log(1.0 / scales)
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 0.0
    return BoxCountResult(float(slope), r2, scales, counts, bool(r2 < 0.98))


# ---------------------------------------------------------------------------
# Recurrence times


def recurrence_times(orbit: Orbit, center, radius: float,
                     domain=None) -> np.ndarray:
    """Gaps between successive entries of the orbit into a ball.

    An entry is the first sample inside the ball after a sample outside
    (the initial sample counts when it starts inside).  Distances use
    domain.distance when a domain is given (shortest arc on periodic
    axes), plain Euclidean otherwise.
    """
    center = np.asarray(center, dtype=float)
    if domain is not None:
        d = domain.distance(orbit.states, center)
    else:
        d = np.linalg.norm(orbit.states - center, axis=-1)
    inside = d <= radius
    entries = np.flatnonzero(inside & ~np.concatenate([[False], inside[:-1]]))
    if entries.size < 2:
        raise InsufficientRecurrenceError(
            f"only {entries.size} entries into the ball (need >= 2); "
            "enlarge the ball or lengthen the orbit")
    return np.diff(orbit.times[entries])


# ---------------------------------------------------------------------------
# Periodic points


@dataclass(frozen=True)
class PeriodicOrbitRecord:
    """One periodic point with the multipliers of the n-fold map."""

    point: np.ndarray
    period: int            # minimal period (divides the queried n)
    multipliers: np.ndarray  # eigenvalues of D(T^n) at the point
    stability: str         # "attracting" | "saddle" | "repelling"
    neutral: bool
    multipliers_ok: bool = True

    def to_json(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "period": int(self.period),
            "multipliers": [[float(m.real), float(m.imag)]
                            for m in np.atleast_1d(self.multipliers)],
            "stability": self.stability,
            "neutral": bool(self.neutral),
            "multipliers_ok": bool(self.multipliers_ok),
        }


def _classify(multipliers: np.ndarray) -> tuple[str, bool]:
    mods = np.abs(multipliers)
    neutral = bool(np.any(np.abs(mods - 1.0) <= NEUTRAL_TOL))
    if np.all(mods < 1.0 - NEUTRAL_TOL):
        return "attracting", neutral
    if np.all(mods > 1.0 + NEUTRAL_TOL):
        return "repelling", neutral
    return "saddle", neutral


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def _orbit_map_and_jac(model: SystemModel, S: np.ndarray, n: int):
    """T^n(S) and D(T^n)(S) for a batch, via the chain rule."""
    jac = _jacobian_fn(model)
    X = np.array(S, dtype=float)
    B, dim = X.shape
    M = np.broadcast_to(np.eye(dim), (B, dim, dim)).copy()
    for _ in range(n):
        J = jac(X)
        if J.ndim == 2:  # finite-difference fallback is per-point
            J = np.stack([jacobian_at(model, x) for x in X])
        M = J @ M
        X = model.wrap(np.asarray(model.step_fn(X), dtype=float))
    return X, M


def _enumerate_expanding_circle(model: SystemModel, n: int):
    m = int(model.structure["m"])
    omega = float(model.structure.get("omega", 0.0))
    count = abs(m ** n - 1)
    # roots of m^n t + omega (m^n-1)/(m-1) = t mod 1: the 1/count lattice
    # shifted by -omega/(m-1)
    theta = (np.arange(count, dtype=float) / count - omega / (m - 1)) % 1.0
    mult = float(m) ** n
    records = []
    for th in theta:
        period = n
        for d in _divisors(n)[:-1]:
            img = (m ** d * th + omega * (m ** d - 1) / (m - 1)) % 1.0
            delta = abs(img - th)
            if min(delta, 1.0 - delta) < 1e-12:
                period = d
                break
        stability, neutral = _classify(np.array([mult]))
        records.append(PeriodicOrbitRecord(
            np.array([th]), period, np.array([mult]), stability, neutral))
    return records


def find_periodic_points(model: SystemModel, n: int, seeds=400,
                         rng: np.random.Generator | None = None,
                         tol: float = 1e-10, max_iter: int = 50,
                         dedupe_tol: float = 1e-8) -> list[PeriodicOrbitRecord]:
    """Periodic points of period dividing n, one record per point.

    Expanding circle maps (|m| >= 2, no perturbation) are enumerated
    exactly: the |m^n - 1| roots of m^n theta = theta mod 1.  Everything
    else runs a damped Newton iteration on T^n(s) - s = 0 from the seed
    batch, deduplicates converged roots, and reports the minimal period
    together with eigenvalues of D(T^n).

    ``seeds`` is either a count (drawn uniformly from the domain with the
    given rng) or an explicit (B, dim) array.  Records with non-finite
    multiplier data are flagged via multipliers_ok.
    """
    if model.kind != "map":
        raise ConfigError("periodic-point search is implemented for maps")
    if n < 1:
        raise ConfigError("n must be >= 1")
    if model.structure.get("expanding_1d"):
        return _enumerate_expanding_circle(model, n)

    rng = rng or np.random.default_rng(DEFAULT_SEED)
    if np.isscalar(seeds):
        lo, hi = model.domain.lower, model.domain.upper
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ConfigError("seed count needs a bounded domain; "
                              "pass explicit seed points instead")
        S = rng.uniform(lo, hi, size=(int(seeds), model.dim))
    else:
        S = np.array(seeds, dtype=float)
        if S.ndim != 2 or S.shape[1] != model.dim:
            raise ConfigError(f"seeds must be (B, {model.dim})")
    S = model.wrap(S)

    span = np.where(np.isfinite(model.domain.upper - model.domain.lower),
                    model.domain.upper - model.domain.lower, 1.0)
    scale = float(np.max(span))
    eye = np.eye(model.dim)

    def residual(X):
        Tn, M = _orbit_map_and_jac(model, X, n)
        F = model.domain.wrapped_delta(Tn, X)
        return F, M

    active = np.ones(S.shape[0], dtype=bool)
    F, M = residual(S)
    for _ in range(max_iter):
        err = np.max(np.abs(F), axis=-1)
        active &= np.isfinite(err)
        work = active & (err > tol * scale)
        if not work.any():
            break
        A = M[work] - eye
        try:
            delta = np.linalg.solve(A, -F[work][:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            # singular members get a pseudo-inverse step
            delta = np.stack([np.linalg.lstsq(a, -f, rcond=None)[0]
                              for a, f in zip(A, F[work])])
        # backtracking: halve until the residual actually shrinks
        idx = np.flatnonzero(work)
        base_err = err[idx]
        lam = np.ones(idx.size)
        best = S[idx] + delta
        for _ in range(20):
            cand = model.wrap(S[idx] + lam[:, None] * delta)
            Fc, _ = residual(cand)
            cerr = np.max(np.abs(Fc), axis=-1)
            bad = ~(np.isfinite(cerr) & (cerr < base_err))
            best = np.where(bad[:, None], best, cand)
            accepted = ~bad
            if accepted.all():
                break
            lam[bad] *= 0.5
        else:
            # members that never improved are abandoned
            cand = model.wrap(S[idx] + lam[:, None] * delta)
            Fc, _ = residual(cand)
            cerr = np.max(np.abs(Fc), axis=-1)
            still_bad = ~(np.isfinite(cerr) & (cerr < base_err))
            active[idx[still_bad]] = False
            best = np.where(still_bad[:, None], S[idx], cand)
        S[idx] = best
        F, M = residual(S)

    err = np.max(np.abs(F), axis=-1)
    converged = active & np.isfinite(err) & (err <= tol * scale)
    roots = S[converged]
    if model.locus is not None and roots.size:
        roots = roots[np.asarray(model.locus.distance(roots)) > LOCUS_DELTA]

    # deduplicate, deterministically ordered by coordinates
    records: list[PeriodicOrbitRecord] = []
    kept: list[np.ndarray] = []
    order = np.lexsort(roots.T[::-1]) if roots.size else []
    for i in order:
        p = roots[i]
        if any(float(model.domain.distance(p, q)) < dedupe_tol * scale
               for q in kept):
            continue
        kept.append(p)
        X = p[None, :]
        Tn, M1 = _orbit_map_and_jac(model, X, n)
        mult = np.linalg.eigvals(M1[0])
        ok = bool(np.isfinite(mult).all())
        period = n
        for d in _divisors(n)[:-1]:
            Xd, _ = _orbit_map_and_jac(model, X, d)
            if float(model.domain.distance(Xd[0], p)) < dedupe_tol * scale:
                period = d
                break
        stability, neutral = _classify(mult)
        records.append(PeriodicOrbitRecord(p.copy(), period, mult,
                                           stability, neutral, ok))
    return records


# ---------------------------------------------------------------------------
# Cell graphs and chain attractors


@dataclass
class CellGraph:
    """Directed graph of cell-to-cell transitions under the time-tau map.

    Cells tile the box with pitch h (linear indices in C order); an edge
    i -> j means some sample image from cell i lands within eps of cell j
    after time tau.  ``escaped`` marks cells with at least one sample
    image outside the box (orbit left the modeled region).
    """

    model_name: str
    lower: np.ndarray
    upper: np.ndarray
    h: float
    eps: float
    tau: float
    shape: tuple
    adjacency: sp.csr_matrix
    escaped: np.ndarray
    samples_per_cell: int
    meta: dict = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Linear cell index per point; -1 for points outside the box."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((pts - self.lower) / self.h).astype(np.int64)
        inside = ((pts >= self.lower) & (pts <= self.upper)).all(axis=-1)
        idx = np.clip(idx, 0, np.array(self.shape) - 1)
        lin = np.ravel_multi_index(idx.T, self.shape)
        return np.where(inside, lin, -1)

    def cell_bounds(self, cells: np.ndarray):
        """(lower, upper) corner arrays for the given linear indices."""
        multi = np.stack(np.unravel_index(np.asarray(cells, dtype=np.int64),
                                          self.shape), axis=-1)
        lo = self.lower + multi * self.h
        return lo, np.minimum(lo + self.h, self.upper)

    def boundary_mask(self, cells: np.ndarray) -> np.ndarray:
        multi = np.stack(np.unravel_index(np.asarray(cells, dtype=np.int64),
                                          self.shape), axis=-1)
        return ((multi == 0) | (multi == np.array(self.shape) - 1)).any(axis=-1)

    def to_edge_csv(self, path) -> None:
        coo = self.adjacency.tocoo()
        with open(path, "w") as fh:
            fh.write("src,dst\n")
            for i, j in zip(coo.row, coo.col):
                fh.write(f"{i},{j}\n")

    def cells_to_csv(self, path, cells: np.ndarray) -> None:
        cells = np.asarray(cells, dtype=np.int64)
        lo, hi = self.cell_bounds(cells)
        dim = lo.shape[1]
        header = "cell_index," + ",".join(
            f"c{d}_lo,c{d}_hi" for d in range(dim))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for c, a, b in zip(cells, lo, hi):
                row = [str(int(c))]
                for d in range(dim):
                    row += [f"{a[d]:.17g}", f"{b[d]:.17g}"]
                fh.write(",".join(row) + "\n")


def build_cell_graph(model: SystemModel, box, h: float, eps: float,
                     tau: float, samples_per_cell: int = 4,
                     cell_cap: int = 2_000_000,
                     rng: np.random.Generator | None = None,
                     step: StepSettings | None = None) -> CellGraph:
    """Monte-Carlo transition graph of the time-tau map on a cell tiling.

    Each cell contributes samples_per_cell uniformly drawn points; their
    images (tau time units for flows, round(tau) iterations for maps) are
    inflated by eps and every overlapped cell receives an edge.  Images
    outside the box are dropped and the source cell is marked escaped.
    """
    if h <= 0 or eps < 0 or tau <= 0:
        raise ConfigError("h and tau must be positive, eps nonnegative")
    lower = np.array([b[0] for b in box], dtype=float)
    upper = np.array([b[1] for b in box], dtype=float)
    if lower.size != model.dim or np.any(upper <= lower):
        raise ConfigError("box must be model-dimensional with hi > lo")
    if not model.vectorized:
        raise ConfigError("build_cell_graph needs a vectorized model")
    shape = tuple(int(np.ceil((hi - lo) / h)) for lo, hi in zip(lower, upper))
    n_cells = int(np.prod(shape))
    if n_cells > cell_cap:
        raise ResolutionTooFineError(
            f"{n_cells} cells exceed the cap {cell_cap}; coarsen h")

    rng = rng or np.random.default_rng(DEFAULT_SEED)
    dim = model.dim
    multi = np.stack(np.unravel_index(np.arange(n_cells), shape), axis=-1)
    cell_lo = lower + multi * h
    cell_hi = np.minimum(cell_lo + h, upper)
    src = np.repeat(np.arange(n_cells), samples_per_cell)
    pts = (np.repeat(cell_lo, samples_per_cell, axis=0)
           + rng.uniform(0.0, 1.0, (src.size, dim))
           * np.repeat(cell_hi - cell_lo, samples_per_cell, axis=0))

    if model.kind == "map":
        n_steps = max(1, int(round(tau)))
        img = pts
        for _ in range(n_steps):
            img = model.wrap(np.asarray(model.step_fn(img), dtype=float))
    else:
        cfg = step or DEFAULT_STEP
        n_sub = max(1, int(round(tau / cfg.dt)))
        dt = tau / n_sub
        img = pts
        for _ in range(n_sub):
            img = _rk4_step(model.rhs, img, dt)
        img = model.wrap(img)

    finite = np.isfinite(img).all(axis=-1)
    inside = finite & ((img >= lower) & (img <= upper)).all(axis=-1)
    escaped = np.zeros(n_cells, dtype=bool)
    escaped[src[~inside]] = True

    img_in = img[inside]
    src_in = src[inside]
    base = np.floor((img_in - eps - lower) / h).astype(np.int64)
    top = np.floor((img_in + eps - lower) / h).astype(np.int64)
    width = int(np.ceil(2.0 * eps / h)) + 1
    offsets = np.stack(np.meshgrid(*([np.arange(width)] * dim),
                                   indexing="ij"), axis=-1).reshape(-1, dim)
    cand = base[:, None, :] + offsets[None, :, :]  # (M, width^dim, dim)
    valid = ((cand >= 0) & (cand < np.array(shape))
             & (cand <= top[:, None, :])).all(axis=-1)
    rows = np.repeat(src_in, offsets.shape[0])[valid.ravel()]
    flat = cand.reshape(-1, dim)[valid.ravel()]
    cols = np.ravel_multi_index(flat.T, shape)
    pair = np.unique(rows.astype(np.int64) * n_cells + cols)
    adjacency = sp.csr_matrix(
        (np.ones(pair.size, dtype=bool),
         (pair // n_cells, pair % n_cells)),
        shape=(n_cells, n_cells))
    return CellGraph(model.name, lower, upper, float(h), float(eps),
                     float(tau), shape, adjacency, escaped,
                     int(samples_per_cell),
                     meta={"edges": int(pair.size)})


@dataclass
class ChainAttractor:
    """Terminal strongly connected cells reachable from the seed."""

    cells: np.ndarray
    seed_cell: int
    touches_boundary: bool
    escape_reachable: bool

    def __len__(self) -> int:
        return int(self.cells.size)


def chain_attractor(graph: CellGraph, seed_cell: int) -> ChainAttractor:
    """Cells of the terminal recurrent SCCs reachable from seed_cell.

    Recurrent means the SCC carries a cycle (size > 1 or a self-loop); an
    SCC is terminal when no other recurrent SCC is reachable from it.
    Transient chains and escape sinks (cells whose recorded images all
    left the box) can hang off a terminal SCC without disqualifying it;
    reaching an escape sink sets escape_reachable, which together with
    touches_boundary signals a too-small box.
    """
    n = graph.n_cells
    if not (0 <= seed_cell < n):
        raise ConfigError(f"seed cell {seed_cell} outside 0..{n - 1}")
    adj = graph.adjacency
    reach = csgraph.breadth_first_order(adj, seed_cell, directed=True,
                                        return_predecessors=False)
    reach = np.asarray(reach, dtype=np.int64)
    nlab, labels = csgraph.connected_components(adj, directed=True,
                                                connection="strong")
    coo = adj.tocoo()
    sizes = np.bincount(labels, minlength=nlab)
    has_self = np.zeros(nlab, dtype=bool)
    has_self[labels[coo.row[coo.row == coo.col]]] = True
    recurrent = (sizes > 1) | has_self

    candidates = np.unique(labels[reach])
    candidates = candidates[recurrent[candidates]]
    good = []
    for lab in candidates:
        member = int(reach[labels[reach] == lab][0])
        cone = np.asarray(csgraph.breadth_first_order(
            adj, member, directed=True, return_predecessors=False))
        cone_labels = np.unique(labels[cone])
        others = cone_labels[(cone_labels != lab) & recurrent[cone_labels]]
        if others.size == 0:
            good.append(lab)
    if not good:
        raise ConfigError(
            "no recurrent cells reachable from the seed; every path leaves "
            "the box (box too small or tau too long)")
    cells = np.sort(reach[np.isin(labels[reach], np.array(good))])
    return ChainAttractor(
        cells, int(seed_cell),
        bool(graph.boundary_mask(cells).any()),
        bool(graph.escaped[reach].any()))
