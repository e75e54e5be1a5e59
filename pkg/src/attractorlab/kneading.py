"""Symbolic dynamics for interval maps with one discontinuity.

The objects here describe a map G on [lo, hi] cut at 0: itineraries of
the two one-sided critical orbits (kneading sequences), the full-branch
Bernoulli test, and topological Markov chains over preimage partitions
with their entropy.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_SEED, SystemModel
from .errors import ConfigError, ReductionInvalidError

__all__ = [
    "IntervalMap1D", "KneadingInvariant", "TransitionMatrix",
    "kneading_sequence", "kneading_pair", "compare_kneading",
    "symbolic_order", "verify_two_full_branches", "build_transition_matrix",
    "reduce_to_1d",
]

LOCUS_MARKER = "0"
ESCAPE_MARKER = "E"


@dataclass
class IntervalMap1D:
    """Piecewise map on [lo, hi] with a single cut at 0.

    call(y) evaluates the map off the cut; the one-sided limits stand in
    for the undefined value at 0.  Monotonicity flags are +1, -1, or 0
    (not single-signed on samples); expansion_inf is the sampled
    infimum of |G'|.
    """

    call: Callable
    lo: float
    hi: float
    limit_neg: float
    limit_pos: float
    monotone_neg: int
    monotone_pos: int
    expansion_inf: float
    meta: dict = field(default_factory=dict)

    def __call__(self, y):
        return self.call(y)

    @property
    def span(self) -> float:
        return self.hi - self.lo

    @classmethod
    def from_callable(cls, G: Callable, lo: float = -1.0, hi: float = 1.0,
                      samples: int = 4096, meta: dict | None = None
                      ) -> "IntervalMap1D":
        if not (lo < 0.0 < hi):
            raise ConfigError("interval must contain the cut point 0")
        span = hi - lo
        tiny = span * 2.0 ** -80
        limit_pos = float(np.asarray(G(np.array([tiny])))[0])
        limit_neg = float(np.asarray(G(np.array([-tiny])))[0])

        def branch_stats(a, b):
            # dense linear samples plus a geometric tail toward the cut;
            # tail stops at 2^-40 so value differences stay above float noise
            lin = np.linspace(a, b, samples)
            geo = np.array([np.copysign(span * 2.0 ** -k, a + b)
                            for k in range(4, 41)])
            ys = np.unique(np.concatenate([lin, geo]))
            ys = ys[(ys >= min(a, b)) & (ys <= max(a, b)) & (ys != 0)]
            ys = ys[np.concatenate([[True], np.diff(ys) > span * 1e-13])]
            vals = np.asarray(G(ys))
            slopes = np.diff(vals) / np.diff(ys)
            if np.all(slopes > 0):
                mono = 1
            elif np.all(slopes < 0):
                mono = -1
            else:
                mono = 0
            return mono, float(np.min(np.abs(slopes)))

        mono_neg, exp_neg = branch_stats(lo, -tiny)
        mono_pos, exp_pos = branch_stats(tiny, hi)
        return cls(G, lo, hi, limit_neg, limit_pos, mono_neg, mono_pos,
                   min(exp_neg, exp_pos), meta or {})

    @classmethod
    def from_model(cls, model: SystemModel) -> "IntervalMap1D":
        """Exact 1D section map of a skew model that declares one."""
        G = model.structure.get("one_d_map")
        limits = model.structure.get("section_limits")
        if G is None or limits is None:
            raise ConfigError(f"model {model.name!r} declares no 1D section map")
        lo, hi = sorted(limits)
        out = cls.from_callable(G, lo, hi, meta={"model": model.name})
        deriv = model.structure.get("one_d_deriv")
        if deriv is not None:
            ys = np.linspace(lo, hi, 8193)
            ys = ys[ys != 0]
            out.expansion_inf = float(np.min(np.abs(deriv(ys))))
        return out

    @classmethod
    def from_samples(cls, y: np.ndarray, ybar: np.ndarray, bins: int = 512,
                     meta: dict | None = None) -> "IntervalMap1D":
        """Piecewise-linear interpolant through per-branch bin means.

        Abscissas are in-bin sample means, so exactly linear branches are
        recovered exactly.  Beyond the outermost bins each branch extends
        linearly; the extensions toward 0 supply the one-sided limits.
        """
        y = np.asarray(y, dtype=float)
        ybar = np.asarray(ybar, dtype=float)
        branches = []
        for mask in (y < 0, y > 0):
            ys, vs = y[mask], ybar[mask]
            if ys.size < 8:
                raise ConfigError("too few samples on one side of the cut")
            edges = np.linspace(ys.min(), ys.max(), bins + 1)
            idx = np.clip(np.searchsorted(edges, ys, side="right") - 1, 0, bins - 1)
            count = np.bincount(idx, minlength=bins)
            filled = count > 0
            k = np.bincount(idx, weights=ys, minlength=bins)[filled] / count[filled]
            v = np.bincount(idx, weights=vs, minlength=bins)[filled] / count[filled]
            if k.size < 2:
                raise ConfigError("samples collapse into a single bin")
            branches.append((k, v))
        (kn, vn), (kp, vp) = branches

        def branch(t, k, v):
            out = np.interp(t, k, v)
            s0 = (v[1] - v[0]) / (k[1] - k[0])
            s1 = (v[-1] - v[-2]) / (k[-1] - k[-2])
            out = np.where(t < k[0], v[0] + s0 * (t - k[0]), out)
            return np.where(t > k[-1], v[-1] + s1 * (t - k[-1]), out)

        def call(t):
            t = np.asarray(t, dtype=float)
            return np.where(t < 0, branch(t, kn, vn), branch(t, kp, vp))

        lim_neg = float(branch(np.float64(0.0), kn, vn))
        lim_pos = float(branch(np.float64(0.0), kp, vp))
        lo = min(float(y.min()), lim_neg, lim_pos)
        hi = max(float(y.max()), lim_neg, lim_pos)
        return cls.from_callable(call, lo, hi,
                                 meta={**(meta or {}), "bins": bins,
                                       "empirical": True})


# ---------------------------------------------------------------------------
# Kneading sequences


@dataclass(frozen=True)
class KneadingInvariant:
    plus: str
    minus: str
    length: int
    meta: dict = field(default_factory=dict)

    def text(self) -> str:
        return f"+ : {self.plus}\n- : {self.minus}"


def kneading_sequence(G: IntervalMap1D, side: str, N: int) -> str:
    """Itinerary of the one-sided critical orbit.

    Starts at G(0+) for side "plus" (G(0-) for "minus") and records L for
    y < 0, R for y > 0.  An exact zero appends the locus marker and
    stops; leaving [lo, hi] by more than span * 1e-9 appends the escape
    marker and stops (smaller excursions are endpoint rounding, e.g. a
    critical orbit pinned at a repelling endpoint fixed point, and are
    clamped).
    """
    if N < 1:
        raise ConfigError("N must be at least 1")
    if side not in ("plus", "minus"):
        raise ConfigError(f"side must be 'plus' or 'minus', got {side!r}")
    y = G.limit_pos if side == "plus" else G.limit_neg
    tol = (G.hi - G.lo) * 1e-9
    out = []
    for _ in range(N):
        if y < G.lo or y > G.hi:
            if y < G.lo - tol or y > G.hi + tol:
                out.append(ESCAPE_MARKER)
                break
            y = min(max(y, G.lo), G.hi)
        if y == 0.0:
            out.append(LOCUS_MARKER)
            break
        out.append("L" if y < 0 else "R")
        y = float(np.asarray(G(y)).reshape(-1)[0])
    return "".join(out)


def kneading_pair(G: IntervalMap1D, N: int) -> KneadingInvariant:
    return KneadingInvariant(kneading_sequence(G, "plus", N),
                             kneading_sequence(G, "minus", N), N,
                             meta=dict(G.meta))


def compare_kneading(k1: KneadingInvariant, k2: KneadingInvariant) -> dict:
    """First-difference report across the plus and minus sequences."""
    if k1.length != k2.length:
        raise ConfigError("kneading invariants have different lengths")
    for side in ("plus", "minus"):
        a, b = getattr(k1, side), getattr(k2, side)
        for i, (x, z) in enumerate(zip(a, b)):
            if x != z:
                return {"equal": False, "side": side, "index": i,
                        "symbols": (x, z)}
        if len(a) != len(b):
            i = min(len(a), len(b))
            return {"equal": False, "side": side, "index": i,
                    "symbols": (a[i:i + 1] or None, b[i:i + 1] or None)}
    return {"equal": True}


_RANK = {"L": 0, LOCUS_MARKER: 1, ESCAPE_MARKER: 1, "R": 2}


def symbolic_order(a: str, b: str, reversing: str = "") -> int:
    """Twisted lexicographic order on itineraries: -1, 0, or +1.

    Symbols rank L < marker < R; each occurrence of a symbol in
    `reversing` (an orientation-reversing branch) flips the comparison
    for everything after it.  A proper prefix compares equal.
    """
    sign = 1
    for x, z in zip(a, b):
        if x != z:
            return sign * (1 if _RANK[x] > _RANK[z] else -1)
        if x in reversing:
            sign = -sign
    return 0


# ---------------------------------------------------------------------------
# Full-branch (Bernoulli) test


def verify_two_full_branches(G: IntervalMap1D, tol: float = 1e-6) -> bool:
    """True iff each branch image covers the whole interval [lo, hi].

    This is the sufficient condition for the full two-shift: both
    one-sided critical values sit at the interval ends, so every symbol
    sequence is realized.
    """
    if abs(G.limit_pos - G.limit_neg) <= 1e-9 * max(1.0, G.span):
        raise ConfigError("map has no discontinuity at 0; the branch test "
                          "needs a genuine two-branch map")
    edge = G.span * 1e-12
    g_lo = float(np.asarray(G(np.array([G.lo + edge])))[0])
    g_hi = float(np.asarray(G(np.array([G.hi - edge])))[0])
    plus = sorted((G.limit_pos, g_hi))
    minus = sorted((g_lo, G.limit_neg))
    return (plus[0] <= G.lo + tol and plus[1] >= G.hi - tol
            and minus[0] <= G.lo + tol and minus[1] >= G.hi - tol)


# ---------------------------------------------------------------------------
# Topological Markov chains


@dataclass
class TransitionMatrix:
    matrix: np.ndarray          # 0/1, cell -> cell
    boundaries: np.ndarray      # sorted cell edges, len = n_cells + 1
    depth: int
    spectral_radius: float
    entropy: float
    merged_cells: int = 0

    def to_json(self) -> dict:
        return {"entropy": float(self.entropy), "depth": int(self.depth),
                "spectral_radius": float(self.spectral_radius),
                "n_cells": int(self.matrix.shape[0]),
                "merged_cells": int(self.merged_cells)}

    def to_csv(self, path) -> None:
        np.savetxt(path, self.matrix, fmt="%d", delimiter=",")


def _branch_preimages(G: IntervalMap1D, target: float) -> list[float]:
    """Solve G(y) = target on each monotone branch by bisection."""
    roots = []
    edge = G.span * 1e-15
    for a, b in ((G.lo + edge, -edge), (edge, G.hi - edge)):
        fa = float(np.asarray(G(np.array([a])))[0]) - target
        fb = float(np.asarray(G(np.array([b])))[0]) - target
        if fa == 0.0:
            roots.append(a)
            continue
        if fb == 0.0:
            roots.append(b)
            continue
        if fa * fb > 0:
            continue
        x, y = a, b
        for _ in range(200):
            m = 0.5 * (x + y)
            fm = float(np.asarray(G(np.array([m])))[0]) - target
            if fm == 0.0:
                break
            if fa * fm < 0:
                y = m
            else:
                x, fa = m, fm
            if abs(y - x) < 1e-15 * G.span:
                break
        roots.append(0.5 * (x + y))
    return roots


def spectral_radius_nonneg(M: np.ndarray, rtol: float = 1e-12,
                           max_iter: int = 100_000) -> float:
    """Power iteration on M + I (shift handles periodic/reducible cases)."""
    n = M.shape[0]
    if n == 0:
        return 0.0
    A = M.astype(float) + np.eye(n)
    v = np.full(n, 1.0 / np.sqrt(n))
    r_prev = 0.0
    for _ in range(max_iter):
        w = A @ v
        r = float(np.linalg.norm(w))
        if r == 0.0:
            return 0.0
        v = w / r
        if abs(r - r_prev) <= rtol * r:
            break
        r_prev = r
    return max(r - 1.0, 0.0)


def build_transition_matrix(G: IntervalMap1D, depth: int) -> TransitionMatrix:
    """Markov chain over the preimage partition of the cut.

    Cell edges are {lo, hi} plus all preimages of 0 up to order
    depth - 1 (depth 1 is the raw two-branch partition).  Entry (i, j)
    is 1 iff the image of cell i overlaps the interior of cell j.
    """
    if depth < 1:
        raise ConfigError("depth must be at least 1")
    targets = [0.0]
    pre = [0.0]
    for _ in range(depth - 1):
        nxt = []
        for t in pre:
            nxt.extend(_branch_preimages(G, t))
        pre = [p for p in nxt if G.lo < p < G.hi]
        targets.extend(pre)
    edges = np.unique(np.concatenate([[G.lo, G.hi], targets]))
    keep = np.concatenate([[True], np.diff(edges) >= 1e-12])
    merged = int(np.sum(~keep))
    edges = edges[keep]
    if edges[-1] < G.hi - 1e-12:
        edges = np.append(edges, G.hi)
    n = edges.size - 1

    a, b = edges[:-1], edges[1:]
    width = b - a
    inset = width * 1e-4
    va = np.asarray(G(a + inset), dtype=float)
    vb = np.asarray(G(b - inset), dtype=float)
    img_lo = np.minimum(va, vb)
    img_hi = np.maximum(va, vb)
    tol = 1e-9 * G.span
    # overlap of image interval i with cell j, strictly interior
    M = ((img_lo[:, None] < b[None, :] - tol)
         & (img_hi[:, None] > a[None, :] + tol)).astype(np.uint8)
    rho = spectral_radius_nonneg(M)
    entropy = float(np.log(rho)) if rho > 1.0 else 0.0
    return TransitionMatrix(M, edges, depth, rho, entropy, merged)


# ---------------------------------------------------------------------------
# Empirical 1D reduction


def reduce_to_1d(model: SystemModel, n_transient: int = 128,
                 n_fit: int = 64, seeds: int = 400, bins: int = 512,
                 residual_threshold: float = 1e-3,
                 rng: np.random.Generator | None = None) -> IntervalMap1D:
    """Collapse a contracting-in-x return map to its 1D section map.

    Iterates a batch of random seeds, discards transients, and fits
    y_bar against y with per-branch bin means.  The RMS residual of the
    fit, relative to the section span, must stay below
    residual_threshold; otherwise the x-direction did not collapse and
    the reduction is invalid.
    """
    if model.kind != "map" or model.dim != 2:
        raise ConfigError("1D reduction expects a 2D map")
    rng = rng or np.random.default_rng(DEFAULT_SEED)
    lo, hi = model.domain.lower, model.domain.upper
    S = np.stack([rng.uniform(lo[0], hi[0], seeds),
                  rng.uniform(lo[1], hi[1], seeds)], axis=-1)
    ys, ybars = [], []
    alive = np.ones(seeds, dtype=bool)
    span = hi[1] - lo[1]
    for i in range(n_transient + n_fit):
        Sn = np.asarray(model.step_fn(S), dtype=float)
        ok = (np.isfinite(Sn).all(axis=-1) & model.domain.contains(Sn)
              & (np.abs(S[:, 1]) > 1e-12) & (np.abs(Sn[:, 1]) > 1e-12))
        alive &= ok
        if not alive.any():
            raise ReductionInvalidError(np.inf, residual_threshold)
        if i >= n_transient:
            ys.append(S[alive, 1].copy())
            ybars.append(Sn[alive, 1].copy())
        S[alive] = Sn[alive]
        # tiny jitter keeps binary-exact orbits (e.g. slope-2 branches,
        # where float doubling empties the mantissa) from collapsing;
        # pairs above are recorded before the perturbation
        S[alive, 1] = np.clip(
            S[alive, 1] + rng.uniform(-1e-9, 1e-9, int(alive.sum())) * span,
            lo[1] + 1e-12, hi[1] - 1e-12)
    y = np.concatenate(ys)
    ybar = np.concatenate(ybars)
    G = IntervalMap1D.from_samples(y, ybar, bins=bins,
                                   meta={"model": model.name,
                                         "pairs": int(y.size)})
    resid = ybar - np.asarray(G(y))
    rms = float(np.sqrt(np.mean(resid ** 2))) / max(G.span, 1e-300)
    G.meta["fit_residual"] = rms
    if rms > residual_threshold:
        raise ReductionInvalidError(rms, residual_threshold)
    return G
