"""Parameter sweeps over the model families.

Four sweep drivers: channel-period growth for the m=0 circle family,
solenoid certification across fiber contractions, circle-family
classification over the rotation offset, and a two-parameter exponent
map for the two-branch return-map family.  Each grid point is an
independent job whose RNG seed derives from (master seed, flat index),
so results are reproducible bit for bit and order-independent.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (DEFAULT_SEED, PlaneEvent, StepSettings, SystemModel,
                   _benettin_map_batch, integrate_flow)
from .errors import ConfigError, LabError
from .kneading import (IntervalMap1D, build_transition_matrix, kneading_pair,
                       reduce_to_1d, verify_two_full_branches)
from .svgplot import heatmap
from .verify import check_lorenz_conditions
from .zoo import (GeomLorenzParams, SaddleNodeParams, SolidTorusParams,
                  TrigPerturbation, make_circle_family,
                  make_geometric_lorenz, make_saddle_node_flow,
                  make_solid_torus_map)

__all__ = [
    "TAGS", "ScanRecord", "ScanResult", "ScanSpec", "run_scan",
    "blue_sky_scan", "solenoid_birth_check", "circle_family_scan",
    "lorenz_family_scan",
]

# closed classification vocabulary; every record's tag must come from here
TAGS = frozenset({
    "blue-sky-orbit", "hypothesis-violation",
    "solenoid", "not-a-solenoid",
    "fixed-point", "rotation", "expanding-chaos",
    "lorenz-like", "domain-escape", "reduction-invalid",
})

_FAMILY_AXES = {
    "blue_sky": ("mu",),
    "solenoid": ("mu_c",),
    "circle": ("omega",),
    "geometric_lorenz": ("mu1", "mu2"),
}

_ANALYSES = frozenset({"lyapunov", "periodic", "kneading", "verify"})

_TRIG_KEYS = ("g_amplitude", "g_harmonic", "g_phase")

_FAMILY_BASE_KEYS = {
    "blue_sky": ("omega",) + _TRIG_KEYS,
    "solenoid": ("m", "omega", "mu", "offset", "fiber_radius",
                 "pert_amplitude") + _TRIG_KEYS,
    "circle": ("m",) + _TRIG_KEYS,
    "geometric_lorenz": ("x1s", "y1s", "x2s", "y2s", "a1", "a2", "alpha"),
}


@dataclass
class ScanRecord:
    """One grid point: its parameters, classification, and diagnostics."""

    index: tuple
    params: dict
    tag: str
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ScanResult:
    """Grid of records plus enough provenance to re-run the sweep."""

    family: str
    axes: tuple                    # ((name, (values...)), ...)
    records: list
    provenance: dict = field(default_factory=dict)
    svg: str | None = None

    def __post_init__(self):
        shape = self.grid_shape()
        if len(self.records) != int(np.prod(shape)):
            raise LabError(f"expected {int(np.prod(shape))} records for grid "
                           f"{shape}, got {len(self.records)}")
        for rec in self.records:
            if rec.tag not in TAGS:
                raise LabError(f"tag {rec.tag!r} outside the closed tag set")
        self.records.sort(key=lambda r: r.index)

    def grid_shape(self) -> tuple:
        return tuple(len(vals) for _, vals in self.axes)

    def axis_values(self, name: str) -> np.ndarray:
        for axis, vals in self.axes:
            if axis == name:
                return np.asarray(vals, dtype=float)
        raise KeyError(name)

    def tag_grid(self) -> np.ndarray:
        tags = np.array([r.tag for r in self.records], dtype=object)
        return tags.reshape(self.grid_shape())

    def values_grid(self, key: str) -> np.ndarray:
        """Diagnostic values reshaped to the grid; missing/non-numeric -> nan."""
        out = np.full(len(self.records), np.nan)
        for i, rec in enumerate(self.records):
            v = rec.diagnostics.get(key)
            if isinstance(v, (int, float, np.floating, np.integer)):
                out[i] = float(v)
        return out.reshape(self.grid_shape())

    def to_csv(self, path) -> None:
        """One row per grid point: swept params, tag, diagnostics."""
        names = [name for name, _ in self.axes]
        diag_keys = sorted({k for r in self.records for k in r.diagnostics})
        with open(path, "w") as fh:
            fh.write(",".join(names + ["tag"] + diag_keys) + "\n")
            for rec in self.records:
                cells = [f"{rec.params[n]:.17g}" for n in names] + [rec.tag]
                for k in diag_keys:
                    cells.append(_csv_cell(rec.diagnostics.get(k)))
                fh.write(",".join(cells) + "\n")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    s = str(v)
    if "," in s or "\n" in s:
        raise LabError(f"diagnostic value {s!r} would break the CSV")
    return s


def _point_rng(master_seed: int, flat_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(flat_index,)))


def _map_jobs(jobs, fn, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _values_array(values, name: str) -> np.ndarray:
    vals = np.asarray(values, dtype=float).reshape(-1)
    if vals.size == 0:
        raise ConfigError(f"{name} sweep needs at least one value")
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"{name} sweep contains non-finite values")
    return vals


def _provenance(family, base, axes, seed, analyses) -> dict:
    from . import __version__
    return {"family": family, "base": base,
            "axes": {name: [float(v) for v in vals] for name, vals in axes},
            "seed": int(seed), "analyses": list(analyses),
            "package_version": __version__}


# ---------------------------------------------------------------------------
# Blue-sky channel sweep


def _theta_lift(model: SystemModel):
    """(lift F, slope F') for the angular coordinate of a skew family."""
    st = model.structure
    if "lift" in st:
        F = st["lift"]
    elif model.name == "solid_torus":
        m, g, omega = st["m"], st["g"], model.params["omega"]

        def F(t):
            t = np.asarray(t, dtype=float)
            base = m * t + omega
            return base + g(t) if g is not None else base
    else:
        raise ConfigError(f"model {model.name!r} has no angular lift; "
                          "expected a circle or solid-torus family")
    gp = st.get("gprime")
    m = st["m"]

    def slope(t):
        t = np.asarray(t, dtype=float)
        if gp is not None:
            return m + gp(t)
        h = 1e-6
        return (F(t + h) - F(t - h)) / (2.0 * h)
    return F, slope


def _circle_fixed_points(F, slope, samples: int = 8192):
    """Attracting/repelling fixed points of t -> F(t) mod 1 on [0, 1).

    Returns (attracting list, crossing count).  Crossings are located by
    sign changes of the wrapped displacement and refined by bisection on
    the lift.
    """
    ts = np.linspace(0.0, 1.0, samples + 1)
    d = np.mod(np.asarray(F(ts)) - ts + 0.5, 1.0) - 0.5
    attracting, crossings = [], 0
    for i in range(samples):
        a, b = d[i], d[i + 1]
        if a == 0.0:
            a = 1e-300
        # a genuine root; displacement jumps of ~1 are wrap artifacts
        if a * b > 0 or abs(a) + abs(b) > 0.5:
            continue
        crossings += 1
        lo, hi = ts[i], ts[i + 1]
        k = round(float(F(0.5 * (lo + hi))) - 0.5 * (lo + hi))
        flo = float(F(lo)) - lo - k
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = float(F(mid)) - mid - k
            if flo * fm <= 0:
                hi = mid
            else:
                lo, flo = mid, fm
        root = 0.5 * (lo + hi) % 1.0
        if abs(float(slope(root))) < 1.0:
            attracting.append(root)
    return attracting, crossings


def channel_passage_time(mu: float, tol: float = 1e-10) -> float:
    """Time for dz = mu + z^2 to cross the channel from z=-1 to z=+1."""
    if mu <= 0:
        raise ConfigError(f"channel passage needs mu > 0, got {mu}")
    model = make_saddle_node_flow(SaddleNodeParams(mu=float(mu)))
    cfg = StepSettings(dt=0.01, adaptive=True, tol=tol)
    orbit = integrate_flow(model, [-1.0], t_end=10.0 + 4.0 / np.sqrt(mu),
                           step=cfg, events=[PlaneEvent(0, 1.0, direction=1)],
                           record_stride=10 ** 9)
    if not orbit.meta["events"]:
        raise LabError(f"channel exit not reached for mu={mu}")
    return float(orbit.times[-1])


def blue_sky_scan(model: SystemModel, mu_values, seed: int = DEFAULT_SEED,
                  pre_samples: int = 4096, threads: int = 1) -> ScanResult:
    """Orbit-period sweep for the circle return family as mu -> 0.

    The family's return map must have m=0 and a contracting displacement
    (max |g'| < 1, sampled); then the map has a unique attracting fixed
    point, and the reconstructed flow period at each mu is the number of
    attracting fixed points times the slow-channel passage time.  A point
    whose attracting fixed-point count differs from one is tagged
    hypothesis-violation instead.
    """
    if model.structure.get("m") != 0:
        raise ConfigError("blue-sky sweep needs an m=0 family, got "
                          f"m={model.structure.get('m')!r}")
    F, slope = _theta_lift(model)
    ts = np.linspace(0.0, 1.0, pre_samples, endpoint=False)
    g_slope_max = float(np.max(np.abs(np.asarray(slope(ts)))))
    if g_slope_max >= 1.0:
        raise ConfigError("return map is not a contraction: sampled "
                          f"max |g'| = {g_slope_max:.6g} >= 1")
    mus = _values_array(mu_values, "mu")
    if np.any(mus <= 0):
        raise ConfigError("blue-sky sweep needs mu > 0")

    attracting, crossings = _circle_fixed_points(F, slope)

    def job(item):
        flat, mu = item
        n_attr = len(attracting)
        passage = channel_passage_time(mu)
        if n_attr == 1:
            tag = "blue-sky-orbit"
            period = passage
        else:
            tag = "hypothesis-violation"
            period = n_attr * passage if n_attr else float("nan")
        return ScanRecord(
            index=(flat,), params={"mu": float(mu)}, tag=tag,
            diagnostics={"theta_star": attracting[0] if n_attr else float("nan"),
                         "n_attracting": n_attr, "n_crossings": crossings,
                         "passage_time": passage, "period": period,
                         "g_slope_max": g_slope_max})

    records = _map_jobs(list(enumerate(mus)), job, threads)
    axes = (("mu", tuple(float(m) for m in mus)),)
    prov = _provenance("blue_sky", {"model": model.name,
                                    "params": dict(model.params)},
                       axes, seed, ("periodic",))
    return ScanResult("blue_sky", axes, records, prov)


# ---------------------------------------------------------------------------
# Solenoid certification sweep


def _theta_preimages(F, m: int, target: float) -> np.ndarray:
    """The m solutions of F(t) = target (mod 1) for an increasing lift."""
    roots = []
    F0 = float(F(0.0))
    for j in range(m):
        goal = F0 + (target - F0) % 1.0 + j
        lo, hi = 0.0, 1.0
        flo = F0 - goal
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if (float(F(mid)) - goal) * flo <= 0:
                hi = mid
            else:
                lo = mid
        roots.append(0.5 * (lo + hi))
    return np.asarray(roots)


def _disjointness(model: SystemModel, theta_samples: int):
    """(worst gap, witness theta) between branch images of the fiber disk.

    Gap is the minimum distance between image-disk centers over a common
    target fiber minus both disk radii; positive certifies pairwise
    disjoint images.  The built-in family with g=0 has equally spaced
    centers, giving a closed-form chord; otherwise centers are sampled
    densely over target fibers and deflated by a sampled Lipschitz bound.
    """
    st = model.structure
    m, mu_c, off, r = st["m"], st["mu_c"], st["offset"], st["fiber_radius"]
    radius = mu_c * r + st["f_bound"]
    if st["g"] is None:
        chord = 2.0 * off * np.sin(np.pi / abs(m))
        return float(chord - 2.0 * radius), 0.0

    if m < 0:
        raise ConfigError("sampled disjointness needs m >= 2; negative m "
                          "is only supported for the unperturbed family")
    F, slope = _theta_lift(model)
    ts = np.linspace(0.0, 1.0, 2048, endpoint=False)
    Fp = np.asarray(slope(ts))
    Fp_min = float(Fp.min())
    if Fp_min <= 1.0:
        raise ConfigError("solenoid check needs an expanding angular lift")
    worst_gap, witness = np.inf, 0.0
    targets = np.linspace(0.0, 1.0, theta_samples, endpoint=False)
    for th0 in targets:
        pre = _theta_preimages(F, m, th0)
        u = 2.0 * np.pi * pre
        centers = off * np.stack([np.cos(u), np.sin(u)], axis=-1)
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        dist[np.arange(len(pre)), np.arange(len(pre))] = np.inf
        gap = float(dist.min()) - 2.0 * radius
        if gap < worst_gap:
            worst_gap, witness = gap, float(th0)
    # center positions move at most 2 pi off / F'_min per unit of target
    # angle; deflate by one grid cell of that motion plus the h-handle slack
    lip = 2.0 * np.pi * off / Fp_min
    slack = lip * (1.0 / theta_samples + st["h_bound"] / Fp_min)
    return float(worst_gap - 2.0 * slack), witness


def _fiber_section_dimension(model: SystemModel, rng, slab_halfwidth: float,
                             n_orbits: int, n_steps: int, n_transient: int):
    """Box dimension of the attractor's fiber section {|theta - 1/2| < w}.

    The angular coordinate gets sub-resolution jitter each step: exact
    angle doubling shifts one mantissa bit out per step, so every float
    angle is dyadic and would lock onto 0 within ~53 iterations.  The
    jitter only smooths the sampled measure far below the coarsest
    counting scale.
    """
    st = model.structure
    r = st["fiber_radius"]
    S = np.stack([rng.uniform(-0.5 * r, 0.5 * r, n_orbits),
                  rng.uniform(-0.5 * r, 0.5 * r, n_orbits),
                  rng.uniform(0.0, 1.0, n_orbits)], axis=-1)
    pts = []
    for i in range(n_transient + n_steps):
        S = model.wrap(np.asarray(model.step_fn(S), dtype=float))
        S[:, 2] = (S[:, 2] + rng.uniform(0.0, 1e-9, n_orbits)) % 1.0
        if i >= n_transient:
            hit = np.abs(S[:, 2] - 0.5) < slab_halfwidth
            if hit.any():
                pts.append(S[hit, :2].copy())
    P = np.concatenate(pts) if pts else np.empty((0, 2))
    spread = float(np.max(P.max(0) - P.min(0))) if len(P) else 0.0
    if len(P) < 10_000 or spread < 1e-9:
        return 0.0, float("nan"), len(P)
    # scales sit exactly on the contraction ladder: between levels the box
    # count of a set this lacunary is a staircase and a fit through it
    # measures the treads, not the set.  The finest level must also clear
    # the slab smear (section points drift with the fiber centers across
    # the slab's angular thickness).
    base = min(max(st["mu_c"], 0.05), 0.5)
    drift = 2.0 * np.pi * st["offset"] / (1.0 - base / max(abs(st["m"]), 2))
    floor_scale = 4.0 * slab_halfwidth * max(drift, 1.0)
    scales = [spread * base ** k for k in range(1, 5)]
    scales = [s for s in scales if s >= floor_scale]
    if len(scales) < 3:
        return 0.0, float("nan"), len(P)
    counts = np.empty(len(scales))
    for i, h in enumerate(scales):
        tot = 0
        for _ in range(8):  # grid-offset average kills box alignment noise
            cells = np.floor((P - rng.uniform(0.0, h, 2)) / h).astype(np.int64)
            tot += np.unique(cells, axis=0).shape[0]
        counts[i] = tot / 8.0
    x, y = np.log(scales), np.log(counts)
    slope, icept = np.polyfit(x, y, 1)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - slope * x - icept) ** 2)) / ss if ss > 0 else 0.0
    return float(-slope), float(r2), len(P)


def solenoid_birth_check(p: SolidTorusParams, mu_c_values,
                         seed: int = DEFAULT_SEED, theta_samples: int = 512,
                         slab_halfwidth: float = 1e-4, n_orbits: int = 6144,
                         n_steps: int = 12_000, threads: int = 1) -> ScanResult:
    """Certify the solenoid conditions across fiber contractions mu_c.

    Per point: (i) angular expansion |d theta_bar / d theta| > 1 sampled
    densely, (ii) branch images of the fiber disk pairwise disjoint,
    (iii) fiber-section box dimension inside (0, 1).  All three passing
    tags the point solenoid; any failure tags not-a-solenoid with the
    failing condition and witness recorded.

    Defaults resolve the section ladder for mu_c in roughly [0.12, 0.5];
    thinner solenoids need a smaller slab_halfwidth and more orbit steps
    to certify (iii).
    """
    if abs(int(p.m)) < 2:
        raise ConfigError(f"solenoid family needs |m| >= 2, got m={p.m}")
    mus = _values_array(mu_c_values, "mu_c")

    def job(item):
        flat, mu_c = item
        rng = _point_rng(seed, flat)
        params = {"mu_c": float(mu_c)}
        try:
            model = make_solid_torus_map(replace(p, mu_c=float(mu_c)))
        except ConfigError as exc:
            return ScanRecord((flat,), params, "not-a-solenoid",
                              {"failed": "construction", "reason": str(exc).replace(",", ";")})
        ts = np.linspace(0.0, 1.0, 4096, endpoint=False)
        if model.jacobian is not None:
            probe = np.stack([np.zeros_like(ts), np.zeros_like(ts), ts], axis=-1)
            slopes = np.abs(model.jacobian(probe)[:, 2, 2])
        else:
            _, slope = _theta_lift(model)
            slopes = np.abs(np.asarray(slope(ts)))
        margin = float(slopes.min()) - 1.0
        gap, witness = _disjointness(model, theta_samples)
        dim, r2, n_pts = _fiber_section_dimension(
            model, rng, slab_halfwidth, n_orbits, n_steps, n_transient=64)
        diag = {"expansion_margin": margin, "disjoint_gap": gap,
                "fiber_dim": dim, "fiber_dim_r2": r2,
                "section_points": n_pts}
        if margin <= 0.0:
            diag["failed"] = "expansion"
            diag["witness_theta"] = float(ts[int(np.argmin(slopes))])
            return ScanRecord((flat,), params, "not-a-solenoid", diag)
        if gap <= 0.0:
            diag["failed"] = "disjointness"
            diag["witness_theta"] = witness
            return ScanRecord((flat,), params, "not-a-solenoid", diag)
        if not (0.0 < dim < 1.0):
            diag["failed"] = "fiber-dimension"
            return ScanRecord((flat,), params, "not-a-solenoid", diag)
        return ScanRecord((flat,), params, "solenoid", diag)

    records = _map_jobs(list(enumerate(mus)), job, threads)
    axes = (("mu_c", tuple(float(m) for m in mus)),)
    prov = _provenance("solenoid", {"m": p.m, "omega": p.omega, "mu": p.mu,
                                    "offset": p.offset,
                                    "fiber_radius": p.fiber_radius,
                                    "pert_amplitude": p.pert_amplitude},
                       axes, seed, ("verify",))
    return ScanResult("solenoid", axes, records, prov)


# ---------------------------------------------------------------------------
# Circle-family classification sweep


def circle_family_scan(m: int, g, omega_values, seed: int = DEFAULT_SEED,
                       n_steps: int = 20_000, threads: int = 1) -> ScanResult:
    """Classify theta -> m theta + g + omega per omega.

    Classes partition the grid: fixed-point (negative measured exponent,
    or m=0 with a sampled contraction), rotation (exponent zero within
    1e-6), expanding-chaos (positive exponent).
    """
    m = int(m)
    omegas = _values_array(omega_values, "omega")
    gp = getattr(g, "deriv", None)
    if g is not None and gp is None:
        raise ConfigError("perturbation needs an analytic derivative "
                          "(use TrigPerturbation)")
    ts = np.linspace(0.0, 1.0, 4096, endpoint=False)
    g_slope_max = float(np.max(np.abs(gp(ts)))) if g is not None else 0.0
    contraction = m == 0 and g_slope_max < 1.0

    def job(item):
        flat, omega = item
        rng = _point_rng(seed, flat)
        model = make_circle_family(m, g, float(omega))
        s0 = np.array([[rng.uniform(0.0, 1.0)]])
        log_sums, steps, _ = _benettin_map_batch(model, s0, n_steps, 1,
                                                 renorm_interval=10)
        lam = float(log_sums[0, 0] / max(int(steps[0]), 1))
        diag = {"lambda1": lam, "g_slope_max": g_slope_max,
                "theta_star": float("nan")}
        if contraction:
            th = s0[0]
            for _ in range(2000):
                th = model.wrap(np.asarray(model.step_fn(th), dtype=float))
            delta = float(np.asarray(model.step_fn(th))[0]) - float(th[0])
            diag["theta_star"] = float(th[0])
            diag["fp_residual"] = abs((delta + 0.5) % 1.0 - 0.5)
            tag = "fixed-point"
        elif lam > 1e-6:
            tag = "expanding-chaos"
        elif lam < -1e-6:
            tag = "fixed-point"
        else:
            tag = "rotation"
        return ScanRecord((flat,), {"omega": float(omega)}, tag, diag)

    records = _map_jobs(list(enumerate(omegas)), job, threads)
    axes = (("omega", tuple(float(w) for w in omegas)),)
    prov = _provenance("circle", {"m": m, "g": repr(g) if g is not None else None},
                       axes, seed, ("lyapunov",))
    return ScanResult("circle", axes, records, prov)


# ---------------------------------------------------------------------------
# Two-parameter Lorenz-family sweep


def lorenz_family_scan(base: GeomLorenzParams, mu1_values, mu2_values,
                       seed: int = DEFAULT_SEED, n_steps: int = 4000,
                       n_seeds: int = 4, kneading_depth: int = 16,
                       entropy_depth: int = 6, check_reduction: bool = True,
                       with_svg: bool = True, threads: int = 1) -> ScanResult:
    """Exponent/kneading map over separatrix shifts (mu1, mu2).

    Each point shifts the branch limit values (y1s + mu1, y2s - mu2),
    then records the top map exponent, the kneading pair and full-branch
    flag of the 1D section map, and a partition entropy.  Points whose
    orbits leave the section are tagged domain-escape; points whose
    x-direction fails to collapse are tagged reduction-invalid.
    """
    report = check_lorenz_conditions(make_geometric_lorenz(base))
    if not report.passed:
        bad = [c.condition for c in report.conditions if not c.holds]
        raise ConfigError(f"base parameters fail condition(s) {bad}")
    mu1s = _values_array(mu1_values, "mu1")
    mu2s = _values_array(mu2_values, "mu2")
    shape = (mu1s.size, mu2s.size)

    def job(item):
        flat, (i, j) = item
        rng = _point_rng(seed, flat)
        mu1, mu2 = float(mu1s[i]), float(mu2s[j])
        params = {"mu1": mu1, "mu2": mu2}
        try:
            model = make_geometric_lorenz(replace(
                base, y1s=base.y1s + mu1, y2s=base.y2s - mu2))
        except ConfigError:
            return ScanRecord((i, j), params, "domain-escape",
                              {"escape_fraction": 1.0})
        # a branch whose image pokes out of the section interval feeds
        # orbits into the runaway region no matter how thin the strip is,
        # so detect the overshoot exactly instead of waiting for an orbit
        # to find it
        try:
            G = IntervalMap1D.from_model(model)
        except ConfigError as exc:
            return ScanRecord((i, j), params, "reduction-invalid",
                              {"reduction_error": str(exc).replace(",", ";")})
        edge = G.span * 1e-12
        vals = [G.limit_pos, G.limit_neg,
                float(np.asarray(G(np.array([G.lo + edge])))[0]),
                float(np.asarray(G(np.array([G.hi - edge])))[0])]
        overshoot = max(G.lo - min(vals), max(vals) - G.hi)
        if overshoot > G.span * 1e-9:
            return ScanRecord((i, j), params, "domain-escape",
                              {"overshoot": float(overshoot)})
        # seed inside the section strip; the outer part of the box is the
        # runaway region and every orbit started there is meant to leave
        ylo, yhi = sorted(model.structure["section_limits"])
        pad = 0.05 * (yhi - ylo)
        S0 = np.stack([rng.uniform(-0.9, 0.9, n_seeds),
                       rng.uniform(ylo + pad, yhi - pad, n_seeds)], axis=-1)
        log_sums, steps, _ = _benettin_map_batch(model, S0, n_steps, 1,
                                                 renorm_interval=5)
        valid = steps >= n_steps // 2
        escape_fraction = 1.0 - valid.mean()
        diag = {"escape_fraction": float(escape_fraction)}
        if valid.sum() < max(1, n_seeds // 2):
            return ScanRecord((i, j), params, "domain-escape", diag)
        diag["lambda1"] = float(np.median(log_sums[valid, 0] / steps[valid]))
        if check_reduction:
            try:
                fit = reduce_to_1d(model, seeds=128, n_transient=64,
                                   n_fit=32, rng=rng)
                diag["fit_residual"] = float(fit.meta["fit_residual"])
            except LabError as exc:
                diag["reduction_error"] = str(exc).replace(",", ";")
                return ScanRecord((i, j), params, "reduction-invalid", diag)
        kn = kneading_pair(G, kneading_depth)
        diag["kneading_plus"] = kn.plus
        diag["kneading_minus"] = kn.minus
        try:
            diag["full_branch"] = verify_two_full_branches(G)
        except ConfigError:
            diag["reduction_error"] = "section map has no cut"
            return ScanRecord((i, j), params, "reduction-invalid", diag)
        diag["entropy"] = float(build_transition_matrix(G, entropy_depth).entropy)
        return ScanRecord((i, j), params, "lorenz-like", diag)

    jobs = list(enumerate(np.ndindex(shape)))
    records = _map_jobs(jobs, job, threads)
    axes = (("mu1", tuple(float(v) for v in mu1s)),
            ("mu2", tuple(float(v) for v in mu2s)))
    prov = _provenance("geometric_lorenz",
                       {"x1s": base.x1s, "y1s": base.y1s, "x2s": base.x2s,
                        "y2s": base.y2s, "a1": base.a1, "a2": base.a2,
                        "alpha": base.alpha},
                       axes, seed, ("lyapunov", "kneading", "verify"))
    result = ScanResult("geometric_lorenz", axes, records, prov)
    if with_svg:
        Z = result.values_grid("lambda1").T  # rows follow mu2 for plotting
        result.svg = heatmap(
            Z, (mu1s.min(), mu1s.max()), (mu2s.min(), mu2s.max()),
            title="top exponent", xlabel="mu1", ylabel="mu2")
    return result


# ---------------------------------------------------------------------------
# Declarative sweep specs (the CLI entry point)


@dataclass
class ScanSpec:
    """Validated description of a sweep: family, axes, base, seed."""

    family: str
    sweep: dict
    base: dict = field(default_factory=dict)
    analyses: tuple = ()
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.family not in _FAMILY_AXES:
            raise ConfigError(f"unknown scan family {self.family!r}; "
                              f"available: {', '.join(sorted(_FAMILY_AXES))}")
        allowed = _FAMILY_AXES[self.family]
        for name in self.sweep:
            if name not in allowed:
                raise ConfigError(f"swept parameter {name!r} not in family "
                                  f"{self.family!r}; allowed: {allowed}")
        if not self.sweep:
            raise ConfigError("spec sweeps no parameters")
        clean = {}
        for name, values in self.sweep.items():
            vals = _values_array(values, name)
            if vals.size < 2:
                raise ConfigError(f"sweep axis {name!r} needs at least 2 "
                                  f"values, got {vals.size}")
            clean[name] = [float(v) for v in vals]
        self.sweep = clean
        bad_base = set(self.base) - set(_FAMILY_BASE_KEYS[self.family])
        if bad_base:
            raise ConfigError(f"unknown base parameter(s) {sorted(bad_base)} "
                              f"for family {self.family!r}")
        bad = set(self.analyses) - _ANALYSES
        if bad:
            raise ConfigError(f"unknown analyses {sorted(bad)}; "
                              f"allowed: {sorted(_ANALYSES)}")
        self.analyses = tuple(self.analyses)
        self.seed = int(self.seed)

    @classmethod
    def from_json(cls, obj) -> "ScanSpec":
        """Parse a spec dict; axes are [lo, hi, n], [lo, hi, n, "log"], or
        {"values": [...]}."""
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        if not isinstance(obj, dict):
            raise ConfigError("scan spec must be a JSON object")
        extra = set(obj) - {"family", "sweep", "base", "analyses", "seed"}
        if extra:
            raise ConfigError(f"unknown spec key(s) {sorted(extra)}")
        if "family" not in obj:
            raise ConfigError("spec is missing 'family'")
        raw_sweep = obj.get("sweep")
        if not isinstance(raw_sweep, dict) or not raw_sweep:
            raise ConfigError("spec needs a non-empty 'sweep' object")
        sweep = {name: _parse_axis(name, ax) for name, ax in raw_sweep.items()}
        return cls(family=obj["family"], sweep=sweep,
                   base=dict(obj.get("base", {})),
                   analyses=tuple(obj.get("analyses", ())),
                   seed=obj.get("seed", DEFAULT_SEED))

    def to_json(self) -> dict:
        return {"family": self.family,
                "sweep": {k: {"values": v} for k, v in self.sweep.items()},
                "base": dict(self.base), "analyses": list(self.analyses),
                "seed": self.seed}


def _parse_axis(name: str, ax) -> list:
    if isinstance(ax, dict):
        if set(ax) != {"values"}:
            raise ConfigError(f"axis {name!r} object must have only 'values'")
        return list(ax["values"])
    if not isinstance(ax, (list, tuple)):
        raise ConfigError(f"axis {name!r} must be [lo, hi, n] or "
                          "{'values': [...]}")
    if len(ax) == 4 and ax[3] == "log":
        lo, hi, n = float(ax[0]), float(ax[1]), int(ax[2])
        if lo <= 0 or hi <= 0:
            raise ConfigError(f"log axis {name!r} needs positive bounds")
        return list(np.geomspace(lo, hi, n))
    if len(ax) == 3:
        return list(np.linspace(float(ax[0]), float(ax[1]), int(ax[2])))
    raise ConfigError(f"axis {name!r} must be [lo, hi, n], "
                      "[lo, hi, n, 'log'], or {'values': [...]}")


def _base_perturbation(base: dict):
    amp = base.get("g_amplitude", 0.0)
    if not amp:
        return None
    return TrigPerturbation(float(amp), int(base.get("g_harmonic", 1)),
                            float(base.get("g_phase", 0.0)))


def run_scan(spec: ScanSpec, threads: int = 1) -> ScanResult:
    """Dispatch a validated spec to its family driver."""
    base = dict(spec.base)
    if spec.family == "blue_sky":
        model = make_circle_family(0, _base_perturbation(base),
                                   float(base.get("omega", 0.0)))
        return blue_sky_scan(model, spec.sweep["mu"], seed=spec.seed,
                             threads=threads)
    if spec.family == "solenoid":
        p = SolidTorusParams(
            m=int(base.get("m", 2)), omega=float(base.get("omega", 0.0)),
            mu=float(base.get("mu", 0.0)),
            offset=float(base.get("offset", 0.25)),
            fiber_radius=float(base.get("fiber_radius", 1.0)),
            g=_base_perturbation(base),
            pert_amplitude=float(base.get("pert_amplitude", 0.0)))
        return solenoid_birth_check(p, spec.sweep["mu_c"], seed=spec.seed,
                                    threads=threads)
    if spec.family == "circle":
        return circle_family_scan(int(base.get("m", 1)),
                                  _base_perturbation(base),
                                  spec.sweep["omega"], seed=spec.seed,
                                  threads=threads)
    if spec.family == "geometric_lorenz":
        if set(spec.sweep) != {"mu1", "mu2"}:
            raise ConfigError("geometric_lorenz sweep needs both mu1 and mu2")
        params = GeomLorenzParams(
            **{k: float(base[k]) for k in
               ("x1s", "y1s", "x2s", "y2s", "a1", "a2", "alpha") if k in base})
        return lorenz_family_scan(params, spec.sweep["mu1"],
                                  spec.sweep["mu2"], seed=spec.seed,
                                  threads=threads)
    raise ConfigError(f"unknown scan family {spec.family!r}")
