"""Command line front end tying models, verifiers, analyses, and scans.

Every subcommand resolves flags and the optional --config file into one
plain config dict, computes with randomness drawn only from the master
seed, writes its outputs into --out, and drops a manifest.json recording
the config, seed, and output hashes.  `rerun` replays a manifest into a
fresh directory and compares hashes.

Exit codes: 0 success (all conditions hold), 1 condition failure,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import (_draw_state, box_counting_dimension, build_cell_graph,
                       chain_attractor, find_periodic_points,
                       lyapunov_spectrum, recurrence_times)
from .core import (DEFAULT_SEED, StepSettings, integrate_flow, iterate_map,
                   write_orbit_csv)
from .errors import ConfigError, LabError
from .kneading import IntervalMap1D, compare_kneading, kneading_pair
from .runio import (MANIFEST_NAME, RunManifest, jsonable, read_json,
                    write_csv, write_json)
from .scan import ScanSpec, run_scan, solenoid_birth_check
from .svgplot import scatter_plot, write_svg
from .verify import (GridSpec, check_anosov_matrix, check_expansion,
                     check_lorenz_conditions, check_pseudohyperbolic)
from .zoo import MODEL_NAMES, build_model, solid_torus_params


# ---------------------------------------------------------------------------
# Flag parsing helpers


def _floats(text: str, flag: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated numbers, "
                          f"got {text!r}") from None


def _rows(text: str, flag: str) -> list:
    return [_floats(part, flag) for part in text.split(";")]


def _param_pairs(items) -> dict:
    params = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            params[key] = int(raw)
        except ValueError:
            try:
                params[key] = float(raw)
            except ValueError:
                params[key] = {"true": True, "false": False}.get(raw, raw)
    return params


def _merge(file_config: dict, overrides: dict) -> dict:
    config = dict(file_config)
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    return config


def _check_keys(config: dict, allowed, context: str) -> None:
    unknown = sorted(set(config) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {context} key(s) {unknown}; "
                          f"allowed: {sorted(allowed)}")


def _build(config: dict):
    return build_model({"model": config.get("model"),
                        "params": config.get("params", {})})


def _require(config: dict, key: str, context: str):
    if config.get(key) is None:
        raise ConfigError(f"{context} requires {key!r} (flag --{key} or "
                          "config field)")
    return config[key]


# ---------------------------------------------------------------------------
# Command bodies.  Each is a pure function of (config, seed): identical
# inputs must reproduce identical output bytes, so rerun can verify hashes.


def run_simulate(config: dict, out: Path, seed: int, threads: int):
    _check_keys(config, {"model", "params", "t", "dt", "stride", "s0"},
                "simulate config")
    model = _build(config)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    s0 = config.get("s0")
    s0 = np.asarray(s0, dtype=float) if s0 is not None \
        else _draw_state(model, rng)
    if s0.shape != (model.dim,):
        raise ConfigError(f"s0 needs {model.dim} coordinates, got {s0.size}")
    stride = int(config.get("stride", 1))
    if model.kind == "flow":
        t_end = float(config.get("t", 100.0))
        step = StepSettings(dt=float(config["dt"])) if config.get("dt") \
            else None
        orbit = integrate_flow(model, s0, t_end, step=step,
                               record_stride=stride)
    else:
        orbit = iterate_map(model, s0, int(config.get("t", 1000)))
    write_orbit_csv(out / "orbit.csv", orbit)
    note = f", truncated: {orbit.truncated}" if orbit.truncated else ""
    return (["orbit.csv"],
            f"simulate: {model.name}, {len(orbit)} samples -> orbit.csv"
            f"{note}", 0)


def _verify_report(config: dict, seed: int):
    if config.get("matrix") is not None:
        report = check_anosov_matrix(np.asarray(config["matrix"], dtype=float))
        return report.to_json(), report.passed
    model = _build(config)
    grid = GridSpec(points_per_axis=int(config["grid"])) \
        if config.get("grid") else GridSpec()
    name = model.name
    if name == "wild":
        report = check_pseudohyperbolic(model, grid)
    elif name in ("cat_map", "torus_automorphism"):
        report = check_anosov_matrix(model.structure["matrix"])
    elif name in ("torus_endomorphism", "circle", "doubling"):
        report = check_expansion(model, grid)
    elif name in ("geometric_lorenz", "pl_lorenz"):
        report = check_lorenz_conditions(model, grid)
    elif name == "solid_torus":
        p = solid_torus_params(config.get("params", {}))
        res = solenoid_birth_check(p, [p.mu_c], seed=seed)
        rec = res.records[0]
        passed = rec.tag == "solenoid"
        return {"name": "solenoid", "passed": passed, "tag": rec.tag,
                "conditions": jsonable(rec.diagnostics)}, passed
    else:
        raise ConfigError(
            f"no verifier wired for model {name!r}; verifiable models: "
            "wild, cat_map, torus_automorphism, torus_endomorphism, "
            "circle, doubling, geometric_lorenz, pl_lorenz, solid_torus")
    return report.to_json(), report.passed


def run_verify(config: dict, out: Path, seed: int, threads: int):
    _check_keys(config, {"model", "params", "matrix", "grid"},
                "verify config")
    report, passed = _verify_report(config, seed)
    write_json(out / "report.json", report)
    target = config.get("model") or "matrix"
    verdict = "all conditions hold" if passed else "condition failure"
    return (["report.json"], f"verify: {target}: {verdict} -> report.json",
            0 if passed else 1)


def _orbit_points(model, config, rng):
    """Post-transient state samples for dimension estimates."""
    n_target = int(config.get("points", 20_000))
    s0 = _draw_state(model, rng)
    if model.kind == "flow":
        stride = int(config.get("stride", 10))
        dt = float(config.get("dt", 0.01))
        t_end = float(config.get("t", (n_target * stride + 1) * dt))
        orbit = integrate_flow(model, s0, t_end, step=StepSettings(dt=dt),
                               record_stride=stride)
    else:
        orbit = iterate_map(model, s0, int(config.get("t", n_target)))
    drop = min(len(orbit) // 10, 1000)
    return orbit.states[drop:]


def run_analyze(config: dict, out: Path, seed: int, threads: int):
    kind = config.get("kind")
    kinds = ("lyapunov", "dimension", "recurrence", "periodic", "attractor")
    if kind not in kinds:
        raise ConfigError(f"unknown analysis kind {kind!r}; "
                          f"available: {', '.join(kinds)}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    if kind == "lyapunov":
        _check_keys(config, {"kind", "model", "params", "t", "k", "renorm"},
                    "analyze lyapunov config")
        model = _build(config)
        duration = float(config.get("t", 1000.0 if model.kind == "flow"
                                     else 100_000))
        result = lyapunov_spectrum(
            model, duration=duration, k=config.get("k"),
            renorm_interval=config.get("renorm"), seed=seed)
        write_json(out / "lyapunov.json", result.to_json())
        lams = ", ".join(f"{v:.6f}" for v in result.exponents)
        return (["lyapunov.json"],
                f"analyze lyapunov: {model.name}: [{lams}] "
                f"sum={result.exponents.sum():.6f} -> lyapunov.json", 0)

    if kind == "dimension":
        _check_keys(config, {"kind", "model", "params", "t", "dt", "stride",
                             "points"}, "analyze dimension config")
        model = _build(config)
        pts = _orbit_points(model, config, rng)
        est = box_counting_dimension(pts)
        write_json(out / "dimension.json", {
            "dimension": est.dimension, "r2": est.r2,
            "scales": est.scales, "counts": est.counts,
            "degenerate": est.degenerate, "n_points": len(pts)})
        return (["dimension.json"],
                f"analyze dimension: {model.name}: {est.dimension:.4f} "
                f"(r2={est.r2:.4f}) -> dimension.json", 0)

    if kind == "recurrence":
        _check_keys(config, {"kind", "model", "params", "t", "dt", "stride",
                             "center", "radius"}, "analyze recurrence config")
        model = _build(config)
        center = np.asarray(_require(config, "center", "analyze recurrence"),
                            dtype=float)
        radius = float(_require(config, "radius", "analyze recurrence"))
        s0 = _draw_state(model, rng)
        if model.kind == "flow":
            orbit = integrate_flow(
                model, s0, float(config.get("t", 1000.0)),
                step=StepSettings(dt=float(config.get("dt", 0.01))),
                record_stride=int(config.get("stride", 1)))
        else:
            orbit = iterate_map(model, s0, int(config.get("t", 100_000)))
        gaps = recurrence_times(orbit, center, radius, domain=model.domain)
        write_csv(out / "recurrence.csv", ["gap"], [[g] for g in gaps])
        return (["recurrence.csv"],
                f"analyze recurrence: {len(gaps)} gaps, "
                f"{len(np.unique(gaps))} distinct -> recurrence.csv", 0)

    if kind == "periodic":
        _check_keys(config, {"kind", "model", "params", "period", "seeds"},
                    "analyze periodic config")
        model = _build(config)
        n = int(_require(config, "period", "analyze periodic"))
        records = find_periodic_points(model, n,
                                       seeds=int(config.get("seeds", 400)),
                                       rng=rng)
        dim = model.dim
        header = (["period", "stability", "neutral"]
                  + [f"c{i}" for i in range(dim)]
                  + [f"m{i}_re" for i in range(dim)]
                  + [f"m{i}_im" for i in range(dim)])
        rows = []
        for r in records:
            mult = np.atleast_1d(r.multipliers)
            rows.append([r.period, r.stability, r.neutral]
                        + [float(v) for v in r.point]
                        + [float(m.real) for m in mult]
                        + [float(m.imag) for m in mult])
        write_csv(out / "periodic.csv", header, rows)
        n_att = sum(r.stability == "attracting" for r in records)
        return (["periodic.csv"],
                f"analyze periodic: {len(records)} points of period "
                f"dividing {n} ({n_att} attracting) -> periodic.csv", 0)

    # attractor
    _check_keys(config, {"kind", "model", "params", "h", "eps", "tau", "box",
                         "transient", "samples"}, "analyze attractor config")
    model = _build(config)
    h = float(_require(config, "h", "analyze attractor"))
    eps = float(_require(config, "eps", "analyze attractor"))
    tau = float(_require(config, "tau", "analyze attractor"))
    box = config.get("box")
    if box is None:
        box = model.structure.get("cell_box")
    if box is None:
        lo, hi = model.domain.lower, model.domain.upper
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ConfigError("analyze attractor requires --box for "
                              "unbounded models (x0,x1;y0,y1;...)")
        box = list(zip(lo.tolist(), hi.tolist()))
    box = [(float(a), float(b)) for a, b in box]
    graph = build_cell_graph(model, box, h, eps, tau,
                             samples_per_cell=int(config.get("samples", 4)),
                             rng=rng)
    s0 = np.array([rng.uniform(a + 0.25 * (b - a), b - 0.25 * (b - a))
                   for a, b in box])
    transient = float(config.get("transient", 50.0))
    if model.kind == "flow":
        orbit = integrate_flow(model, s0, transient)
    else:
        orbit = iterate_map(model, s0, max(1, int(transient)))
    cell = int(graph.locate(orbit.final_state)[0])
    if cell < 0:
        raise ConfigError("probe orbit left the box; enlarge --box or "
                          "shorten --transient")
    chain = chain_attractor(graph, cell)
    graph.cells_to_csv(out / "cells.csv", chain.cells)
    lo_c, hi_c = graph.cell_bounds(chain.cells)
    centers = 0.5 * (lo_c + hi_c)
    proj = (0, 2) if centers.shape[1] >= 3 else (0, 1)
    svg = scatter_plot(centers[:, list(proj)],
                       title=f"{model.name} attractor cells",
                       xlabel=f"c{proj[0]}", ylabel=f"c{proj[1]}")
    write_svg(out / "attractor.svg", svg)
    return (["cells.csv", "attractor.svg"],
            f"analyze attractor: {chain.cells.size} cells "
            f"(escape_reachable={chain.escape_reachable}) "
            "-> cells.csv, attractor.svg", 0)


def run_sweep(config: dict, out: Path, seed: int, threads: int):
    spec = ScanSpec.from_json(config)
    result = run_scan(spec, threads=threads)
    result.to_csv(out / "scan.csv")
    outputs = ["scan.csv"]
    if result.svg:
        write_svg(out / "scan.svg", result.svg)
        outputs.append("scan.svg")
    tags = {}
    for rec in result.records:
        tags[rec.tag] = tags.get(rec.tag, 0) + 1
    summary = ", ".join(f"{n} {t}" for t, n in sorted(tags.items()))
    return (outputs, f"scan: {spec.family}: {len(result.records)} points "
            f"({summary}) -> {', '.join(outputs)}", 0)


def run_kneading(config: dict, out: Path, seed: int, threads: int):
    _check_keys(config, {"model", "params", "slope", "depth", "compare"},
                "kneading config")
    depth = int(config.get("depth", 32))
    if config.get("model"):
        G = IntervalMap1D.from_model(_build(config))
        label = config["model"]
    elif config.get("slope") is not None:
        G = _pl_interval_map(float(config["slope"]))
        label = f"slope {config['slope']}"
    else:
        raise ConfigError("kneading needs --model or --slope")
    kn = kneading_pair(G, depth)
    lines = [f"map: {label}", kn.text()]
    if config.get("compare") is not None:
        other = kneading_pair(_pl_interval_map(float(config["compare"])),
                              depth)
        verdict = compare_kneading(kn, other)
        if verdict["equal"]:
            lines.append(f"compare slope {config['compare']}: equal")
        else:
            a, b = verdict["symbols"]
            lines.append(
                f"compare slope {config['compare']}: first difference at "
                f"index {verdict['index']} on the {verdict['side']} side "
                f"({a} vs {b})")
    text = "\n".join(lines) + "\n"
    (out / "kneading.txt").write_text(text)
    print(text, end="")
    return (["kneading.txt"], f"kneading: depth {depth} -> kneading.txt", 0)


def _pl_interval_map(slope: float) -> IntervalMap1D:
    """Two-branch demo map y -> slope*y -+ (slope - 1) on [-1, 1]."""
    if not 1.0 < slope <= 2.0:
        raise ConfigError(f"demo map slope must be in (1, 2], got {slope}")

    def G(y):
        y = np.asarray(y, dtype=float)
        return slope * y - np.sign(y) * (slope - 1.0)

    return IntervalMap1D.from_callable(G, -1.0, 1.0)


COMMANDS = {
    "simulate": run_simulate,
    "verify": run_verify,
    "analyze": run_analyze,
    "scan": run_sweep,
    "kneading": run_kneading,
}


def run_rerun(config: dict, out: Path, seed: int, threads: int):
    manifest = RunManifest.load(_require(config, "manifest", "rerun"))
    if manifest.command not in COMMANDS:
        raise ConfigError(f"manifest names unknown command "
                          f"{manifest.command!r}")
    outputs, _, code = COMMANDS[manifest.command](
        manifest.config, out, manifest.seed, threads)
    fresh = RunManifest.collect(out, manifest.command, manifest.config,
                                manifest.seed, outputs)
    stale = manifest.diff_outputs(fresh)
    missing = sorted(set(fresh.hash_map()) - set(manifest.hash_map()))
    if stale or missing:
        detail = "; ".join(filter(None, [
            f"hash mismatch: {', '.join(stale)}" if stale else "",
            f"not in manifest: {', '.join(missing)}" if missing else ""]))
        return (outputs, f"rerun: NOT reproducible ({detail})", 1)
    return (outputs,
            f"rerun: {manifest.command}: {len(outputs)} output(s) "
            "byte-identical", code)


# ---------------------------------------------------------------------------
# Argument wiring


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override")
    common.add_argument("--seed", type=int, help="master seed (default "
                        f"{DEFAULT_SEED})")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for grid scans")

    parser = argparse.ArgumentParser(
        prog="attractorlab",
        description="Numerical laboratory for strange attractors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="integrate an orbit and write it as CSV")
    p.add_argument("--model", help=f"one of: {', '.join(MODEL_NAMES)}")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="model parameter override (repeatable)")
    p.add_argument("--t", type=float, help="time span (flows) or steps (maps)")
    p.add_argument("--dt", type=float, help="integrator step")
    p.add_argument("--stride", type=int, help="record every n-th sample")
    p.add_argument("--s0", help="initial state, comma-separated")

    p = sub.add_parser("verify", parents=[common],
                       help="run the hyperbolicity checks for a model")
    p.add_argument("--model")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--matrix", help="rows 'a,b;c,d' for the integer-matrix "
                   "check (bypasses --model)")
    p.add_argument("--grid", type=int, help="sup-grid points per axis")

    p = sub.add_parser("analyze", parents=[common],
                       help="orbit statistics and attractor extraction")
    p.add_argument("kind", choices=["lyapunov", "dimension", "recurrence",
                                    "periodic", "attractor"])
    p.add_argument("--model")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--t", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--k", type=int, help="exponent count (lyapunov)")
    p.add_argument("--renorm", type=float, help="renormalization interval")
    p.add_argument("--points", type=int, help="sample target (dimension)")
    p.add_argument("--center", help="ball center, comma-separated "
                   "(recurrence)")
    p.add_argument("--radius", type=float, help="ball radius (recurrence)")
    p.add_argument("--period", type=int, help="period bound (periodic)")
    p.add_argument("--seeds", type=int, help="Newton seed count (periodic)")
    p.add_argument("--h", type=float, help="cell pitch (attractor)")
    p.add_argument("--eps", type=float, help="image inflation (attractor)")
    p.add_argument("--tau", type=float, help="transition time (attractor)")
    p.add_argument("--box", help="cell box 'x0,x1;y0,y1;...' (attractor)")
    p.add_argument("--transient", type=float,
                   help="probe transient before locating the seed cell")
    p.add_argument("--samples", type=int, help="samples per cell (attractor)")

    p = sub.add_parser("scan", parents=[common],
                       help="run a parameter sweep from a spec file")
    p.add_argument("--spec", help="scan spec JSON (or use --config)")

    p = sub.add_parser("kneading", parents=[common],
                       help="kneading invariants of a 1D section map")
    p.add_argument("--model", help="model with a built-in 1D reduction")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--slope", type=float, help="piecewise-linear demo map")
    p.add_argument("--depth", type=int, help="symbols per side (default 32)")
    p.add_argument("--compare", type=float,
                   help="second demo-map slope to compare against")

    p = sub.add_parser("rerun", parents=[common],
                       help="replay a manifest and compare output hashes")
    p.add_argument("--manifest", required=True)

    return parser


def _config_from_args(args) -> dict:
    file_config = read_json(args.config) if args.config else {}
    overrides = {}
    if getattr(args, "param", None):
        overrides["params"] = {**file_config.get("params", {}),
                               **_param_pairs(args.param)}
    for key in ("model", "t", "dt", "stride", "s0", "grid", "matrix",
                "k", "renorm", "points", "center", "radius", "period",
                "seeds", "h", "eps", "tau", "box", "transient", "samples",
                "slope", "depth", "compare", "manifest"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if isinstance(overrides.get("s0"), str):
        overrides["s0"] = _floats(overrides["s0"], "--s0")
    if isinstance(overrides.get("center"), str):
        overrides["center"] = _floats(overrides["center"], "--center")
    if isinstance(overrides.get("matrix"), str):
        overrides["matrix"] = _rows(overrides["matrix"], "--matrix")
    if isinstance(overrides.get("box"), str):
        box = _rows(overrides["box"], "--box")
        if any(len(r) != 2 for r in box):
            raise ConfigError("--box needs 'lo,hi' per axis, "
                              "semicolon-separated")
        overrides["box"] = box
    config = _merge(file_config, overrides)
    if args.command == "analyze":
        config["kind"] = args.kind
    if args.command == "scan":
        spec_path = getattr(args, "spec", None) or args.config
        if not spec_path:
            raise ConfigError("scan requires --spec (or --config) pointing "
                              "to a sweep spec JSON")
        config = read_json(spec_path)
    return config


def _seed_of(args, config: dict) -> int:
    if args.seed is not None:
        return int(args.seed)
    if isinstance(config, dict) and config.get("seed") is not None:
        return int(config["seed"])
    return DEFAULT_SEED


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        seed = _seed_of(args, config)
        if args.command == "scan":
            config = dict(config)
            config["seed"] = seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        command = args.command
        runner = run_rerun if command == "rerun" else COMMANDS[command]
        outputs, summary, code = runner(config, out, seed,
                                        max(1, int(args.threads)))
        if command != "rerun":
            RunManifest.collect(out, command, config, seed,
                                outputs).write(out)
        print(summary)
        return code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LabError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
