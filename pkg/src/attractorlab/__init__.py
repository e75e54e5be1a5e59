"""Numerical laboratory for chaotic attractors: models, checkers, scans."""

from .analysis import (
    BoxCountResult, CellGraph, ChainAttractor, LyapunovResult,
    PeriodicOrbitRecord, box_counting_dimension, build_cell_graph,
    chain_attractor, find_periodic_points, lyapunov_spectrum,
    recurrence_times,
)
from .core import (
    DEFAULT_SEED, Domain, Locus, Orbit, StepSettings, SystemModel,
    TangentFrame, integrate_flow, iterate_map, jacobian_at,
    propagate_tangent, write_orbit_csv,
)
from .errors import (
    ConditionInconsistencyError, ConfigError, DivergenceError,
    InsufficientRecurrenceError, LabError, LocusProximityError,
    ReductionInvalidError, ResolutionTooFineError, SingularBlockError,
    StepUnderflowError,
)
from .kneading import (
    IntervalMap1D, KneadingInvariant, TransitionMatrix,
    build_transition_matrix, compare_kneading, kneading_pair,
    kneading_sequence, reduce_to_1d, spectral_radius_nonneg, symbolic_order,
    verify_two_full_branches,
)
from .runio import CODE_VERSION, RunManifest, read_json, write_csv, write_json
from .scan import (
    ScanRecord, ScanResult, ScanSpec, blue_sky_scan, channel_passage_time,
    circle_family_scan, lorenz_family_scan, run_scan, solenoid_birth_check,
)
from .verify import (
    ConditionReport, GridSpec, check_anosov_matrix, check_expansion,
    check_lorenz_conditions, check_pseudohyperbolic, check_saddle_focus_gap,
    compute_q,
)
from .zoo import (
    GeomLorenzParams, LorenzParams, MODEL_NAMES, SaddleNodeParams,
    SolidTorusParams, TrigPerturbation, WildMapParams, build_model,
    make_circle_family, make_geometric_lorenz, make_lorenz,
    make_saddle_node_flow, make_solid_torus_map, make_torus_automorphism,
    make_torus_endomorphism, make_wild_map, sine_perturbation,
)

__version__ = CODE_VERSION
