"""Random dyadic fractal measures, curve nets, and tube-cover experiments."""

from .config import ConfigError, ExperimentConfig, validate_config
from .convex import (
    ConvexCode,
    InvalidCurveError,
    NetTooLargeError,
    StaircaseFamily,
    code_reconstruct,
    convex_breakpoints,
    convex_code,
    convex_net,
    dyadic_augment,
    sample_convex_functions,
    staircase_family,
)
from .curves import (
    ConvexGraph,
    CurveError,
    Line,
    NumericFailure,
    PLGraph,
    PolyGraph,
    TubeSpec,
    curve_levelset_length,
    curve_to_json,
    graph_arc_length,
    line_box_length,
    parse_curve,
    sup_distance,
)
from .fractal import (
    DyadicCube,
    FractalError,
    LevelSet,
    build_levels,
    cell_measure,
    level0,
    load_levelset,
    save_levelset,
    subdivide,
)
from .gauges import (
    GaugeError,
    GaugeSpec,
    InvalidGaugeError,
    Schedule,
    build_schedule,
    eval_gauge,
    verify_gauge_conditions,
)
from .nets import (
    LineNet,
    calibrate_net_slack,
    line_net,
    poly_graph_net,
    random_lines,
    verify_line_net_domination,
)
from .rng import RngStream
from .runner import RunResult, run_experiment
from .stats import (
    StatsError,
    box_cover_count,
    fiber_cover_count,
    greedy_interval_cover,
    line_y_values,
    levels_line_y,
    martingale_ensemble,
    optimal_interval_cover,
    projection_density_sup,
    sup_over_net,
    tube_cover_certificate,
    tube_mass_ratio,
    y_value,
)

__version__ = "0.1.0"
