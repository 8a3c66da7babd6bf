"""GenGrid platform simulator: a lattice of locally-communicating light/hall
cells plus open-loop differential-drive robots, with a seeded trial runner,
telemetry export and a live steering bridge."""

__version__ = "0.1.0"

from .grid import (
    Cell,
    CellId,
    CellProgram,
    Grid,
    LedBank,
    ProgramKind,
    Side,
    broadcast_brightness,
    build_grid,
)
from .world import (
    KinematicConstants,
    MagnetSpec,
    MotionCommand,
    NoiseModel,
    Pose,
    Robot,
    SensorFrame,
    World,
    WorldConfig,
)
from .behaviors import BehaviorKind, BehaviorState, HopPlan
from .scenarios import (
    ExperimentReport,
    ScenarioSpec,
    TrialRecord,
    builtin_scenarios,
    calibrate_noise,
    find_scenario,
    load_scenario,
    run_experiment,
    run_trial,
)
from .telemetry import (
    Heatmap,
    ProbabilityMap,
    export_report,
    hop_probability_map,
    occupancy_heatmap,
    trace_hash,
)

__all__ = [
    "BehaviorKind",
    "BehaviorState",
    "Cell",
    "CellId",
    "CellProgram",
    "ExperimentReport",
    "Grid",
    "Heatmap",
    "HopPlan",
    "KinematicConstants",
    "LedBank",
    "MagnetSpec",
    "MotionCommand",
    "NoiseModel",
    "Pose",
    "ProbabilityMap",
    "ProgramKind",
    "Robot",
    "ScenarioSpec",
    "SensorFrame",
    "Side",
    "TrialRecord",
    "World",
    "WorldConfig",
    "broadcast_brightness",
    "build_grid",
    "builtin_scenarios",
    "calibrate_noise",
    "export_report",
    "find_scenario",
    "hop_probability_map",
    "load_scenario",
    "occupancy_heatmap",
    "run_experiment",
    "run_trial",
    "trace_hash",
]
