"""Embodied chain-of-thought tooling for robot trajectory datasets.

Converts raw trajectories into per-timestep reasoning annotations
(task, plan, sub-task, movement primitive, gripper pixels, object boxes),
provides the chain parser and intervention editor, and simulates serving
strategies that trade reasoning freshness for control frequency.
"""

from .annotators import (
    BridgeAnnotator,
    MockAnnotator,
    PlanAnnotation,
    SceneDescription,
    filter_detections,
    make_annotator,
)
from .chains import (
    ACTION_TOKENS,
    Layout,
    ReasoningChain,
    TokenBudget,
    assemble,
    count_tokens,
    default_token_estimator,
    parse,
    serialize,
)
from .data import (
    ACTION_DIM,
    BoundingBox,
    RobotState,
    Step,
    Trajectory,
    read_dataset,
    write_dataset,
)
from .intervention import (
    FREEZE_HORIZON,
    Correction,
    ExecutorState,
    PromptCorrector,
    RuleBasedCorrector,
    apply_freeze,
    correct,
)
from .movement import (
    AxisMap,
    MovementLabel,
    classify_move,
    label_trajectory,
    parse_label,
    render_label,
    vocabulary,
)
from .pipeline import PipelineConfig, RunReport, build_config, run, stats
from .projection import (
    Correspondence,
    RansacConfig,
    annotate_gripper_track,
    canonicalize,
    fit_projection,
    project,
)
from .scheduler import (
    ASYNC,
    NAIVE,
    CalibrationResult,
    ChainProfile,
    CostModel,
    ScheduleTrace,
    Strategy,
    calibrate,
    simulate,
    sync_freeze,
)

__version__ = "0.1.0"
