"""Desk-scale digital twin of a projector-based cobot control interface:
DH kinematics with numerical IK, a projected gesture GUI with press
detection, a deterministic fixed-step simulator with scripted agents,
an evaluation pipeline, and a WebSocket session gateway."""

from .kinematics import (
    DHChain,
    DHRow,
    IkOptions,
    NotConverged,
    PoseEuler,
    RigidTransform,
    dh_transform,
    extract_pose,
    fk_end,
    follower_pose,
    forward_kinematics,
    inverse_kinematics,
    projection_target_chain,
    projection_target_pose,
    rotation_from_euler_zyx,
    ur3_chain,
)
from .projection import (
    BehindCamera,
    ButtonRegion,
    CameraIntrinsics,
    DegenerateConfiguration,
    GuiLayout,
    Homography,
    PointAtInfinity,
    apply_homography,
    camera_project,
    cam_to_gui_homography,
    default_layout,
    estimate_homography,
    gui_world_pose,
    hit_test,
)
from .gesture import (
    GestureLabel,
    HandFrame,
    PressDetectorState,
    PressEvent,
    PressKind,
    canonical_frame,
    classify_gesture,
    update_press_detector,
)
from .simcore import (
    ButtonHeld,
    FaultOverflow,
    IkFailure,
    IllegalCommandForMode,
    PendantHeld,
    Simulation,
    SquareTask,
    Stick,
    WorldState,
    interpret_command,
    step,
)
from .agents import AgentSpec, parse_agent_spec, run_scripted_agent
from .metrics import (
    StatResult,
    TlxSheet,
    Trajectory,
    ZeroVariance,
    ZeroVarianceDifferences,
    build_report,
    completion_time,
    incomplete_beta,
    one_way_anova,
    paired_t_test,
    path_error,
    raw_tlx,
    rm_anova,
    session_metrics,
)
from .sessionlog import SessionLog
from .config import ConfigError, SessionConfig, load_config

__version__ = "0.1.0"
