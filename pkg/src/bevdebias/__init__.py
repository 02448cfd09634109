"""Perspective-debiasing geometry toolkit for multi-camera BEV detection."""

from .bias import (
    BiasCoefficients,
    BiasDecomposition,
    analytic_bias,
    bias_coefficients,
    oracle_bias,
)
from .config import GridConfig, LossConfig, NoiseConfig, RenderConfig, RunConfig
from .geometry import (
    CameraModel,
    EgoPoint,
    Extrinsics,
    Intrinsics,
    PixelPoint,
    euler_pose,
    project,
    unproject,
    yaw_only_extrinsics,
)
from .ifv import BEVGrid, HeightLogits, IFVolume, lift_to_ifv, nearest_voxel, voxel_center
from .losses import (
    LossReport,
    LossWeights,
    bce_depth,
    consistency_loss,
    focal_loss,
    l1_masked,
    sharpen_pseudo,
    to_actual_depth,
    to_virtual_depth,
    total_loss,
)
from .metrics import (
    Detection,
    MetricsReport,
    average_precision,
    evaluate_detections,
    match_detections,
    nds_star,
    tp_errors,
)
from .pipeline import run_pipeline
from .rendering import (
    PosePerturbation,
    RayBundle,
    RenderedFeatureMap,
    make_rays,
    perturb_pose,
    render_view,
)
from .simulator import (
    DomainShiftSpec,
    SceneAnnotation,
    SceneSpec,
    generate_scene,
    inject_bias,
    rig_preset,
    synthesize_bev,
    synthesize_pseudo_2d,
)
from .targets import (
    Box3D,
    DepthTargets,
    TargetMaps,
    build_depth_targets,
    build_targets,
    gaussian_radius,
    project_box_center,
)

__version__ = "0.1.0"
