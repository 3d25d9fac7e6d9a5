"""Deterministic keypoint-driven pose transfer for triangle meshes."""

from .kinematics import (
    EPS_LENGTH,
    EPS_PARALLEL,
    BoneTransformSet,
    JointRegressor,
    KeypointSet,
    KinematicTree,
    TwistAngles,
    bundled_tree,
    compose_relative,
    forward_kinematics,
    keypoint_loss,
    load_keypoints,
    load_regressor,
    load_tree,
    regress_keypoints,
    root_orientation,
    save_keypoints,
    save_tree,
    scalable_ik,
    skew,
    swing_rotation,
    twist_rotation,
)
from .mesh import (
    Mesh,
    MetricReport,
    chamfer,
    edge_lengths,
    load_mesh,
    pmd,
    save_mesh,
)
from .objectives import (
    LossBreakdown,
    LossWeights,
    edge_discrepancy,
    edge_discrepancy_gradient,
    edge_loss,
    numerical_gradient,
    total_loss,
)
from .skinning import (
    GmmParams,
    SkinningMatrix,
    bone_centers,
    default_radii,
    gmm_weights,
    lbs_apply,
    load_weights,
    save_weights,
    skinning_loss,
)
from .transfer import (
    DivergenceError,
    GmmSettings,
    OptimizerSettings,
    Puppet,
    RefinementSettings,
    TransferConfig,
    TransferResult,
    cycle_reconstruct,
    load_manifest,
    make_puppet,
    pose_transfer,
    refine,
    run_manifest,
    save_result,
    self_reconstruct,
)

__version__ = "0.1.0"
