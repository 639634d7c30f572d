"""Align camera, Lidar and V2V BSM object detections by semi-supervised manifold alignment."""
from ._kernels import BACKEND
from .alignment import (
    AlignmentResult,
    JointLaplacian,
    align,
    align_scene,
    build_joint_laplacian,
    eigen_symmetric,
    evaluate_objective,
    mapping_error,
    match_correspondences,
    select_embedding,
    unmapped_report,
)
from .bsm import BsmRecord, synthesize_bsms
from .core import (
    AlignmentConfig,
    DetectedObject,
    Modality,
    ModalityView,
    ObjectClass,
    PairedSet,
    Scene,
    SensAlignError,
    validate_scene,
)
from .graph import NeighborhoodGraph, build_laplacian, build_weight_matrix, distance_rows, knn, lle_weights
from .scenegen import SceneGenConfig, generate_scene, project_camera, select_paired

__version__ = "0.1.0"
