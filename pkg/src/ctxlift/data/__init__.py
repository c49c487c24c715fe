"""Synthetic oracle data: skeletons, camera, detector noise, feature pyramids, files."""
from .camera import BehindCameraError, Camera, normalized_depth, project_camera
from .dataset import (
    FRAME_INTERVAL, PoseDataset, SyntheticSample, generate_dataset, generate_sequences,
)
from .io import FormatError, read_dataset, write_dataset
from .noise import NoiseSpec, corrupt_pose
from .pyramid import (
    DOWNSAMPLE_FACTORS, LEVEL_SHAPES, N_CHANNELS, FeaturePyramid, NoiseBank, PyramidBatch,
    RenderedGrid, render_pyramid,
)
from .skeleton import (
    H36M_TOPOLOGY, JOINT_NAMES, SkeletonTopology, bone_lengths, forward_kinematics,
    gen_skeleton_sequence,
)

__all__ = [
    "BehindCameraError", "Camera", "DOWNSAMPLE_FACTORS", "FRAME_INTERVAL", "FeaturePyramid",
    "FormatError", "H36M_TOPOLOGY", "JOINT_NAMES", "LEVEL_SHAPES", "N_CHANNELS", "NoiseBank",
    "NoiseSpec", "PoseDataset", "PyramidBatch", "RenderedGrid", "SkeletonTopology",
    "SyntheticSample", "bone_lengths", "corrupt_pose", "forward_kinematics",
    "gen_skeleton_sequence", "generate_dataset", "generate_sequences", "normalized_depth",
    "project_camera", "read_dataset", "render_pyramid", "write_dataset",
]
