"""17-joint kinematic skeleton and random pose/sequence generation."""
from dataclasses import dataclass

import numpy as np

JOINT_NAMES = (
    "pelvis", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle",
    "spine", "thorax", "neck", "head", "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
)


@dataclass(frozen=True)
class SkeletonTopology:
    """Kinematic tree: parent per joint (root has -1), bone lengths in mm.

    ``rest_dirs`` are unit bone directions in the body frame (x left-to-right,
    y up, z forward); ``angle_limits[j]`` bounds the three local Euler angles
    (about x, y, z) of the bone ending at joint ``j``.
    """

    parents: tuple
    bone_lengths: tuple
    rest_dirs: tuple
    angle_limits: tuple

    def __post_init__(self):
        parents = self.parents
        roots = [j for j, p in enumerate(parents) if p < 0]
        if len(roots) != 1 or roots[0] != 0:
            raise ValueError("skeleton needs exactly one root, at index 0")
        for j, p in enumerate(parents):
            if j and not 0 <= p < j:
                raise ValueError(f"joint {j}: parent {p} must precede it (acyclic order)")
            if j and self.bone_lengths[j] <= 0:
                raise ValueError(f"joint {j}: bone length must be positive")

    @property
    def n_joints(self):
        return len(self.parents)

    def edges(self):
        return [(p, j) for j, p in enumerate(self.parents) if p >= 0]


_LEG = ((-1.3, 0.6), (-0.3, 0.3), (-0.5, 0.5))
_SHIN = ((0.0, 1.9), (-0.1, 0.1), (-0.1, 0.1))
_TORSO = ((-0.4, 0.5), (-0.5, 0.5), (-0.3, 0.3))
_NECK = ((-0.4, 0.4), (-0.6, 0.6), (-0.3, 0.3))
_FIXED = ((-0.1, 0.1), (-0.1, 0.1), (-0.1, 0.1))
_UPPER_ARM = ((-1.6, 1.6), (-0.5, 0.5), (-1.4, 1.4))
_FOREARM = ((-2.2, 0.0), (-0.3, 0.3), (-0.3, 0.3))
_DOWN, _UP, _LEFT, _RIGHT = (0, -1, 0), (0, 1, 0), (1, 0, 0), (-1, 0, 0)

H36M_TOPOLOGY = SkeletonTopology(
    parents=(-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15),
    bone_lengths=(0.0, 130.0, 450.0, 440.0, 130.0, 450.0, 440.0, 230.0, 250.0,
                  110.0, 120.0, 150.0, 280.0, 250.0, 150.0, 280.0, 250.0),
    rest_dirs=((0, 0, 0), _RIGHT, _DOWN, _DOWN, _LEFT, _DOWN, _DOWN, _UP, _UP, _UP, _UP,
               _LEFT, _DOWN, _DOWN, _RIGHT, _DOWN, _DOWN),
    angle_limits=(_FIXED, _FIXED, _LEG, _SHIN, _FIXED, _LEG, _SHIN, _TORSO, _TORSO,
                  _NECK, _FIXED, _FIXED, _UPPER_ARM, _FOREARM, _FIXED, _UPPER_ARM,
                  _FOREARM),
)


def euler_to_matrix(angles):
    """Rotation matrices Rz @ Ry @ Rx for ``angles[..., (x, y, z)]``."""
    ax, ay, az = angles[..., 0], angles[..., 1], angles[..., 2]
    cx, sx, cy, sy, cz, sz = np.cos(ax), np.sin(ax), np.cos(ay), np.sin(ay), np.cos(az), np.sin(az)
    one, zero = np.ones_like(ax), np.zeros_like(ax)
    rx = np.stack([one, zero, zero, zero, cx, -sx, zero, sx, cx], -1).reshape(ax.shape + (3, 3))
    ry = np.stack([cy, zero, sy, zero, one, zero, -sy, zero, cy], -1).reshape(ax.shape + (3, 3))
    rz = np.stack([cz, -sz, zero, sz, cz, zero, zero, zero, one], -1).reshape(ax.shape + (3, 3))
    return rz @ ry @ rx


def forward_kinematics(topology, angles, root_rotation=None):
    """Joint positions (J, 3), root at the origin, from local bone angles (J, 3)."""
    n = topology.n_joints
    local = euler_to_matrix(np.asarray(angles, dtype=np.float64))
    world_rot = np.empty((n, 3, 3))
    world_rot[0] = np.eye(3) if root_rotation is None else root_rotation
    pos = np.zeros((n, 3))
    dirs = np.asarray(topology.rest_dirs, dtype=np.float64)
    for j in range(1, n):
        p = topology.parents[j]
        world_rot[j] = world_rot[p] @ local[j]
        pos[j] = pos[p] + world_rot[j] @ (dirs[j] * topology.bone_lengths[j])
    return pos


def _limits(topology):
    lim = np.asarray(topology.angle_limits, dtype=np.float64)
    return lim[..., 0], lim[..., 1]


def _reflect(x, lo, hi):
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    y = np.mod(x - lo, 2 * safe)
    y = np.where(y > safe, 2 * safe - y, y)
    return np.where(span > 0, lo + y, lo)


def gen_skeleton_sequence(topology, frames, rng, max_step=0.04, yaw=None):
    """Smooth random motion: joint angles random-walk with bounded steps.

    The whole body also turns slowly about the vertical axis. Returns an
    array (frames, J, 3) in the body frame (y up) with the root at the origin.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    lo, hi = _limits(topology)
    angles = rng.uniform(lo, hi)
    yaw0 = rng.uniform(0.0, 2 * np.pi) if yaw is None else float(yaw)
    poses = np.empty((frames, topology.n_joints, 3))
    for f in range(frames):
        if f:
            angles = _reflect(angles + rng.uniform(-max_step, max_step, size=angles.shape), lo, hi)
            yaw0 = yaw0 + rng.uniform(-max_step, max_step)
        c, s = np.cos(yaw0), np.sin(yaw0)
        root = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        poses[f] = forward_kinematics(topology, angles, root)
    return poses


def bone_lengths(pose, topology):
    """Per-edge Euclidean lengths of a (J, 3) pose, in edge order."""
    return np.array([np.linalg.norm(pose[j] - pose[p]) for p, j in topology.edges()])
