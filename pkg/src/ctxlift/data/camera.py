"""Pinhole camera: body frame -> camera frame -> normalized image coordinates."""
from dataclasses import dataclass

import numpy as np

# Rotation by pi about x: body y-up/z-forward -> camera y-down/z-into-scene.
BODY_TO_CAMERA = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])


class BehindCameraError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    """Ideal pinhole with the principal point at the image center.

    ``width_px``/``height_px`` describe the virtual input image (256x192 rows
    by columns, the detector input size); ``distance_mm`` is the depth at
    which the subject's root is placed.
    """

    focal_px: float = 400.0
    width_px: int = 192
    height_px: int = 256
    distance_mm: float = 5000.0
    depth_range_mm: float = 1000.0


def project_camera(points_cam, camera=Camera()):
    """Perspective projection of camera-frame points (..., 3) in mm.

    Returns ``(uv, depth)``: normalized image coordinates (..., 2) with the
    optical axis at (0.5, 0.5), and the camera-frame depth (...,) in mm.
    """
    pts = np.asarray(points_cam, dtype=np.float64)
    z = pts[..., 2]
    if np.any(z <= 0):
        raise BehindCameraError("point at or behind the camera plane")
    u = 0.5 + camera.focal_px * pts[..., 0] / (z * camera.width_px)
    v = 0.5 + camera.focal_px * pts[..., 1] / (z * camera.height_px)
    return np.stack([u, v], axis=-1), z


def normalized_depth(depth_mm, root_depth_mm, camera=Camera()):
    """Root-relative depth mapped to [0, 1]: 0.5 at the root, clipped at +-range."""
    rel = (np.asarray(depth_mm) - root_depth_mm) / (2.0 * camera.depth_range_mm)
    return np.clip(0.5 + rel, 0.0, 1.0)
