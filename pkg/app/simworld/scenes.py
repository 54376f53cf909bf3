import numpy as np

from app.depth_aug.models import DepthImage
from app.depth_aug.services import add_gaussian_noise, gaussian_blur
from app.geometry import CameraIntrinsics

SCENE_MAX_DEPTH = 4.0
BACKDROP_DEPTH = 3.0
TABLE_FAR_EDGE = 1.6
EDGE_JUMP = 0.05


def render_tabletop_scene(k: CameraIntrinsics, size, seed) -> DepthImage:
    """Clean depth frame of a tilted table with box faces, in front of a far wall."""
    width, height = (size, size) if np.isscalar(size) else size
    rng = np.random.default_rng(seed)

    # Table plane n . X = offset in camera coordinates, seen from above at an angle
    tilt = rng.uniform(0.55, 0.75)
    normal = np.array([0.0, -np.cos(tilt), -np.sin(tilt)])
    anchor = np.array([0.0, 0.0, rng.uniform(0.8, 1.0)])
    offset = normal @ anchor

    u, v = np.meshgrid(np.arange(width), np.arange(height))
    rays = np.stack(
        [(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u, dtype=float)], axis=-1
    )
    facing = rays @ normal
    with np.errstate(divide="ignore"):
        table = np.where(facing < 0, offset / facing, np.inf)
    depth = np.where((table > 0) & (table < TABLE_FAR_EDGE), table, BACKDROP_DEPTH)

    for _ in range(rng.integers(3, 7)):
        w = int(rng.integers(width // 12, width // 5))
        h = int(rng.integers(height // 12, height // 5))
        left = int(rng.integers(0, width - w))
        top = int(rng.integers(height // 3, height - h))
        base = depth[top + h - 1, left + w // 2]
        if base >= BACKDROP_DEPTH:
            continue
        face = base - rng.uniform(0.03, 0.15)
        region = depth[top : top + h, left : left + w]
        np.minimum(region, face, out=region)

    return DepthImage(np.clip(depth, 0.0, SCENE_MAX_DEPTH), SCENE_MAX_DEPTH)


def corrupt_like_sensor(
    img: DepthImage, seed, noise_sigma=0.005, blur_sigma=1.0, dropout_fraction=0.005
) -> DepthImage:
    """Synthetic real-sensor frame: missing edges and speckle, noise, mild blur."""
    noise_seed, zero_seed = np.random.SeedSequence(seed).spawn(2)
    values = img.values
    edges = np.zeros(img.shape, dtype=bool)
    vertical = np.abs(np.diff(values, axis=0)) > EDGE_JUMP
    horizontal = np.abs(np.diff(values, axis=1)) > EDGE_JUMP
    edges[:-1] |= vertical
    edges[1:] |= vertical
    edges[:, :-1] |= horizontal
    edges[:, 1:] |= horizontal

    out = add_gaussian_noise(gaussian_blur(img, blur_sigma), noise_sigma, noise_seed)
    rng = np.random.default_rng(zero_seed)
    missing = edges.ravel().copy()
    count = round(dropout_fraction * values.size)
    missing[rng.choice(values.size, size=count, replace=False)] = True
    corrupted = np.where(missing.reshape(img.shape), 0.0, out.values)
    return img.with_values(corrupted)
