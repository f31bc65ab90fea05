import numpy as np
import pytest

from sal360 import losses
from sal360.imageio import save_pgm


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_blob_pair(height, width, cx, cy, radius=12.0, noise_rng=None):
    """Synthetic (frame, saliency, fixation) triple around a Gaussian blob."""
    yy, xx = np.mgrid[0:height, 0:width]
    blob = np.exp(-(((xx - cx) / radius) ** 2 + ((yy - cy) / radius) ** 2) / 2.0)
    frame = blob / blob.max()
    if noise_rng is not None:
        frame = np.clip(frame + 0.1 * noise_rng.standard_normal(frame.shape), 0, 1)
    q1 = blob / blob.max()
    fix = np.zeros((height, width))
    fix[cy, cx] = 1.0
    fix[cy + 2, cx - 3] = 1.0
    fix[cy - 2, cx + 3] = 1.0
    return frame, q1, fix


def write_training_dir(root, n_pairs=8, height=80, width=160, seed=0):
    """Materialize synthetic training triples under frames/saliency/fixation."""
    gen = np.random.default_rng(seed)
    for sub in ("frames", "saliency", "fixation"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i in range(n_pairs):
        cx = 30 + 12 * i
        cy = 25 + 5 * (i % 3)
        frame, q1, fix = make_blob_pair(height, width, cx, cy, noise_rng=gen)
        name = f"{i:05d}.pgm"
        save_pgm(frame, root / "frames" / name)
        save_pgm(q1, root / "saliency" / name)
        save_pgm(fix, root / "fixation" / name)
    return root


def smooth_erp(height, width, phase=0.0):
    """Band-limited test pattern on the sphere (no seam discontinuity)."""
    lon = ((np.arange(width) + 0.5) / width) * 2 * np.pi - np.pi
    lat = np.pi / 2 - ((np.arange(height) + 0.5) / height) * np.pi
    grid = (0.5
            + 0.25 * np.sin(lon[None, :] + phase) * np.cos(lat[:, None])
            + 0.25 * np.cos(2 * lat[:, None]))
    grid -= grid.min()
    return grid / grid.max()
