"""Ground-truth generation: gaze CSV parsing, fixation rasterization,
spherical-Gaussian blurring (sigma in degrees of arc), and the static-image
augmentation set."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .geometry import erp_coords, geodesic_distance_grid, sphere_to_erp_pixel
from .imageio import load_grid, save_grid

CSV_HEADER = ["video_id", "frame_index", "observer_id", "lon_deg", "lat_deg"]

DEFAULT_SIGMA_DEG = 9.35
FIXMAP_HEIGHT = 1024
FIXMAP_WIDTH = 2048


@dataclass(frozen=True)
class FixationRecord:
    video_id: str
    frame_index: int
    observer_id: str
    lon: float  # degrees, [-180, 180)
    lat: float  # degrees, [-90, 90]


@dataclass
class ParseResult:
    records: list
    errors: list  # (line_number, message)


def parse_fixations(stream):
    """Parse gaze CSV; malformed lines are skipped and reported with their
    line numbers. Raises FormatError when the header is missing."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("empty gaze CSV") from None
    if [h.strip() for h in header] != CSV_HEADER:
        raise FormatError(f"gaze CSV header must be {','.join(CSV_HEADER)}")
    records = []
    errors = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            if len(row) != 5:
                raise ValueError(f"expected 5 fields, got {len(row)}")
            video_id = row[0].strip()
            frame_index = int(row[1])
            if frame_index < 0:
                raise ValueError("frame_index must be >= 0")
            lon = float(row[3])
            lat = float(row[4])
            if not -180.0 <= lon < 180.0:
                raise ValueError(f"lon_deg {lon} outside [-180, 180)")
            if not -90.0 <= lat <= 90.0:
                raise ValueError(f"lat_deg {lat} outside [-90, 90]")
        except ValueError as exc:
            errors.append((lineno, str(exc)))
            continue
        records.append(FixationRecord(video_id, frame_index, row[2].strip(),
                                      lon, lat))
    records.sort(key=lambda r: (r.video_id, r.frame_index, r.observer_id))
    return ParseResult(records, errors)


@dataclass
class FixMap:
    grid: np.ndarray  # binary (rows, cols)

    @property
    def count(self):
        return int(self.grid.sum())


def rasterize_fixations(records, height=FIXMAP_HEIGHT, width=FIXMAP_WIDTH):
    """Mark the nearest ERP pixel center per record; duplicates set once."""
    grid = np.zeros((height, width))
    for rec in records:
        row, col = sphere_to_erp_pixel(math.radians(rec.lon),
                                       math.radians(rec.lat), height, width)
        grid[row, col] = 1.0
    return FixMap(grid)


def blur_fixations(fix, sigma_deg=DEFAULT_SIGMA_DEG):
    """Geodesic Gaussian splat of every fixation, truncated at 3 sigma,
    max-normalized to [0, 1]."""
    grid = fix.grid
    h, w = grid.shape
    rows, cols = np.nonzero(grid)
    if rows.size == 0:
        raise ValueError("blur_fixations: empty fixation map")
    sigma = math.radians(sigma_deg)
    cutoff = 3.0 * sigma
    lon, lat = erp_coords(h, w)
    out = np.zeros((h, w))
    band_rows = int(math.ceil(cutoff / math.pi * h)) + 1
    for r, c in zip(rows, cols):
        r0 = max(0, r - band_rows)
        r1 = min(h, r + band_rows + 1)
        d = geodesic_distance_grid(lon[c], lat[r],
                                   lon[None, :], lat[r0:r1, None])
        mask = d <= cutoff
        out[r0:r1][mask] += np.exp(-d[mask] ** 2 / (2.0 * sigma * sigma))
    return out / out.max()


_ROTATIONS = tuple(range(8))  # k * 45 degrees


def augmentations(height_width=None):
    """Names of the 23 deterministic transforms (originals included)."""
    names = [f"rot{45 * k:03d}" for k in _ROTATIONS]
    names += [f"hflip_rot{45 * k:03d}" for k in _ROTATIONS]
    names += [f"vmirror_rot{45 * k:03d}" for k in _ROTATIONS[:7]]
    return names


def apply_augmentation(image, name):
    """Apply one named transform; longitudinal rotation is a sphere-preserving
    circular column shift, mirroring flips rows, hflip reverses columns."""
    h, w = image.shape[:2]
    if w != 2 * h:
        raise ValueError(f"augmentation wants 2:1 ERP input, got {w}x{h}")
    img = image
    if name.startswith("hflip_"):
        img = img[:, ::-1]
        name = name[len("hflip_"):]
    elif name.startswith("vmirror_"):
        img = img[::-1, :]
        name = name[len("vmirror_"):]
    if not name.startswith("rot"):
        raise ValueError(f"unknown augmentation {name!r}")
    deg = int(name[3:])
    shift = (deg * w) // 360
    return np.roll(img, shift, axis=1)


def augment(images):
    """Expand {stem: ERP grid} with the full transform set.

    Yields (name, grid) with deterministic names '<stem>_<xform>'.
    """
    for stem in sorted(images):
        for xform in augmentations():
            yield f"{stem}_{xform}", apply_augmentation(images[stem], xform)


def save_salmap(salmap, path):
    save_grid(salmap, path)


def load_salmap(path):
    return load_grid(path)
