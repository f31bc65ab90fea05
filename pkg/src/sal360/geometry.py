"""Equirectangular (ERP) <-> cubemap (CMP) projection and spherical helpers.

Conventions:
  - ERP grids are (rows, cols) numpy arrays with cols = 2 * rows; pixel
    centers map linearly to lon in [-pi, pi) and lat in [-pi/2, pi/2].
  - Directions are unit-sphere vectors (x, y, z): +x through (lon 0, lat 0),
    +y through lon +pi/2, +z through the zenith.
  - Cube faces are indexed 0..5 = front, left, right, back, zenith, nadir;
    face 0 is centered on (lon 0, lat 0), faces 1-3 on lon -pi/2, +pi/2, pi.
"""

import math
from dataclasses import dataclass

import numpy as np

FACE_NAMES = ("front", "left", "right", "back", "zenith", "nadir")


@dataclass(frozen=True)
class SphericalPoint:
    """Longitude/latitude in radians, lon wrapped to [-pi, pi)."""

    lon: float
    lat: float

    def __post_init__(self):
        if not -math.pi / 2 <= self.lat <= math.pi / 2:
            raise ValueError(f"latitude {self.lat} outside [-pi/2, pi/2]")
        wrapped = (self.lon + math.pi) % (2 * math.pi) - math.pi
        object.__setattr__(self, "lon", wrapped)


@dataclass
class CubeFaces:
    """Six equal square faces, (6, N, N) or (6, N, N, C)."""

    faces: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.faces, dtype=np.float64)
        if f.ndim not in (3, 4) or f.shape[0] != 6 or f.shape[1] != f.shape[2]:
            raise ValueError(f"cube faces must be (6, N, N[, C]), got {f.shape}")
        self.faces = f

    @property
    def face_size(self):
        return self.faces.shape[1]


def _check_aspect(height, width):
    if width != 2 * height:
        raise ValueError(f"ERP aspect must be 2:1, got {width}x{height}")


def erp_pixel_to_sphere(row, col, height, width):
    """Pixel-center mapping of one ERP pixel to the sphere."""
    _check_aspect(height, width)
    if not (0 <= row < height and 0 <= col < width):
        raise ValueError(f"pixel ({row}, {col}) outside {height}x{width}")
    lon = ((col + 0.5) / width) * 2 * math.pi - math.pi
    lat = math.pi / 2 - ((row + 0.5) / height) * math.pi
    return SphericalPoint(lon, lat)


def sphere_to_erp_pixel(lon, lat, height, width):
    """Nearest ERP pixel center for (lon, lat) in radians."""
    _check_aspect(height, width)
    col = int(math.floor((lon + math.pi) / (2 * math.pi) * width)) % width
    row = int(math.floor((math.pi / 2 - lat) / math.pi * height))
    return min(max(row, 0), height - 1), col


def geodesic_distance(a, b):
    """Great-circle distance in radians via the haversine form."""
    return float(geodesic_distance_grid(a.lon, a.lat, b.lon, b.lat))


def geodesic_distance_grid(lon1, lat1, lon2, lat2):
    """Vectorized haversine over radian arrays."""
    dlat = np.subtract(lat2, lat1)
    dlon = np.subtract(lon2, lon1)
    h = (np.sin(dlat / 2.0) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2)
    return 2.0 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def erp_coords(height, width):
    """(lon, lat) arrays of pixel centers: lon (width,), lat (height,)."""
    _check_aspect(height, width)
    lon = ((np.arange(width) + 0.5) / width) * 2 * math.pi - math.pi
    lat = math.pi / 2 - ((np.arange(height) + 0.5) / height) * math.pi
    return lon, lat


def solid_angle_weights(height, width):
    """Per-pixel cos-latitude weights, normalized to sum to 1."""
    _, lat = erp_coords(height, width)
    w = np.repeat(np.cos(lat)[:, None], width, axis=1)
    return w / w.sum()


def sample_erp(erp, lon, lat):
    """Bilinear ERP sample at (lon, lat) radian arrays; longitude wraps at
    the +-pi seam, latitude clamps at the poles."""
    h, w = erp.shape[:2]
    x = (lon + math.pi) / (2 * math.pi) * w - 0.5
    y = (math.pi / 2 - lat) / math.pi * h - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    tx = x - x0
    ty = y - y0
    x0w = x0 % w
    x1w = (x0 + 1) % w
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    if erp.ndim == 3:
        tx = tx[..., None]
        ty = ty[..., None]
    return (erp[y0c, x0w] * (1 - ty) * (1 - tx)
            + erp[y0c, x1w] * (1 - ty) * tx
            + erp[y1c, x0w] * ty * (1 - tx)
            + erp[y1c, x1w] * ty * tx)


def _face_rays(face, a, b):
    """Outward rays for face-plane coords a (to image right), b (down)."""
    one = np.ones_like(a)
    if face == 0:    # front
        return one, a, -b
    if face == 1:    # left
        return a, -one, -b
    if face == 2:    # right
        return -a, one, -b
    if face == 3:    # back
        return -one, -a, -b
    if face == 4:    # zenith
        return b, a, one
    return -b, a, -one  # nadir


def erp_to_cmp(erp, face_size):
    """Project an ERP grid onto six cube faces by ray sampling."""
    erp = np.asarray(erp, dtype=np.float64)
    _check_aspect(erp.shape[0], erp.shape[1])
    if face_size < 2:
        raise ValueError(f"face_size must be >= 2, got {face_size}")
    n = face_size
    t = 2.0 * (np.arange(n) + 0.5) / n - 1.0
    a, b = np.meshgrid(t, t)  # a varies along cols, b along rows
    shape = (6, n, n) if erp.ndim == 2 else (6, n, n, erp.shape[2])
    out = np.empty(shape)
    for face in range(6):
        dx, dy, dz = _face_rays(face, a, b)
        lon = np.arctan2(dy, dx)
        lat = np.arctan2(dz, np.hypot(dx, dy))
        out[face] = sample_erp(erp, lon, lat)
    return CubeFaces(out)


def face_assignment(height, width):
    """(face index, a, b) per ERP pixel by the max-|component| rule."""
    lon, lat = erp_coords(height, width)
    lon = lon[None, :]
    lat = lat[:, None]
    x = np.cos(lat) * np.cos(lon)
    y = np.cos(lat) * np.sin(lon)
    z = np.broadcast_to(np.sin(lat), (height, width))
    comps = np.stack([x, y, np.broadcast_to(z, x.shape)])
    dom = np.argmax(np.abs(comps), axis=0)  # ties: first in (x, y, z) order
    face = np.empty((height, width), dtype=np.int64)
    a = np.empty((height, width))
    b = np.empty((height, width))
    err = np.errstate(divide="ignore", invalid="ignore")
    err.__enter__()
    sel = (dom == 0) & (x > 0)
    s = x
    face[sel], a[sel], b[sel] = 0, (y / s)[sel], (-z / s)[sel]
    sel = (dom == 0) & (x <= 0)
    s = -x
    face[sel], a[sel], b[sel] = 3, (-y / s)[sel], (-z / s)[sel]
    sel = (dom == 1) & (y > 0)
    s = y
    face[sel], a[sel], b[sel] = 2, (-x / s)[sel], (-z / s)[sel]
    sel = (dom == 1) & (y <= 0)
    s = -y
    face[sel], a[sel], b[sel] = 1, (x / s)[sel], (-z / s)[sel]
    sel = (dom == 2) & (z > 0)
    s = z
    face[sel], a[sel], b[sel] = 4, (y / s)[sel], (x / s)[sel]
    sel = (dom == 2) & (z <= 0)
    s = -z
    face[sel], a[sel], b[sel] = 5, (y / s)[sel], (-x / s)[sel]
    err.__exit__(None, None, None)
    return face, a, b


def cmp_to_erp(faces, height, width):
    """Inverse projection: each ERP pixel samples its unique cube face."""
    _check_aspect(height, width)
    f = faces.faces
    n = faces.face_size
    face, a, b = face_assignment(height, width)
    x = np.clip((a + 1.0) / 2.0 * n - 0.5, 0.0, n - 1.0)
    y = np.clip((b + 1.0) / 2.0 * n - 0.5, 0.0, n - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    tx = x - x0
    ty = y - y0
    x1 = np.minimum(x0 + 1, n - 1)
    y1 = np.minimum(y0 + 1, n - 1)
    if f.ndim == 4:
        tx = tx[..., None]
        ty = ty[..., None]
    return (f[face, y0, x0] * (1 - ty) * (1 - tx)
            + f[face, y0, x1] * (1 - ty) * tx
            + f[face, y1, x0] * ty * (1 - tx)
            + f[face, y1, x1] * ty * tx)
