"""Grid file formats: 8-bit grayscale PGM (P5) and raw float32 ATSF.

ATSF layout (little-endian): magic b"ATSF", u32 height, u32 width,
u32 channels, then height*width*channels float32 values.
"""

import struct

import numpy as np

from .errors import FormatError

ATSF_MAGIC = b"ATSF"


def save_pgm(grid, path):
    """Write a [0,1] float grid as maxval-255 binary PGM."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError(f"PGM wants a 2-D grid, got shape {g.shape}")
    data = np.clip(np.round(g * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{g.shape[1]} {g.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def load_pgm(path):
    """Read a binary PGM into a [0,1] float grid."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    # header: magic, width, height, maxval; '#' comments allowed
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 supported, got {maxval}")
    if len(blob) - pos < height * width:
        raise FormatError(f"{path}: truncated PGM payload")
    data = np.frombuffer(blob, dtype=np.uint8, count=height * width, offset=pos)
    return data.reshape(height, width).astype(np.float64) / 255.0


def save_atsf(grid, path):
    """Write a float grid (H, W) or (H, W, C) as raw float32."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim == 2:
        g = g[:, :, None]
    if g.ndim != 3:
        raise ValueError(f"ATSF wants (H, W[, C]), got shape {g.shape}")
    h, w, c = g.shape
    with open(path, "wb") as fh:
        fh.write(ATSF_MAGIC)
        fh.write(struct.pack("<III", h, w, c))
        fh.write(g.astype("<f4").tobytes())


def load_atsf(path):
    with open(path, "rb") as fh:
        head = fh.read(16)
        if head[:4] != ATSF_MAGIC:
            raise FormatError(f"{path}: bad ATSF magic {head[:4]!r}")
        h, w, c = struct.unpack("<III", head[4:])
        buf = fh.read(4 * h * w * c)
    if len(buf) != 4 * h * w * c:
        raise FormatError(f"{path}: truncated ATSF payload")
    grid = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(h, w, c)
    return grid[:, :, 0] if c == 1 else grid


def load_grid(path):
    """Dispatch on extension: .pgm -> PGM, .f32 -> ATSF."""
    p = str(path)
    if p.endswith(".f32"):
        return load_atsf(p)
    return load_pgm(p)


def save_grid(grid, path):
    p = str(path)
    if p.endswith(".f32"):
        save_atsf(grid, p)
    else:
        save_pgm(grid, p)
