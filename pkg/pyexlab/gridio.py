"""EXLB1 grid files.

Layout (all little-endian)::

    b"EXLB1"            magic
    uint16              format version (1)
    uint16              length of the model id
    utf-8 bytes         model id
    float64 x3          R, h, margin
    uint32 x2           ny, nx
    uint64              seed
    int64               replicate index
    float64 x ny*nx     values, row-major (y-major)
"""
import logging, os, struct

import numpy as np

from .errors import GridFormatError
from .synthesis import FieldSample, GridSpec

logger = logging.getLogger(__name__)

MAGIC = b"EXLB1"
VERSION = 1
_PREFIX = struct.Struct("<5sHH")
_META = struct.Struct("<dddIIQq")
_PAYLOAD_DTYPE = np.dtype("<f8")


def encode_grid(sample):
    model_id = sample.model_id.encode("utf-8")
    ny, nx = sample.values.shape
    head = _PREFIX.pack(MAGIC, VERSION, len(model_id)) + model_id
    head += _META.pack(sample.grid.R, sample.grid.h, sample.grid.margin, ny, nx,
                       int(sample.seed), int(sample.replicate))
    return head + np.ascontiguousarray(sample.values, dtype=_PAYLOAD_DTYPE).tobytes()


def decode_grid(data):
    """Parses EXLB1 bytes into a :class:`FieldSample`; nothing partial is ever returned."""
    if len(data) < _PREFIX.size:
        raise GridFormatError(f"Truncated EXLB1 header: {len(data)} bytes.")
    magic, version, id_len = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise GridFormatError(f"Bad magic {magic!r}, expected {MAGIC!r}.")
    if version != VERSION:
        raise GridFormatError(f"Unsupported EXLB1 version {version}, expected {VERSION}.")
    offset = _PREFIX.size
    if len(data) < offset + id_len + _META.size:
        raise GridFormatError("Truncated EXLB1 header.")
    model_id = bytes(data[offset:offset + id_len]).decode("utf-8")
    offset += id_len
    R, h, margin, ny, nx, seed, replicate = _META.unpack_from(data, offset)
    offset += _META.size
    expected = ny * nx * _PAYLOAD_DTYPE.itemsize
    if len(data) - offset != expected:
        kind = "Truncated" if len(data) - offset < expected else "Oversized"
        raise GridFormatError(f"{kind} EXLB1 payload: {len(data) - offset} bytes for a {ny}x{nx} grid.")
    try:
        grid = GridSpec(R, h, margin)
    except ValueError as e:
        raise GridFormatError(f"Invalid grid parameters in EXLB1 header: {e}")
    if grid.shape != (ny, nx):
        raise GridFormatError(f"Dimension mismatch: header says {ny}x{nx}, grid implies {grid.shape}.")
    values = np.frombuffer(data, dtype=_PAYLOAD_DTYPE, count=ny * nx, offset=offset).reshape(ny, nx)
    try:
        return FieldSample(grid, values.astype(np.float64), model_id, seed, replicate)
    except ValueError as e:
        raise GridFormatError(str(e))


def write_grid(sample, path):
    """Writes ``sample`` to ``path`` and returns the path."""
    data = encode_grid(sample)
    tmp = f"{path}.part"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)
    logger.debug("wrote %s (%d bytes)", path, len(data))
    return path


def read_grid(path):
    with open(path, "rb") as f:
        return decode_grid(f.read())
