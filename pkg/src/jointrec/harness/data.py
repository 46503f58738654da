"""On-disk formats: binary complex fields and grayscale magnitude exports.

A field file is magic (4 bytes, "KSPC" for frequency data or "IMGC" for
image data), version u8, then height, width, channels as little-endian u32,
then float32 little-endian samples in row-major order with re/im channels
interleaved. One sample per file.
"""

import os
import struct

import numpy as np
from PIL import Image

from ..errors import DataError
from ..fourier import FREQUENCY, IMAGE, ComplexField
from ..tensor import DEFAULT_DTYPE, Tensor

MAGIC_KSPACE = b"KSPC"
MAGIC_IMAGE = b"IMGC"
FORMAT_VERSION = 1

KSPACE_EXT = ".kspc"
IMAGE_EXT = ".imgc"

_HEADER = struct.Struct("<4sBIII")


def save_field(path, field, index=0):
    """Write one sample of a field; the magic byte records its domain."""
    arr = field.tensor.data
    if not 0 <= index < arr.shape[0]:
        raise DataError(f"sample index {index} out of range for batch {arr.shape[0]}")
    sample = np.ascontiguousarray(arr[index], dtype="<f4")
    h, w, c = sample.shape
    magic = MAGIC_KSPACE if field.domain == FREQUENCY else MAGIC_IMAGE
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, FORMAT_VERSION, h, w, c))
        fh.write(sample.tobytes())


def load_field(path):
    """Read a field file back as a batch-of-one ComplexField."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, version, h, w, c = _HEADER.unpack(head)
        if magic == MAGIC_KSPACE:
            domain = FREQUENCY
        elif magic == MAGIC_IMAGE:
            domain = IMAGE
        else:
            raise DataError(f"{path}: unrecognized magic {magic!r}")
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        if h == 0 or w == 0 or c == 0 or c % 2:
            raise DataError(f"{path}: bad dimensions {h}x{w}x{c}")
        payload = fh.read()
    want = h * w * c * 4
    if len(payload) != want:
        raise DataError(f"{path}: payload is {len(payload)} bytes, expected {want}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(1, h, w, c)
    return ComplexField(Tensor(arr.astype(DEFAULT_DTYPE)), domain)


def field_magnitude(field, index=0):
    """Magnitude of the first channel pair of one sample, as float64 [h, w]."""
    arr = field.tensor.data[index].astype(np.float64)
    return np.hypot(arr[:, :, 0], arr[:, :, 1])


def save_magnitude_png(path, field, index=0, bits=8):
    """Grayscale magnitude normalized to the slice maximum.

    Accepts .png or .pgm paths; 8- or 16-bit output.
    """
    if bits not in (8, 16):
        raise DataError(f"png depth must be 8 or 16 bits, got {bits}")
    mag = field_magnitude(field, index)
    top = mag.max()
    if top > 0:
        mag = mag / top
    peak = (1 << bits) - 1
    q = np.round(mag * peak)
    if bits == 8:
        img = Image.fromarray(q.astype(np.uint8), mode="L")
    else:
        img = Image.fromarray(q.astype(np.uint16))
    img.save(path)


def list_field_files(directory, ext):
    """Sorted field files with the given extension, erroring when none."""
    try:
        names = sorted(os.listdir(directory))
    except OSError as exc:
        raise DataError(f"cannot list {directory}: {exc}") from exc
    out = [os.path.join(directory, n) for n in names if n.endswith(ext)]
    if not out:
        raise DataError(f"no {ext} files under {directory}")
    return out
