"""Label-map and dense-tensor file I/O.

Label maps follow the single-channel / paletted 8-bit PNG convention with
255 as the ignore index, so existing segmentation datasets can be used
directly. Dense tensors use AFT1, a minimal binary format designed to be
bit-exact across implementations (see docs/AFT1.md):

    bytes 0..3   magic "AFT1"
    byte  4      dtype code: 1 = float32, 2 = uint8
    byte  5      ndim: 1..4
    bytes 6..15  zero padding (header is exactly 16 bytes)
    bytes 16..31 four little-endian u32 extents; entries past ndim are zero
    bytes 32..   row-major payload (float32 little-endian IEEE-754 or raw u8)

Readers reject trailing bytes, nonzero padding, and non-finite float32
payloads are rejected on save. All functions here are pure and touch no
shared state; writes go to a temp file that is renamed on success so a
failed run never leaves a partial file behind.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

_AFT1_MAGIC = b"AFT1"
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("u1")}
_CODE_FOR_DTYPE = {np.dtype("float32"): 1, np.dtype("uint8"): 2}

IGNORE_VALUE = 255


@dataclass(frozen=True)
class LabelMap:
    """H x W grid of class indices with an ignore value.

    ``data`` is a 2-D uint8 array; elements equal to ``ignore_value`` mark
    unlabeled pixels that are excluded from affinity, loss and metrics.
    """

    data: np.ndarray
    ignore_value: int = IGNORE_VALUE

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2 or d.size == 0:
            raise ValueError("LabelMap data must be a non-empty 2-D array")
        if d.dtype != np.uint8:
            if np.any(d < 0) or np.any(d > 255):
                raise ValueError("LabelMap data out of uint8 range")
            d = d.astype(np.uint8)
        object.__setattr__(self, "data", d)
        if not 0 <= self.ignore_value <= 255:
            raise ValueError("ignore_value must be in [0, 255]")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write bytes to ``path`` via a same-directory temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-aft-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_tensor(t: np.ndarray, path: str) -> None:
    """Serialize a float32 or uint8 array (1-4 axes) as an AFT1 file."""
    arr = np.asarray(t)
    if arr.dtype not in _CODE_FOR_DTYPE:
        raise ValueError(f"{path}: unsupported dtype {arr.dtype}, "
                         "AFT1 stores float32 or uint8")
    if not 1 <= arr.ndim <= 4:
        raise ValueError(f"{path}: AFT1 supports 1-4 axes, got {arr.ndim}")
    if any(e < 1 for e in arr.shape):
        raise ValueError(f"{path}: zero-length axis in shape {arr.shape}")
    if any(e > 0xFFFFFFFF for e in arr.shape):
        raise ValueError(f"{path}: dim overflow in shape {arr.shape}")
    if arr.dtype == np.float32 and not np.all(np.isfinite(arr)):
        raise ValueError(f"{path}: refusing to save non-finite float32 data")

    code = _CODE_FOR_DTYPE[arr.dtype]
    header = _AFT1_MAGIC + bytes([code, arr.ndim]) + b"\x00" * 10
    extents = list(arr.shape) + [0] * (4 - arr.ndim)
    dims = struct.pack("<4I", *extents)
    payload = np.ascontiguousarray(arr, dtype=_DTYPE_CODES[code]).tobytes()
    atomic_write_bytes(path, header + dims + payload)


def load_tensor(path: str) -> np.ndarray:
    """Read an AFT1 file back into a numpy array (bit-exact round trip)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 32:
        raise ValueError(f"{path}: truncated AFT1 file")
    if blob[:4] != _AFT1_MAGIC:
        raise ValueError(f"{path}: bad magic")
    code, ndim = blob[4], blob[5]
    if code not in _DTYPE_CODES:
        raise ValueError(f"{path}: unknown dtype code {code}")
    if not 1 <= ndim <= 4:
        raise ValueError(f"{path}: dim overflow (ndim byte = {ndim})")
    if blob[6:16] != b"\x00" * 10:
        raise ValueError(f"{path}: nonzero header padding")
    extents = struct.unpack("<4I", blob[16:32])
    shape = extents[:ndim]
    if any(e == 0 for e in shape):
        raise ValueError(f"{path}: zero extent in dims {shape}")
    if any(e != 0 for e in extents[ndim:]):
        raise ValueError(f"{path}: nonzero padding extent")
    dtype = _DTYPE_CODES[code]
    count = int(np.prod(shape, dtype=np.int64))
    expected = 32 + count * dtype.itemsize
    if len(blob) < expected:
        raise ValueError(f"{path}: truncated payload")
    if len(blob) > expected:
        raise ValueError(f"{path}: trailing bytes after payload")
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=32)
    return data.reshape(shape).copy()


def _png_header_info(path: str) -> tuple[int, int]:
    """Return (bit_depth, color_type) from a PNG's IHDR chunk."""
    with open(path, "rb") as fh:
        head = fh.read(26)
    if len(head) < 26 or head[:8] != b"\x89PNG\r\n\x1a\n":
        raise ValueError(f"{path}: not a PNG file")
    if head[12:16] != b"IHDR":
        raise ValueError(f"{path}: malformed PNG (missing IHDR)")
    return head[24], head[25]


def load_label_map(path: str, ignore_value: int = IGNORE_VALUE) -> LabelMap:
    """Load an 8-bit single-channel or paletted PNG as a label map.

    For paletted images the palette index itself is the class; the RGB
    entries are never consulted.
    """
    bit_depth, color_type = _png_header_info(path)
    if color_type not in (0, 3):
        raise ValueError(f"{path}: unsupported encoding "
                         "(expected grayscale or paletted PNG)")
    if bit_depth != 8:
        raise ValueError(f"{path}: unsupported bit depth {bit_depth}, "
                         "expected 8")
    with Image.open(path) as img:
        data = np.asarray(img, dtype=np.uint8)
    return LabelMap(data=data, ignore_value=ignore_value)


def _color_table(n: int = 256) -> list[int]:
    """Deterministic palette (the familiar segmentation colormap)."""
    flat = []
    for i in range(n):
        r = g = b = 0
        c = i
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        flat.extend((r, g, b))
    return flat


def save_label_map(labels: LabelMap, path: str) -> None:
    """Write a label map as a paletted 8-bit PNG (deterministic bytes)."""
    img = Image.fromarray(labels.data, mode="P")
    img.putpalette(_color_table())
    import io as _io

    buf = _io.BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())
