"""Single-channel rasters: I/O, translation and display tone mapping.

Pixels are held as float64 arrays of shape ``(height, width)``; pixel
``(x, y)`` is column ``x`` of row ``y``. Integer conversion only happens
when reading or writing files.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError

SUPPORTED_DEPTHS = (8, 12, 16)


@dataclass(frozen=True)
class Displacement:
    """Translation in pixels.

    A point ``p`` on the source image lands on ``p + (dx, dy)`` on the
    target image.
    """

    dx: float
    dy: float

    def __neg__(self) -> "Displacement":
        return Displacement(-self.dx, -self.dy)

    def __add__(self, other: "Displacement") -> "Displacement":
        return Displacement(self.dx + other.dx, self.dy + other.dy)

    def as_tuple(self) -> tuple[float, float]:
        return (self.dx, self.dy)

    def is_finite(self) -> bool:
        return math.isfinite(self.dx) and math.isfinite(self.dy)


IDENTITY = Displacement(0.0, 0.0)


@dataclass(frozen=True, eq=False)
class Raster:
    pixels: np.ndarray
    bit_depth: int = 16

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise InputError(f"raster must be 2D, got shape {px.shape}")
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise InputError("raster must have positive width and height")
        if self.bit_depth not in SUPPORTED_DEPTHS:
            raise InputError(f"unsupported bit depth {self.bit_depth}")
        if px.size and (px.min() < 0 or px.max() > self.max_value):
            raise InputError(
                f"pixel values outside [0, {self.max_value}] for depth {self.bit_depth}"
            )
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return self.bit_depth == other.bit_depth and np.array_equal(
            self.pixels, other.pixels
        )

    def __repr__(self):
        return f"Raster({self.width}x{self.height}, depth={self.bit_depth})"


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------


def _read_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Parse a binary P5 PGM. Returns (array, maxval)."""
    if not data.startswith(b"P5"):
        raise InputError("not a binary PGM (P5) file")
    fields = []
    pos = 2
    while len(fields) < 3:
        # skip whitespace and comments
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InputError("truncated PGM header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace before the raster
    width, height, maxval = fields
    if maxval not in (255, 65535):
        raise InputError(f"unsupported PGM maxval {maxval}")
    dtype = np.dtype(">u2") if maxval == 65535 else np.dtype("u1")
    count = width * height
    body = data[pos : pos + count * dtype.itemsize]
    if len(body) != count * dtype.itemsize:
        raise InputError("truncated PGM raster")
    return np.frombuffer(body, dtype=dtype).reshape(height, width), maxval


def load_raster(path, expected_bit_depth: int | None = None) -> Raster:
    """Read a grayscale PGM (P5) or PNG without any tone mapping.

    The container decides the bit depth (8 or 16) unless
    ``expected_bit_depth`` overrides it, e.g. 12 for sensor data stored in
    16-bit files.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    if data.startswith(b"P5"):
        arr, maxval = _read_pgm(data)
        depth = 16 if maxval == 65535 else 8
    elif data.startswith(b"\x89PNG"):
        try:
            with Image.open(path) as im:
                im.load()
                mode = im.mode
                if mode in ("RGB", "RGBA", "LA", "P", "CMYK", "YCbCr"):
                    raise InputError(f"multi-channel input ({mode}) in {path}")
                if mode == "L":
                    depth = 8
                    arr = np.asarray(im, dtype=np.uint8)
                elif mode in ("I;16", "I;16B", "I;16L", "I"):
                    depth = 16
                    arr = np.asarray(im).astype(np.uint32)
                else:
                    raise InputError(f"unsupported PNG mode {mode} in {path}")
        except InputError:
            raise
        except Exception as exc:
            raise InputError(f"unreadable PNG {path}: {exc}") from exc
    else:
        raise InputError(f"unsupported image format: {path}")

    if expected_bit_depth is not None:
        if expected_bit_depth not in SUPPORTED_DEPTHS:
            raise InputError(f"unsupported bit depth {expected_bit_depth}")
        if expected_bit_depth > depth:
            raise InputError(
                f"declared depth {expected_bit_depth} exceeds container depth {depth}"
            )
        limit = (1 << expected_bit_depth) - 1
        if arr.size and int(arr.max()) > limit:
            raise InputError(
                f"declared depth {expected_bit_depth} conflicts with stored values "
                f"(max {int(arr.max())} > {limit})"
            )
        depth = expected_bit_depth
    return Raster(arr.astype(np.float64), depth)


def _atomic_write(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _to_integers(r: Raster) -> np.ndarray:
    arr = np.rint(r.pixels)
    if r.bit_depth == 8:
        return arr.astype(np.uint8)
    return arr.astype(np.uint16)


def encode_raster(r: Raster, fmt: str = "png") -> bytes:
    """Serialize a raster to PNG or PGM bytes (8-bit or 16-bit container)."""
    arr = _to_integers(r)
    if fmt == "pgm":
        maxval = 255 if arr.dtype == np.uint8 else 65535
        header = f"P5\n{r.width} {r.height}\n{maxval}\n".encode("ascii")
        body = arr.astype(">u2").tobytes() if maxval == 65535 else arr.tobytes()
        return header + body
    if fmt == "png":
        import io

        buf = io.BytesIO()
        if arr.dtype == np.uint8:
            Image.fromarray(arr, mode="L").save(buf, format="PNG", compress_level=1)
        else:
            im = Image.new("I;16", (r.width, r.height))
            im.frombytes(arr.astype("<u2").tobytes())
            im.save(buf, format="PNG", compress_level=1)
        return buf.getvalue()
    raise InputError(f"unsupported output format {fmt!r}")


def save_raster(r: Raster, path) -> None:
    """Write ``r`` to ``path``; the suffix (.png/.pgm) selects the format.

    12-bit rasters go into 16-bit containers; the depth must be declared
    again when reading them back.
    """
    path = Path(path)
    fmt = path.suffix.lower().lstrip(".")
    if fmt not in ("png", "pgm"):
        raise InputError(f"unsupported output format {path.suffix!r}")
    _atomic_write(path, encode_raster(r, fmt))


def save_rgb_png(rgb: np.ndarray, path) -> None:
    """Write an ``(H, W, 3)`` uint8 array as an 8-bit RGB PNG."""
    import io

    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise InputError("expected an (H, W, 3) uint8 array")
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    _atomic_write(Path(path), buf.getvalue())


# --------------------------------------------------------------------------
# Geometry and tone mapping
# --------------------------------------------------------------------------


def _interp_axis(a: np.ndarray, shift: float, axis: int, circular: bool, fill: float):
    """Linear resampling along one axis: out[i] = a[i - shift]."""
    n = a.shape[axis]
    k = math.floor(-shift)
    t = -shift - k
    idx0 = np.arange(n) + k
    idx1 = idx0 + 1

    def take(idx):
        if circular:
            return np.take(a, idx % n, axis=axis)
        valid = (idx >= 0) & (idx < n)
        out = np.take(a, np.clip(idx, 0, n - 1), axis=axis)
        shape = [1, 1]
        shape[axis] = n
        return np.where(valid.reshape(shape), out, fill)

    if t == 0.0:
        return take(idx0)
    return (1.0 - t) * take(idx0) + t * take(idx1)


def shift_raster(
    r: Raster, d: Displacement, mode: str = "circular", fill: float = 0.0
) -> Raster:
    """Translate ``r`` by ``d`` with bilinear interpolation.

    ``output(x, y) = input(x - dx, y - dy)``. In ``circular`` mode sample
    coordinates wrap; in ``crop_fill`` mode samples outside the image read
    ``fill``.
    """
    if mode not in ("circular", "crop_fill"):
        raise InputError(f"unknown shift mode {mode!r}")
    if not d.is_finite() or abs(d.dx) >= r.width or abs(d.dy) >= r.height:
        raise InputError(f"displacement {d} out of range for {r.width}x{r.height}")
    circular = mode == "circular"
    out = _interp_axis(r.pixels, d.dx, 1, circular, fill)
    out = _interp_axis(out, d.dy, 0, circular, fill)
    # guard against roundoff pushing values just past the depth limits
    out = np.clip(out, 0.0, r.max_value)
    return Raster(out, r.bit_depth)


def normalize_to_display(r: Raster) -> Raster:
    """Min-max stretch onto [0, 255], rounding half away from zero."""
    px = r.pixels
    lo = px.min()
    hi = px.max()
    if hi == lo:
        return Raster(np.zeros_like(px), 8)
    scaled = (px - lo) * (255.0 / (hi - lo))
    return Raster(np.minimum(np.floor(scaled + 0.5), 255.0), 8)
