"""Image I/O, spatial convolution and Fourier-domain filtering.

Images are plain ``float64`` arrays of shape ``(height, width)`` holding
intensities nominally in ``[0, 1]``.  Kernels are arrays with odd
dimensions so that the centre pixel is well defined.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

__all__ = [
    "ImageIOError",
    "ImageNotFoundError",
    "UnsupportedImageError",
    "CorruptImageError",
    "as_image",
    "load_image",
    "save_image",
    "convolve",
    "frequency_grid",
    "padded_shape",
    "filter_frequency",
]

BORDER_MODES = {"replicate": "nearest", "reflect": "reflect"}


class ImageIOError(Exception):
    """Base class for image reading/writing failures."""


class ImageNotFoundError(ImageIOError, FileNotFoundError):
    pass


class UnsupportedImageError(ImageIOError):
    """Valid file, but a bit depth or format this library does not handle."""


class CorruptImageError(ImageIOError):
    pass


def as_image(data) -> np.ndarray:
    """Validate ``data`` as a 2-D finite image and return it as float64."""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"image must be a non-empty 2-D array, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains NaN or Inf")
    return img


# --------------------------------------------------------------------------
# file I/O

def _read_pgm(raw: bytes, path) -> np.ndarray:
    # P5 header: magic, width, height, maxval separated by whitespace, with
    # '#' comments allowed; exactly one whitespace byte precedes the raster.
    fields = []
    pos = 2
    n = len(raw)
    while len(fields) < 3:
        while pos < n and raw[pos:pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos:pos + 1] == b"#":
            while pos < n and raw[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos:pos + 1].isspace() and raw[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise CorruptImageError(f"{path}: truncated PGM header")
        token = raw[start:pos]
        if not token.isdigit():
            raise CorruptImageError(f"{path}: bad PGM header field {token!r}")
        fields.append(int(token))
    if pos >= n or not raw[pos:pos + 1].isspace():
        raise CorruptImageError(f"{path}: truncated PGM header")
    pos += 1
    width, height, maxval = fields
    if width <= 0 or height <= 0 or maxval <= 0:
        raise CorruptImageError(f"{path}: non-positive PGM dimensions or maxval")
    if maxval > 255:
        raise UnsupportedImageError(f"{path}: maxval {maxval} (only 8-bit PGM supported)")
    body = raw[pos:pos + width * height]
    if len(body) < width * height:
        raise CorruptImageError(
            f"{path}: truncated PGM raster ({len(body)} of {width * height} bytes)")
    data = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    return data.astype(np.float64) / float(maxval)


def _read_png(path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise UnsupportedImageError(f"{path}: {mode} images are not 8-bit")
            if mode != "L":
                im = im.convert("L")  # ITU-R 601 luminance
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptImageError(f"{path}: {exc}") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptImageError(f"{path}: {exc}") from exc
    return arr.astype(np.float64) / 255.0


def load_image(path) -> np.ndarray:
    """Read an 8-bit PGM (P5) or PNG file into a float image in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise ImageNotFoundError(f"no such image file: {path}")
    raw = path.read_bytes()
    if raw[:2] == b"P5":
        return _read_pgm(raw, path)
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return _read_png(path)
    if len(raw) < 2 or path.suffix.lower() in (".pgm", ".png"):
        raise CorruptImageError(f"{path}: unrecognised or damaged header")
    raise UnsupportedImageError(f"{path}: only P5 PGM and PNG are supported")


def _quantize(img: np.ndarray) -> np.ndarray:
    img = as_image(img)
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path) -> None:
    """Write ``img`` clamped to [0, 1] as an 8-bit PGM or PNG."""
    path = Path(path)
    q = _quantize(img)
    suffix = path.suffix.lower()
    try:
        if suffix == ".png":
            from PIL import Image

            Image.fromarray(q).save(path, format="PNG")
        elif suffix in (".pgm", ""):
            header = f"P5\n{q.shape[1]} {q.shape[0]}\n255\n".encode("ascii")
            with open(path, "wb") as fh:
                fh.write(header + q.tobytes())
        else:
            raise UnsupportedImageError(f"{path}: write .pgm or .png")
    except OSError as exc:
        if isinstance(exc, ImageIOError):
            raise
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# spatial filtering

def convolve(img, kernel, border: str = "replicate") -> np.ndarray:
    """True 2-D convolution (kernel flipped), output the same size as ``img``.

    ``border`` is ``"replicate"`` (edge pixels repeated) or ``"reflect"``
    (half-sample symmetric extension).
    """
    img = as_image(img)
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
        raise ValueError(f"kernel dimensions must be odd, got {k.shape}")
    if k.shape[0] > img.shape[0] or k.shape[1] > img.shape[1]:
        raise ValueError(f"kernel {k.shape} larger than image {img.shape}")
    try:
        mode = BORDER_MODES[border]
    except KeyError:
        raise ValueError(f"border must be one of {sorted(BORDER_MODES)}") from None
    return ndimage.convolve(img, k, mode=mode)


# --------------------------------------------------------------------------
# frequency-domain filtering

def padded_shape(shape, pad: int) -> tuple[int, int]:
    return (shape[0] + 2 * pad, shape[1] + 2 * pad)


def frequency_grid(shape) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(fy, fx)`` in cycles/pixel, laid out like ``fft2`` output."""
    fy = sfft.fftfreq(shape[0])[:, None]
    fx = sfft.fftfreq(shape[1])[None, :]
    return np.broadcast_to(fy, shape), np.broadcast_to(fx, shape)


def reflect_pad(img: np.ndarray, pad: tuple[int, int] | int) -> np.ndarray:
    if isinstance(pad, int):
        pad = (pad, pad)
    py, px = pad
    if py > img.shape[0] or px > img.shape[1]:
        raise ValueError(f"padding {pad} exceeds image size {img.shape}")
    return np.pad(img, ((py, py), (px, px)), mode="symmetric")


def _pad_for(img_shape, grid_shape) -> tuple[int, int]:
    dy = grid_shape[0] - img_shape[0]
    dx = grid_shape[1] - img_shape[1]
    if dy < 0 or dx < 0 or dy % 2 or dx % 2:
        raise ValueError(
            f"transfer grid {grid_shape} does not match image {img_shape} "
            "plus symmetric padding")
    return dy // 2, dx // 2


def filter_frequency(img, transfer) -> np.ndarray:
    """Multiply the spectrum of ``img`` by ``transfer`` and return the real part.

    ``transfer`` is laid out like ``fft2`` output.  When it is larger than
    the image, the image is reflect-padded symmetrically to its size first
    and the result cropped back, which keeps periodic wrap-around away from
    the borders.
    """
    img = as_image(img)
    transfer = np.asarray(transfer)
    if transfer.ndim != 2:
        raise ValueError("transfer must be a 2-D grid")
    py, px = _pad_for(img.shape, transfer.shape)
    work = reflect_pad(img, (py, px)) if (py or px) else img
    out = sfft.ifft2(sfft.fft2(work) * transfer).real
    return out[py:py + img.shape[0], px:px + img.shape[1]].copy()
