"""Grey-level morphology, Otsu thresholding and the lamina shape chain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imagecore import as_image

LEVELS = 256


class ThresholdError(ValueError):
    """The image cannot be split into bone and background classes."""


@dataclass(frozen=True)
class StructuringElement:
    """Binary neighbourhood mask.

    The origin sits at ``(size // 2, size // 2)``.  For even sizes that is
    the lower-right cell of the central 2x2 block, so ``offsets`` run from
    ``-size // 2`` to ``size // 2 - 1``.
    """

    shape: str
    size: int
    mask: np.ndarray

    @classmethod
    def square(cls, size: int) -> "StructuringElement":
        if size < 1:
            raise ValueError("structuring element size must be >= 1")
        return cls("square", size, np.ones((size, size), dtype=bool))

    @classmethod
    def disk(cls, size: int) -> "StructuringElement":
        """Rasterised disk of diameter ``size``.

        Membership is measured from the geometric centre of the grid so the
        mask stays symmetric for even sizes too.
        """
        if size < 1:
            raise ValueError("structuring element size must be >= 1")
        c = (size - 1) / 2.0
        r = size / 2.0
        yy, xx = np.mgrid[:size, :size]
        return cls("disk", size, (yy - c) ** 2 + (xx - c) ** 2 <= r * r)

    @property
    def origin(self) -> tuple[int, int]:
        return (self.size // 2, self.size // 2)

    @property
    def offsets(self) -> np.ndarray:
        """Active cells as ``(dy, dx)`` relative to the origin."""
        ys, xs = np.nonzero(self.mask)
        return np.stack([ys - self.origin[0], xs - self.origin[1]], axis=1)

    @property
    def is_symmetric(self) -> bool:
        off = {tuple(o) for o in self.offsets}
        return off == {(-a, -b) for a, b in off}


def _shifted_extreme(img: np.ndarray, offsets: np.ndarray, reduce) -> np.ndarray:
    h, w = img.shape
    p = int(np.abs(offsets).max()) if len(offsets) else 0
    padded = np.pad(img, p, mode="edge")
    out = None
    for dy, dx in offsets:
        view = padded[p + dy:p + dy + h, p + dx:p + dx + w]
        out = view.copy() if out is None else reduce(out, view, out=out)
    return out


def _check_fit(img: np.ndarray, se: StructuringElement) -> None:
    if se.size > img.shape[0] or se.size > img.shape[1]:
        raise ValueError(f"structuring element {se.size}x{se.size} larger than image {img.shape}")


def dilate(img, se: StructuringElement) -> np.ndarray:
    """Grey dilation: ``out[p] = max_{b in se} img[p - b]`` (replicate border)."""
    img = as_image(img)
    _check_fit(img, se)
    return _shifted_extreme(img, -se.offsets, np.maximum)


def erode(img, se: StructuringElement) -> np.ndarray:
    """Grey erosion: ``out[p] = min_{b in se} img[p + b]`` (replicate border)."""
    img = as_image(img)
    _check_fit(img, se)
    return _shifted_extreme(img, se.offsets, np.minimum)


# --------------------------------------------------------------------------
# thresholding

def quantize(img) -> np.ndarray:
    return np.floor(np.clip(as_image(img), 0.0, 1.0) * (LEVELS - 1) + 0.5).astype(np.int64)


def between_class_variance(hist: np.ndarray) -> np.ndarray:
    """Otsu criterion for every split ``{0..t} | {t+1..255}``; NaN where a class is empty."""
    p = hist.astype(np.float64) / hist.sum()
    levels = np.arange(len(p))
    w0 = np.cumsum(p)
    w1 = 1.0 - w0
    m0 = np.cumsum(p * levels)
    mt = m0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sb = (mt * w0 - m0) ** 2 / (w0 * w1)
    sb[(w0 <= 1e-15) | (w1 <= 1e-15)] = np.nan
    return sb


def otsu_split(img) -> tuple[int, np.ndarray]:
    """Best split level ``t`` (class 0 is ``q <= t``) and the level histogram."""
    q = quantize(img)
    hist = np.bincount(q.ravel(), minlength=LEVELS)
    sb = between_class_variance(hist)
    if np.all(np.isnan(sb)):
        raise ThresholdError("constant image: no threshold separates two classes")
    best = np.nanmax(sb)
    # ties (within rounding) resolved towards the lower threshold
    t = int(np.flatnonzero(sb >= best * (1 - 1e-12))[0])
    return t, hist


def otsu_threshold(img) -> float:
    """Otsu level in [0, 1]: the boundary between quantised levels t and t+1."""
    t, _ = otsu_split(img)
    return (t + 0.5) / (LEVELS - 1)


def class_separation(img, level: float) -> float:
    """Difference between the mean intensities above and below ``level``."""
    img = as_image(img)
    hi = img >= level
    if hi.all() or not hi.any():
        return 0.0
    return float(img[hi].mean() - img[~hi].mean())


def binarize(img, level: float, gain: float = 0.9) -> np.ndarray:
    """True where intensity >= ``gain * level``."""
    return as_image(img) >= gain * level


def erosion_radius(a: float) -> int:
    """Disk size restoring a lamina after square dilation of side ``a``.

    A 32-degree lamina meets the dilated corner at 77 degrees, which gives
    ``a * sqrt(2) * sin(77 deg)``; rounded to whole pixels.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    return int(math.floor(a * math.sqrt(2.0) * math.sin(math.radians(77.0)) + 0.5))


# --------------------------------------------------------------------------
# lamina shape adjustment

@dataclass(frozen=True)
class MorphologyConfig:
    se1_size: int = 8
    se2_size: int = 10
    se2_mode: str = "fixed"  # or "erosion-radius": derive SE2 from se1_size
    otsu_gain: float = 0.9
    min_contrast: float = 0.1

    def __post_init__(self):
        if self.se1_size < 1 or self.se2_size < 1:
            raise ValueError("structuring element sizes must be >= 1")
        if self.se2_mode not in ("fixed", "erosion-radius"):
            raise ValueError("se2_mode must be 'fixed' or 'erosion-radius'")
        if not self.otsu_gain > 0:
            raise ValueError("otsu_gain must be positive")
        if self.min_contrast < 0:
            raise ValueError("min_contrast must be non-negative")

    @property
    def se1(self) -> StructuringElement:
        return StructuringElement.square(self.se1_size)

    @property
    def se2(self) -> StructuringElement:
        if self.se2_mode == "erosion-radius":
            return StructuringElement.disk(erosion_radius(self.se1_size))
        return StructuringElement.disk(self.se2_size)


def double_dilate(img, cfg: MorphologyConfig) -> np.ndarray:
    se = cfg.se1
    return dilate(dilate(img, se), se)


def threshold_and_erode(dilated, cfg: MorphologyConfig) -> tuple[np.ndarray, float]:
    """Binarise at ``gain * otsu`` and erode; returns (binary image, Otsu level).

    Raises ThresholdError when Otsu has nothing to split or when the two
    classes differ in mean intensity by less than ``cfg.min_contrast``.
    """
    level = otsu_threshold(dilated)
    sep = class_separation(dilated, level)
    if sep < cfg.min_contrast:
        raise ThresholdError(
            f"bone and background classes differ by {sep:.3f} < {cfg.min_contrast}")
    binary = binarize(dilated, level, cfg.otsu_gain)
    eroded = erode(binary.astype(np.float64), cfg.se2) > 0.5
    return eroded, level


def lamina_shape_chain(img, cfg: MorphologyConfig | None = None) -> np.ndarray:
    """Dilate twice with SE1, binarise at gain x Otsu, erode with SE2."""
    cfg = cfg or MorphologyConfig()
    binary, _ = threshold_and_erode(double_dilate(img, cfg), cfg)
    return binary
