"""Prewitt gradients and the binary edge map fed to contour tracing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import as_image, convolve

PREWITT_X = np.array([[1.0, 0.0, -1.0],
                      [1.0, 0.0, -1.0],
                      [1.0, 0.0, -1.0]])
PREWITT_Y = PREWITT_X.T.copy()
FLAT_GRADIENT = 1e-9


@dataclass
class GradientField:
    gx: np.ndarray
    gy: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.gx, self.gy)

    @property
    def direction(self) -> np.ndarray:
        """atan(gy / gx) in (-pi/2, pi/2]; gx == 0 gives pi/2 (same axis as -pi/2)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            theta = np.arctan(self.gy / self.gx)
        theta[self.gx == 0] = np.pi / 2
        return theta


def prewitt(img) -> GradientField:
    img = as_image(img)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError("prewitt needs an image of at least 3x3")
    return GradientField(convolve(img, PREWITT_X), convolve(img, PREWITT_Y))


def edge_binarize(g: GradientField, frac: float = 0.2) -> np.ndarray:
    """Keep pixels whose gradient magnitude is at least ``frac`` of the maximum."""
    if not 0 < frac < 1:
        raise ValueError("frac must lie in (0, 1)")
    mag = g.magnitude
    peak = mag.max()
    # rounding in the convolution leaves ~1e-16 on flat images
    if peak <= FLAT_GRADIENT:
        return np.zeros(mag.shape, dtype=bool)
    return mag >= frac * peak


def edge_map(binary, frac: float = 0.2) -> np.ndarray:
    return edge_binarize(prewitt(np.asarray(binary, dtype=np.float64)), frac)
