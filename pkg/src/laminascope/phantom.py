"""Synthetic paramedian lamina images with exact ground truth.

Each lamina is a bright rectangle whose long axis is perpendicular to the
direction ``angle`` (degrees, measured from the image x-axis towards +y,
i.e. downwards), so ``angle`` is also the Hough normal angle of its long
edges.  The rectangle's lowest corner sits at ``lower_endpoint``.

Speckle is multiplicative: ``img * R`` with ``R = sigma * W + 1 - sigma *
sqrt(pi / 2)`` and ``W`` a unit Rayleigh variable, i.e. a Rayleigh law of
scale ``sigma`` shifted to unit mean.  The product is then smoothed with a
3x3 box to correlate neighbouring pixels.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

RAYLEIGH_MEAN = math.sqrt(math.pi / 2.0)
RAYLEIGH_VAR = (4.0 - math.pi) / 2.0
MAX_SPECKLE_SIGMA = 1.0 / RAYLEIGH_MEAN

_SUPERSAMPLE = 4


@dataclass
class LaminaSpec:
    lower_endpoint: tuple[int, int] = (180, 120)  # (row, col)
    angle: float = 32.0
    length: float = 100.0
    thickness: float = 10.0
    brightness: float = 0.85


@dataclass
class LFStripe:
    depth_row: int
    thickness: float = 4.0
    brightness: float = 0.6
    col_start: int | None = None
    col_end: int | None = None


@dataclass
class PhantomSpec:
    size: tuple[int, int] = (256, 256)  # (height, width)
    laminae: list[LaminaSpec] = field(default_factory=lambda: [LaminaSpec()])
    lf_stripe: LFStripe | None = None
    speckle_sigma: float = 0.25
    background: float = 0.25
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        d = dict(d)
        lam = [LaminaSpec(**{**x, "lower_endpoint": tuple(x.get("lower_endpoint", (180, 120)))})
               for x in d.pop("laminae", [asdict(LaminaSpec())])]
        lf = d.pop("lf_stripe", None)
        if "size" in d:
            d["size"] = tuple(d["size"])
        return cls(laminae=lam, lf_stripe=LFStripe(**lf) if lf else None, **d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GroundTruth:
    lower_endpoints: list[tuple[int, int]]  # (row, col) per lamina
    masks: list[np.ndarray]
    lf_row: int | None
    lf_mask: np.ndarray | None = None

    @property
    def lamina_mask(self) -> np.ndarray:
        out = np.zeros_like(self.masks[0]) if self.masks else None
        for m in self.masks:
            out |= m
        return out

    @property
    def depth_px(self) -> float:
        """Row of the lowermost lamina endpoint (the depth a detector reports)."""
        return float(max(r for r, _ in self.lower_endpoints))

    def to_dict(self) -> dict:
        return {
            "lower_endpoints": [[int(r), int(c)] for r, c in self.lower_endpoints],
            "depth_px": self.depth_px if self.lower_endpoints else None,
            "lf_row": self.lf_row,
            "mask_pixels": [int(m.sum()) for m in self.masks],
        }


def _corners(lam: LaminaSpec) -> np.ndarray:
    a = math.radians(lam.angle)
    n = np.array([math.cos(a), math.sin(a)])      # (x, y) normal, points down-right
    u = np.array([math.sin(a), -math.cos(a)])     # along the band, towards the top
    e = np.array([lam.lower_endpoint[1], lam.lower_endpoint[0]], dtype=float)
    return np.array([e, e + lam.length * u, e + lam.length * u - lam.thickness * n,
                     e - lam.thickness * n])


def lamina_coverage(lam: LaminaSpec, shape) -> np.ndarray:
    """Fractional pixel coverage of one lamina rectangle (4x4 supersampled)."""
    a = math.radians(lam.angle)
    n = np.array([math.cos(a), math.sin(a)])
    u = np.array([math.sin(a), -math.cos(a)])
    ey, ex = lam.lower_endpoint
    offs = (np.arange(_SUPERSAMPLE) + 0.5) / _SUPERSAMPLE - 0.5
    ys = np.arange(shape[0])[:, None] + offs[None, :]
    xs = np.arange(shape[1])[:, None] + offs[None, :]
    dx = xs.reshape(-1)[None, :] - ex
    dy = ys.reshape(-1)[:, None] - ey
    s = dx * u[0] + dy * u[1]
    w = -(dx * n[0] + dy * n[1])
    inside = (s >= 0) & (s <= lam.length) & (w >= 0) & (w <= lam.thickness)
    return inside.reshape(shape[0], _SUPERSAMPLE, shape[1], _SUPERSAMPLE).mean(axis=(1, 3))


def _validate(spec: PhantomSpec) -> None:
    h, w = spec.size
    if h < 16 or w < 16:
        raise ValueError("phantom must be at least 16x16")
    if not 0 <= spec.speckle_sigma <= MAX_SPECKLE_SIGMA:
        raise ValueError(f"speckle_sigma must lie in [0, {MAX_SPECKLE_SIGMA:.4f}]")
    for lam in spec.laminae:
        if not 0 < lam.angle < 90:
            raise ValueError("lamina angle must lie in (0, 90) degrees")
        if lam.length <= 0 or lam.thickness <= 0:
            raise ValueError("lamina length and thickness must be positive")
        c = _corners(lam)
        if c[:, 0].min() < 0 or c[:, 0].max() > w - 1 or c[:, 1].min() < 0 or c[:, 1].max() > h - 1:
            raise ValueError(f"lamina at {lam.lower_endpoint} leaves the {h}x{w} frame")
    lf = spec.lf_stripe
    if lf is not None:
        if not (0 <= lf.depth_row - lf.thickness / 2 and lf.depth_row + lf.thickness / 2 <= h - 1):
            raise ValueError("LF stripe leaves the frame")


def speckle_field(shape, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean multiplicative Rayleigh field (uncorrelated)."""
    if sigma == 0:
        return np.ones(shape)
    return sigma * rng.rayleigh(1.0, size=shape) + (1.0 - sigma * RAYLEIGH_MEAN)


def render(spec: PhantomSpec | None = None) -> tuple[np.ndarray, GroundTruth]:
    spec = spec or PhantomSpec()
    _validate(spec)
    shape = tuple(spec.size)
    img = np.full(shape, float(spec.background))
    masks, ends = [], []

    lf_row, lf_mask = None, None
    lf = spec.lf_stripe
    if lf is not None:
        c0 = lf.col_start if lf.col_start is not None else 0
        c1 = lf.col_end if lf.col_end is not None else shape[1]
        rows = np.arange(shape[0])[:, None]
        cov = np.clip(lf.thickness / 2 + 0.5 - np.abs(rows - lf.depth_row), 0.0, 1.0)
        cov = np.broadcast_to(cov, shape).copy()
        cov[:, :c0] = 0.0
        cov[:, c1:] = 0.0
        img += (lf.brightness - spec.background) * cov
        lf_row, lf_mask = int(lf.depth_row), cov >= 0.5

    for lam in spec.laminae:
        cov = lamina_coverage(lam, shape)
        img = img * (1.0 - cov) + lam.brightness * cov
        masks.append(cov >= 0.5)
        ends.append(tuple(int(v) for v in lam.lower_endpoint))

    rng = np.random.default_rng(spec.seed)
    if spec.speckle_sigma > 0:
        img = img * speckle_field(shape, spec.speckle_sigma, rng)
        img = ndimage.uniform_filter(img, size=3, mode="reflect")
    img = np.clip(img, 0.0, 1.0)
    return img, GroundTruth(lower_endpoints=ends, masks=masks, lf_row=lf_row, lf_mask=lf_mask)


def canonical(seed: int = 0, speckle_sigma: float = 0.25) -> tuple[np.ndarray, GroundTruth]:
    """The default regression fixture: 256x256, one 32-degree lamina ending at (180, 120)."""
    return render(PhantomSpec(seed=seed, speckle_sigma=speckle_sigma))


def write_truth(truth: GroundTruth, spec: PhantomSpec, path) -> None:
    payload = {"spec": spec.to_dict(), "truth": truth.to_dict()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
