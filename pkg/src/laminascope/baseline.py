"""Template-matching lamina and ligamentum-flavum detector (comparison method).

The ridge map is the image multiplied by its phase symmetry.  A blurred
diagonal bar is matched against it with a sliding Pearson correlation to
find laminae; a second, horizontal bar template locates the ligamentum
flavum below each lamina by maximising ``R_LF - R_lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal
from scipy.special import erf

from .imagecore import as_image
from .phasesym import phase_symmetry

VAR_FLOOR = 1e-20


@dataclass(frozen=True)
class LaminaTemplate:
    """Gaussian-blurred bar.

    ``angle`` uses the phantom convention: the bar's long axis is
    perpendicular to the direction ``angle`` degrees below the x-axis, so
    32 matches a default phantom lamina and 90 gives a horizontal bar.
    """

    angle: float = 32.0
    length: float = 40.0
    along_blur_sigma: float = 2.0
    across_blur_sigma: float = 3.0

    def __post_init__(self):
        if self.length <= 0 or self.along_blur_sigma <= 0 or self.across_blur_sigma <= 0:
            raise ValueError("template length and blurs must be positive")

    @property
    def axis(self) -> np.ndarray:
        a = math.radians(self.angle)
        return np.array([math.sin(a), -math.cos(a)])   # (x, y), pointing up the bar

    def render(self) -> np.ndarray:
        """Template normalised to zero mean and unit (population) variance."""
        u = self.axis
        n = np.array([u[1] * -1.0, u[0]])  # normal (cos a, sin a)
        reach = 3.0 * max(self.along_blur_sigma, self.across_blur_sigma)
        hx = int(math.ceil(self.length / 2 * abs(u[0]) + reach))
        hy = int(math.ceil(self.length / 2 * abs(u[1]) + reach))
        yy, xx = np.mgrid[-hy:hy + 1, -hx:hx + 1].astype(np.float64)
        s = xx * u[0] + yy * u[1]
        w = xx * n[0] + yy * n[1]
        half = self.length / 2.0
        k = math.sqrt(2.0) * self.along_blur_sigma
        along = 0.5 * (erf((half - s) / k) + erf((half + s) / k))
        across = np.exp(-w ** 2 / (2.0 * self.across_blur_sigma ** 2))
        t = along * across
        t = t - t.mean()
        return t / t.std()

    def lower_offset(self) -> float:
        """Rows from the template centre down to the bar's lower end."""
        return self.length / 2.0 * abs(self.axis[1])


@dataclass(frozen=True)
class BaselineConfig:
    lamina: LaminaTemplate = LaminaTemplate()
    lf: LaminaTemplate = LaminaTemplate(angle=90.0, length=30.0, along_blur_sigma=2.0,
                                        across_blur_sigma=1.5)
    max_laminae: int = 3
    exclusion_mm: float = 20.0
    stop_fraction: float = 0.5
    lf_band_mm: float = 15.0
    use_ridge_map: bool = True
    fast: bool = False

    def __post_init__(self):
        if self.max_laminae < 1:
            raise ValueError("max_laminae must be >= 1")
        if self.exclusion_mm < 0 or self.lf_band_mm <= 0:
            raise ValueError("exclusion_mm must be >= 0 and lf_band_mm > 0")
        if not 0 <= self.stop_fraction <= 1:
            raise ValueError("stop_fraction must lie in [0, 1]")


# --------------------------------------------------------------------------
# Pearson matching

def _check_template(img: np.ndarray, tpl: np.ndarray) -> None:
    if tpl.ndim != 2 or tpl.shape[0] % 2 == 0 or tpl.shape[1] % 2 == 0:
        raise ValueError("template must be 2-D with odd dimensions")
    if tpl.shape[0] > img.shape[0] or tpl.shape[1] > img.shape[1]:
        raise ValueError(f"template {tpl.shape} larger than image {img.shape}")


def _embed(valid: np.ndarray, img_shape, tpl_shape) -> np.ndarray:
    out = np.zeros(img_shape)
    r, c = tpl_shape[0] // 2, tpl_shape[1] // 2
    out[r:r + valid.shape[0], c:c + valid.shape[1]] = valid
    return out


def _pearson_direct(img: np.ndarray, tpl: np.ndarray, rows_per_chunk: int = 8) -> np.ndarray:
    th, tw = tpl.shape
    t = tpl - tpl.mean()
    tnorm = math.sqrt(float((t * t).sum()))
    nr, nc = img.shape[0] - th + 1, img.shape[1] - tw + 1
    out = np.zeros((nr, nc))
    if tnorm == 0:
        return out
    for r0 in range(0, nr, rows_per_chunk):
        r1 = min(nr, r0 + rows_per_chunk)
        win = sliding_window_view(img[r0:r1 + th - 1], (th, tw))
        cen = win - win.mean(axis=(2, 3), keepdims=True)
        num = np.einsum("ijkl,kl->ij", cen, t)
        ss = np.einsum("ijkl,ijkl->ij", cen, cen)
        ok = ss > VAR_FLOOR * th * tw
        out[r0:r1][ok] = num[ok] / (np.sqrt(ss[ok]) * tnorm)
    return out


def _pearson_fft(img: np.ndarray, tpl: np.ndarray) -> np.ndarray:
    th, tw = tpl.shape
    n = th * tw
    t = tpl - tpl.mean()
    tnorm = math.sqrt(float((t * t).sum()))
    num = signal.fftconvolve(img, t[::-1, ::-1], mode="valid")
    ones = np.ones((th, tw))
    s1 = signal.fftconvolve(img, ones, mode="valid")
    s2 = signal.fftconvolve(img * img, ones, mode="valid")
    ss = np.maximum(s2 - s1 * s1 / n, 0.0)
    out = np.zeros_like(num)
    ok = ss > 1e-10 * n
    if tnorm > 0:
        out[ok] = num[ok] / (np.sqrt(ss[ok]) * tnorm)
    return np.clip(out, -1.0, 1.0)


def match_template(img, tpl, fast: bool = False) -> np.ndarray:
    """Pearson correlation of ``tpl`` with every image window.

    The map has the image's shape; each value sits at the window centre and
    positions where the template does not fit hold 0, as do windows with
    zero variance.  ``fast`` switches to FFT-based sums.
    """
    img = as_image(img)
    tpl = np.asarray(tpl, dtype=np.float64)
    _check_template(img, tpl)
    valid = _pearson_fft(img, tpl) if fast else _pearson_direct(img, tpl)
    return _embed(valid, img.shape, tpl.shape)


# --------------------------------------------------------------------------
# detection

def detect_laminae(sim, mm_per_px: float, max_count: int = 3, exclusion_mm: float = 20.0,
                   stop_fraction: float = 0.5) -> list[tuple[int, int, float]]:
    """Repeatedly take the similarity maximum and blank a disk around it.

    Returns ``(row, col, r)`` per lamina, best first.
    """
    if not mm_per_px > 0:
        raise ValueError("mm_per_px must be positive")
    work = np.array(sim, dtype=np.float64)
    radius = exclusion_mm / mm_per_px
    yy, xx = np.mgrid[:work.shape[0], :work.shape[1]]
    found = []
    first = None
    for _ in range(max_count):
        r, c = np.unravel_index(int(np.argmax(work)), work.shape)
        v = float(work[r, c])
        if not np.isfinite(v) or v <= 0:
            break
        if first is None:
            first = v
        elif v < stop_fraction * first:
            break
        found.append((int(r), int(c), v))
        work[(yy - r) ** 2 + (xx - c) ** 2 < radius * radius] = -np.inf
    return found


def detect_lf(r_lf, r_lam, lamina_locs, mm_per_px: float, band_mm: float = 15.0,
              offset_px: float = 0.0) -> list[tuple[int, int, float]]:
    """Ligamentum flavum under each lamina: argmax of ``R_LF - R_lam``.

    The search band spans the rows from ``offset_px`` below the lamina
    location down to ``band_mm`` further.  Ties go to the smaller row, then
    the smaller column.
    """
    r_lf = np.asarray(r_lf, dtype=np.float64)
    r_lam = np.asarray(r_lam, dtype=np.float64)
    if r_lf.shape != r_lam.shape:
        raise ValueError("similarity maps differ in shape")
    if not lamina_locs:
        raise ValueError("no lamina locations to search below")
    diff = r_lf - r_lam
    out = []
    for loc in lamina_locs:
        top = int(math.floor(loc[0] + offset_px)) + 1
        bottom = min(diff.shape[0], int(math.floor(loc[0] + offset_px + band_mm / mm_per_px)) + 1)
        top = max(top, 0)
        if top >= bottom:
            raise ValueError(f"empty search band below lamina at row {loc[0]}")
        band = diff[top:bottom]
        i, j = np.unravel_index(int(np.argmax(band)), band.shape)
        out.append((int(top + i), int(j), float(band[i, j])))
    return out


def ridge_map(img, cfg=None) -> np.ndarray:
    """Image intensity weighted by its phase symmetry."""
    from .phasesym import PhaseSymConfig

    cfg = cfg or PhaseSymConfig()
    img = as_image(img)
    return img * phase_symmetry(img, cfg.bank, cfg.noise)


def baseline_detect(img, cfg=None, denoise: bool = True):
    """Template-matching detection reported in the common result format.

    Depth is the row of the ligamentum flavum found under the best lamina.
    """
    from . import pipeline as pl
    from .hough import LineSegment

    cfg = cfg or pl.PipelineConfig(method="baseline")
    bc = cfg.baseline
    timer = pl.StageTimer()
    work = as_image(img)
    if min(work.shape) < pl.MIN_SIZE:
        raise ValueError(f"image must be at least {pl.MIN_SIZE}x{pl.MIN_SIZE}")
    if denoise:
        with timer("despeckle"):
            work = pl.despeckle_stage(work, cfg)
    with timer("phasesym"):
        ridge = ridge_map(work, cfg.phasesym) if bc.use_ridge_map else work
    with timer("template"):
        r_lam = match_template(ridge, bc.lamina.render(), fast=bc.fast)
        laminae = detect_laminae(r_lam, cfg.mm_per_px, bc.max_laminae, bc.exclusion_mm,
                                 bc.stop_fraction)
        if not laminae:
            return pl.failed("template-matching", "failed-no-segment",
                             "no positive lamina correlation", cfg, timer)
        r_lf = match_template(ridge, bc.lf.render(), fast=bc.fast)
        try:
            lfs = detect_lf(r_lf, r_lam, laminae, cfg.mm_per_px, bc.lf_band_mm,
                            bc.lamina.lower_offset())
        except ValueError as exc:
            return pl.failed("template-matching", "failed-no-segment", str(exc), cfg, timer)
    row, col, score = laminae[0]
    u = bc.lamina.axis * bc.lamina.length / 2.0
    p1 = (int(round(col + u[0])), int(round(row + u[1])))
    p2 = (int(round(col - u[0])), int(round(row - u[1])))
    a = math.radians(bc.lamina.angle)
    seg = LineSegment(p1=p1, p2=p2, theta=bc.lamina.angle,
                      rho=round(col * math.cos(a) + row * math.sin(a), 6), support=0)
    depth = float(lfs[0][0])
    extras = {"laminae": [list(x) for x in laminae], "lf": [list(x) for x in lfs]}
    return pl.DetectionResult(method="template-matching", status="ok", depth_px=depth,
                              depth_mm=depth * cfg.mm_per_px, chosen=seg, segments=[seg],
                              timings=timer.finish(), config=cfg.to_dict(), extras=extras)
