"""Log-Gabor phase symmetry and the phase-symmetry detection path.

Orientation angles follow the usual phase-congruency convention: measured
anticlockwise from the x-axis with y pointing *up*.  In row/column terms
an orientation of 150 degrees selects ridges whose normal points 30
degrees below the x-axis, which is where diagonal laminae sit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .imagecore import as_image, frequency_grid, reflect_pad
from .morphology import StructuringElement, ThresholdError, dilate, otsu_threshold

RAYLEIGH_MEAN = math.sqrt(math.pi / 2.0)
RAYLEIGH_SD = math.sqrt((4.0 - math.pi) / 2.0)
EPSILON = 1e-4


@dataclass(frozen=True)
class LogGaborBank:
    scales: int = 5
    orientations: tuple[float, ...] = (90.0, 120.0, 150.0)
    min_wavelength: float = 3.0
    mult: float = 2.1
    sigma_ratio: float = 0.55
    angular_spread: float = 1.2   # angular sigma in units of orientation spacing
    lowpass_radius: float = 0.035
    lowpass_sharpness: int = 10
    pad: int = 32
    polarity: str = "bright"   # "bright": e - |o|;  "both": |e| - |o|

    def __post_init__(self):
        if self.scales < 1 or not self.orientations:
            raise ValueError("need at least one scale and one orientation")
        if not 0 < self.sigma_ratio < 1:
            raise ValueError("sigma_ratio must lie in (0, 1)")
        if self.min_wavelength < 2 or self.mult <= 1:
            raise ValueError("min_wavelength must be >= 2 and mult > 1")
        if not (0 < self.lowpass_radius <= 0.5 and self.lowpass_sharpness >= 1):
            raise ValueError("bad low-pass parameters")
        if not self.angular_spread > 0 or self.pad < 0:
            raise ValueError("angular_spread must be positive and pad non-negative")
        if self.polarity not in ("bright", "both"):
            raise ValueError("polarity must be 'bright' or 'both'")

    def centre_frequency(self, scale: int) -> float:
        """Centre frequency (cycles/pixel) of 0-based ``scale``."""
        return 1.0 / (self.min_wavelength * self.mult ** scale)

    def radial(self, radius, scale: int) -> np.ndarray:
        """Log-Gabor radial profile; exactly 1 at the centre frequency, 0 at DC."""
        r = np.asarray(radius, dtype=np.float64)
        safe = np.where(r > 0, r, 1.0)
        g = np.exp(-np.log(safe / self.centre_frequency(scale)) ** 2
                   / (2.0 * math.log(self.sigma_ratio) ** 2))
        return np.where(r > 0, g, 0.0)

    def lowpass(self, radius) -> np.ndarray:
        r = np.asarray(radius, dtype=np.float64)
        return 1.0 / (1.0 + (r / self.lowpass_radius) ** (2 * self.lowpass_sharpness))

    @property
    def angular_sigma(self) -> float:
        if len(self.orientations) > 1:
            spacing = min(abs(b - a) for a, b in zip(self.orientations, self.orientations[1:]))
        else:
            spacing = 180.0
        return math.radians(self.angular_spread * spacing)

    def transfer(self, shape) -> np.ndarray:
        """One-sided filter responses, shape (scales, orientations, H, W)."""
        fy, fx = frequency_grid(shape)
        radius = np.hypot(fx, fy)
        angle = np.arctan2(-fy, fx)   # y up
        low = self.lowpass(radius)
        sig = self.angular_sigma
        out = np.empty((self.scales, len(self.orientations)) + tuple(shape))
        spread = []
        for theta in self.orientations:
            d = np.angle(np.exp(1j * (angle - math.radians(theta))))
            spread.append(np.exp(-d ** 2 / (2.0 * sig ** 2)))
        for n in range(self.scales):
            rad = self.radial(radius, n) * low
            for i, s in enumerate(spread):
                out[n, i] = rad * s
        return out


@dataclass(frozen=True)
class NoiseModel:
    """Noise-energy threshold ``T = (mu + k sigma) / underestimate``.

    ``mu`` and ``sigma`` come from a Rayleigh fit to the smallest-scale
    amplitude (median based) unless ``tau`` fixes the Rayleigh scale of that
    scale directly.  Other scales inherit the fit through their filter
    energies.
    """

    k_sigma: float = 2.0
    underestimate_factor: float = 0.9
    tau: float | None = None

    def __post_init__(self):
        if self.k_sigma < 0:
            raise ValueError("k_sigma must be non-negative")
        if not 0 < self.underestimate_factor <= 1:
            raise ValueError("underestimate_factor must lie in (0, 1]")
        if self.tau is not None and self.tau < 0:
            raise ValueError("tau must be non-negative")

    def threshold(self, tau: float) -> float:
        mu, sd = tau * RAYLEIGH_MEAN, tau * RAYLEIGH_SD
        return (mu + self.k_sigma * sd) / self.underestimate_factor


@dataclass(frozen=True)
class PhaseSymConfig:
    bank: LogGaborBank = field(default_factory=LogGaborBank)
    noise: NoiseModel = field(default_factory=NoiseModel)
    dilation_size: int = 3
    otsu_gain: float = 0.5

    def __post_init__(self):
        if self.dilation_size < 1 or not self.otsu_gain > 0:
            raise ValueError("dilation_size must be >= 1 and otsu_gain positive")


def log_gabor_responses(img, bank: LogGaborBank | None = None):
    """Even and odd responses, each shaped (scales, orientations, H, W)."""
    bank = bank or LogGaborBank()
    img = as_image(img)
    if min(img.shape) < 16:
        raise ValueError("phase symmetry needs an image of at least 16x16")
    pad = min(bank.pad, img.shape[0], img.shape[1])
    work = reflect_pad(img, pad) if pad else img
    h = bank.transfer(work.shape)
    resp = sfft.ifft2(h * sfft.fft2(work), axes=(-2, -1))
    resp = resp[..., pad:pad + img.shape[0], pad:pad + img.shape[1]]
    return resp.real, resp.imag, h


def scale_thresholds(even, odd, transfer, noise: NoiseModel) -> np.ndarray:
    """Per-scale noise thresholds from the Rayleigh fit at the finest scale."""
    energy = np.sqrt((transfer ** 2).sum(axis=(-2, -1)))   # (scales, orientations)
    if noise.tau is not None:
        tau0 = noise.tau
    else:
        amp0 = np.hypot(even[0], odd[0])
        # median of a Rayleigh(tau) law is tau * sqrt(ln 4)
        tau0 = float(np.median(amp0)) / math.sqrt(math.log(4.0))
    ref = energy[0].mean()
    ratio = energy.mean(axis=1) / ref if ref > 0 else np.ones(energy.shape[0])
    return np.array([noise.threshold(tau0 * r) for r in ratio])


def phase_symmetry(img, bank: LogGaborBank | None = None,
                   noise: NoiseModel | None = None) -> np.ndarray:
    """Phase symmetry map in [0, 1].

    Each filter contributes ``max(|e| - |o| - T_n, 0)``; the sum is divided
    by the summed local amplitude ``sqrt(e^2 + o^2 + eps)``.  With
    ``polarity="bright"`` the signed even response replaces ``|e|``, so
    only bright symmetric features (bone) count and the dark troughs that
    flank a bright bar do not.
    """
    bank = bank or LogGaborBank()
    noise = noise or NoiseModel()
    even, odd, h = log_gabor_responses(img, bank)
    t = scale_thresholds(even, odd, h, noise)[:, None, None, None]
    sym = even if bank.polarity == "bright" else np.abs(even)
    num = np.maximum(sym - np.abs(odd) - t, 0.0).sum(axis=(0, 1))
    den = np.sqrt(even ** 2 + odd ** 2 + EPSILON).sum(axis=(0, 1))
    return np.clip(num / den, 0.0, 1.0)


def ps_binary(ps, cfg: PhaseSymConfig | None = None) -> tuple[np.ndarray, float, float]:
    """Dilate the PS map twice and cut at ``otsu_gain`` times its Otsu level.

    Returns (binary map, Otsu level, threshold actually used).
    """
    cfg = cfg or PhaseSymConfig()
    se = StructuringElement.square(cfg.dilation_size)
    grown = dilate(dilate(ps, se), se)
    level = otsu_threshold(grown)
    cut = cfg.otsu_gain * level
    return grown >= cut, level, cut


def alt_detect(img, cfg=None, denoise: bool = True):
    """Phase-symmetry detection: PS, two small dilations, halved Otsu, then
    the shared edge/contour/Hough/selection tail."""
    from . import pipeline as pl

    cfg = cfg or pl.PipelineConfig(method="alternative")
    timer = pl.StageTimer()
    work = as_image(img)
    if min(work.shape) < pl.MIN_SIZE:
        raise ValueError(f"image must be at least {pl.MIN_SIZE}x{pl.MIN_SIZE}")
    if denoise:
        with timer("despeckle"):
            work = pl.despeckle_stage(work, cfg)
    with timer("phasesym"):
        ps = phase_symmetry(work, cfg.phasesym.bank, cfg.phasesym.noise)
    extras = {}
    try:
        with timer("morphology"):
            binary, level, cut = ps_binary(ps, cfg.phasesym)
    except ThresholdError as exc:
        return pl.failed("alternative", "failed-threshold", str(exc), cfg, timer)
    extras.update(otsu_level=level, ps_threshold=cut)
    return pl.run_tail(binary, cfg, timer, "alternative", extras)
