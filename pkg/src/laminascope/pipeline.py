"""End-to-end lamina detection and epidural depth measurement.

Main method: despeckle, two square dilations, Otsu binarisation and disk
erosion, Prewitt edge map, contour tracing with RDP simplification, Hough
line detection, then choose the lowermost lamina segment.  Its lower
endpoint's row (measured from the image top, i.e. the transducer face) is
the reported depth.
"""

from __future__ import annotations

import dataclasses
import json
import statistics
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import contours as ct
from .baseline import BaselineConfig
from .despeckle import DiffusionConfig, cwd_denoise
from .edgemap import edge_map
from .hough import HoughConfig, LineSegment, extract_segments, find_peaks, hough_vote
from .imagecore import as_image
from .morphology import MorphologyConfig, ThresholdError, double_dilate, threshold_and_erode
from .phasesym import PhaseSymConfig

MIN_SIZE = 64
METHODS = ("main", "alternative", "baseline")
STATUSES = ("ok", "failed-threshold", "failed-no-segment")
TIMING_KEYS = ("despeckle", "morphology", "edge", "rdp", "hough", "total")


@dataclass(frozen=True)
class PipelineConfig:
    despeckle: DiffusionConfig = field(default_factory=DiffusionConfig)
    morphology: MorphologyConfig = field(default_factory=MorphologyConfig)
    edge_frac: float = 0.2
    rdp_epsilon: float = 2.0
    min_contour_points: int = 8
    hough: HoughConfig = field(default_factory=HoughConfig)
    phasesym: PhaseSymConfig = field(default_factory=PhaseSymConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    mm_per_px: float = 0.15
    method: str = "main"
    skin_offset: bool = False
    outlier_mm: float = 10.0

    def __post_init__(self):
        if not self.mm_per_px > 0:
            raise ValueError("mm_per_px must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not 0 < self.edge_frac < 1:
            raise ValueError("edge_frac must lie in (0, 1)")
        if not self.rdp_epsilon > 0:
            raise ValueError("rdp_epsilon must be positive")
        if self.min_contour_points < 2:
            raise ValueError("min_contour_points must be >= 2")
        if not self.outlier_mm > 0:
            raise ValueError("outlier_mm must be positive")

    def replace(self, **kw) -> "PipelineConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


def _plain(obj):
    """Recursively turn tuples and numpy scalars into JSON-friendly values."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


class StageTimer:
    """Accumulates monotonic wall time per named stage."""

    def __init__(self):
        self.times: dict[str, float] = {}
        self._start = time.perf_counter()

    @contextmanager
    def __call__(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[name] = self.times.get(name, 0.0) + time.perf_counter() - t0

    def finish(self) -> dict[str, float]:
        out = {k: 0.0 for k in TIMING_KEYS}
        out.update(self.times)
        out["total"] = time.perf_counter() - self._start
        return out


@dataclass
class DetectionResult:
    method: str
    status: str
    depth_px: float | None = None
    depth_mm: float | None = None
    chosen: LineSegment | None = None
    segments: list[LineSegment] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    message: str = ""
    outlier: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "method": self.method,
            "status": self.status,
            "depth_px": self.depth_px,
            "depth_mm": self.depth_mm,
            "chosen": self.chosen.to_dict() if self.chosen else None,
            "segments": [s.to_dict() for s in self.segments],
            "timings": dict(self.timings) if timings else {},
            "outlier": self.outlier,
            "message": self.message,
            "extras": _plain(self.extras),
            "config": self.config,
        }
        if not timings:
            del d["timings"]
        return d

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)


def failed(method: str, status: str, message: str, cfg: PipelineConfig,
           timer: StageTimer, extras: dict | None = None) -> DetectionResult:
    return DetectionResult(method=method, status=status, timings=timer.finish(),
                           config=cfg.to_dict(), message=message, extras=extras or {})


# --------------------------------------------------------------------------
# stages

def despeckle_stage(img: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    return cwd_denoise(img, cfg.despeckle)


def select_lowermost(segments, cfg: PipelineConfig) -> LineSegment | None:
    """Segment with the lowest lower endpoint among those in the theta range.

    Ties: more supporting points, then smaller theta, then smaller rho.
    """
    lo, hi = cfg.hough.theta_min, cfg.hough.theta_max
    cand = [s for s in segments if lo <= s.theta <= hi]
    if not cand:
        return None
    return min(cand, key=lambda s: (-s.lower_endpoint[1], -s.support, s.theta, s.rho))


def skin_row(img: np.ndarray) -> int:
    """First row whose mean intensity reaches half the brightest row mean."""
    prof = as_image(img).mean(axis=1)
    return int(np.flatnonzero(prof >= 0.5 * prof.max())[0]) if prof.max() > 0 else 0


def run_tail(binary: np.ndarray, cfg: PipelineConfig, timer: StageTimer, method: str,
             extras: dict | None = None, reference: np.ndarray | None = None) -> DetectionResult:
    """Edge map, contours, Hough and lowermost-segment selection."""
    extras = dict(extras or {})
    with timer("edge"):
        edges = edge_map(binary, cfg.edge_frac)
    with timer("rdp"):
        polys = ct.trace_contours(edges, cfg.min_contour_points)
        simple = [ct.rdp_simplify(p, cfg.rdp_epsilon) for p in polys]
        pts = ct.rasterize(simple, binary.shape)
    if len(pts) == 0:
        return failed(method, "failed-no-segment", "edge map has no contours", cfg, timer, extras)
    with timer("hough"):
        acc = hough_vote(pts, cfg.hough)
        peaks = find_peaks(acc, cfg.hough)
        segments = extract_segments(pts, peaks, cfg.hough)
        chosen = select_lowermost(segments, cfg)
    extras["top_peak"] = {"rho": peaks[0].rho, "theta": peaks[0].theta,
                          "votes": peaks[0].votes} if peaks else None
    if chosen is None:
        res = failed(method, "failed-no-segment", "no Hough segment in the lamina angle range",
                     cfg, timer, extras)
        res.segments = segments
        return res
    depth = float(chosen.lower_endpoint[1])
    if cfg.skin_offset and reference is not None:
        skin = skin_row(reference)
        extras["skin_row"] = skin
        depth -= skin
    return DetectionResult(method=method, status="ok", depth_px=depth,
                           depth_mm=depth * cfg.mm_per_px, chosen=chosen,
                           segments=segments, timings=timer.finish(),
                           config=cfg.to_dict(), extras=extras)


def _check_input(img) -> np.ndarray:
    img = as_image(img)
    if min(img.shape) < MIN_SIZE:
        raise ValueError(f"image must be at least {MIN_SIZE}x{MIN_SIZE}, got {img.shape}")
    return img


def detect_main(img, cfg: PipelineConfig | None = None, denoise: bool = True) -> DetectionResult:
    cfg = cfg or PipelineConfig()
    img = _check_input(img)
    timer = StageTimer()
    work = img
    if denoise:
        with timer("despeckle"):
            work = despeckle_stage(img, cfg)
    try:
        with timer("morphology"):
            dilated = double_dilate(work, cfg.morphology)
        with timer("edge"):
            binary, level = threshold_and_erode(dilated, cfg.morphology)
    except ThresholdError as exc:
        return failed("main", "failed-threshold", str(exc), cfg, timer)
    return run_tail(binary, cfg, timer, "main", {"otsu_level": level}, reference=work)


def detect(img, cfg: PipelineConfig | None = None, denoise: bool = True) -> DetectionResult:
    """Run the configured method on one image.

    ``denoise=False`` skips the despeckling stage, for callers that have
    already denoised the image (the benchmark shares that step).
    """
    cfg = cfg or PipelineConfig()
    if cfg.method == "main":
        return detect_main(img, cfg, denoise)
    if cfg.method == "alternative":
        from .phasesym import alt_detect
        return alt_detect(img, cfg, denoise)
    from .baseline import baseline_detect
    return baseline_detect(img, cfg, denoise)


def detect_sequence(frames, cfg: PipelineConfig | None = None) -> list[DetectionResult]:
    """Detect on every frame in order and flag depth outliers.

    A frame is an outlier when its depth differs by more than
    ``cfg.outlier_mm`` from the median depth of the earlier ok frames.
    """
    cfg = cfg or PipelineConfig()
    frames = list(frames)
    if not frames:
        raise ValueError("need at least one frame")
    out, history = [], []
    for frame in frames:
        res = detect(frame, cfg)
        if res.ok:
            if history and abs(res.depth_mm - statistics.median(history)) > cfg.outlier_mm:
                res.outlier = True
            history.append(res.depth_mm)
        out.append(res)
    return out


# --------------------------------------------------------------------------
# overlay

def overlay(img, result: DetectionResult) -> np.ndarray:
    """RGB uint8 image with segments (green), the chosen one (red) and a
    depth marker (yellow) burned in."""
    img = as_image(img)
    grey = np.floor(np.clip(img, 0, 1) * 255 + 0.5).astype(np.uint8)
    rgb = np.stack([grey] * 3, axis=-1)
    h, w = img.shape

    def paint(pts, colour):
        pts = pts[(pts[:, 0] >= 0) & (pts[:, 0] < w) & (pts[:, 1] >= 0) & (pts[:, 1] < h)]
        rgb[pts[:, 1], pts[:, 0]] = colour

    for s in result.segments:
        paint(ct.bresenham(s.p1, s.p2), (0, 255, 0))
    if result.chosen is not None:
        paint(ct.bresenham(result.chosen.p1, result.chosen.p2), (255, 0, 0))
        x, y = result.chosen.lower_endpoint
        xs = np.arange(max(0, x - 10), min(w, x + 11))
        paint(np.stack([xs, np.full_like(xs, y)], axis=1), (255, 255, 0))
    return rgb


def save_overlay(img, result: DetectionResult, path) -> None:
    from PIL import Image

    Image.fromarray(overlay(img, result)).save(path, format="PNG")
