"""Angle-restricted straight-line Hough transform and segment extraction.

Lines are parameterised by their normal: ``rho = x cos(theta) + y sin(theta)``
with ``x`` the column and ``y`` the row (pointing down), so ``theta`` is
measured from the x-axis towards the bottom of the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HoughConfig:
    theta_min: float = 20.0
    theta_max: float = 75.0
    theta_res: float = 5.0
    rho_res: float = 2.0
    n_peaks: int = 20
    min_seg_len: float = 20.0
    max_gap: float = 8.0

    def __post_init__(self):
        if not self.theta_min < self.theta_max:
            raise ValueError("theta_min must be below theta_max")
        if not (self.theta_res > 0 and self.rho_res > 0):
            raise ValueError("resolutions must be positive")
        if self.n_peaks < 1:
            raise ValueError("n_peaks must be >= 1")
        if self.min_seg_len < 0 or self.max_gap < 0:
            raise ValueError("segment length and gap must be non-negative")

    @property
    def thetas(self) -> np.ndarray:
        """Bin centres in degrees, ``theta_min`` to ``theta_max`` inclusive."""
        n = int(math.floor((self.theta_max - self.theta_min) / self.theta_res + 1e-9)) + 1
        return self.theta_min + self.theta_res * np.arange(n)


@dataclass
class HoughAccumulator:
    bins: np.ndarray          # votes, shape (n_rho, n_theta)
    rho_offset: int           # bins[i] holds rho-bin index i - rho_offset
    thetas: np.ndarray        # degrees
    rho_res: float

    def rho_of(self, i: int) -> float:
        return (i - self.rho_offset) * self.rho_res

    def to_image(self) -> np.ndarray:
        """Votes scaled to [0, 1] for saving as a heat map."""
        peak = self.bins.max()
        return self.bins / peak if peak > 0 else self.bins.astype(np.float64)


@dataclass(frozen=True)
class Peak:
    rho: float
    theta: float
    votes: int


@dataclass(frozen=True)
class LineSegment:
    p1: tuple[int, int]   # (x, y)
    p2: tuple[int, int]
    theta: float
    rho: float
    support: int

    @property
    def length(self) -> float:
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    @property
    def lower_endpoint(self) -> tuple[int, int]:
        """Endpoint with the larger row; ties go to the smaller column."""
        a, b = self.p1, self.p2
        return a if (a[1], -a[0]) >= (b[1], -b[0]) else b

    def to_dict(self) -> dict:
        return {"p1": [int(v) for v in self.p1], "p2": [int(v) for v in self.p2],
                "theta": float(self.theta), "rho": float(self.rho),
                "support": int(self.support)}


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("no edge points to vote with")
    return pts


def rho_bins(points, thetas_deg, rho_res: float) -> np.ndarray:
    """Rounded rho bin of every point for every theta, shape (n_points, n_theta)."""
    t = np.radians(np.asarray(thetas_deg, dtype=np.float64))
    rho = points[:, :1] * np.cos(t) + points[:, 1:] * np.sin(t)
    return np.floor(rho / rho_res + 0.5).astype(np.int64)


def hough_vote(points, cfg: HoughConfig | None = None) -> HoughAccumulator:
    cfg = cfg or HoughConfig()
    pts = _as_points(points)
    thetas = cfg.thetas
    rb = rho_bins(pts, thetas, cfg.rho_res)
    offset = int(max(0, -rb.min()))
    n_rho = int(rb.max()) + offset + 1
    bins = np.zeros((n_rho, len(thetas)), dtype=np.int64)
    cols = np.broadcast_to(np.arange(len(thetas)), rb.shape)
    np.add.at(bins, (rb + offset, cols), 1)
    return HoughAccumulator(bins=bins, rho_offset=offset, thetas=thetas, rho_res=cfg.rho_res)


def find_peaks(acc: HoughAccumulator, cfg: HoughConfig | None = None) -> list[Peak]:
    """Up to ``n_peaks`` maxima, suppressing the 3x3 bin block around each.

    Equal vote counts are taken in order of smaller rho, then smaller theta.
    """
    cfg = cfg or HoughConfig()
    if acc.bins.size == 0:
        raise ValueError("empty accumulator")
    work = acc.bins.copy()
    peaks = []
    for _ in range(cfg.n_peaks):
        best = work.max()
        if best <= 0:
            break
        # row-major order means the first hit has the smallest rho, then theta
        i, j = np.unravel_index(int(np.argmax(work)), work.shape)
        peaks.append(Peak(rho=acc.rho_of(i), theta=float(acc.thetas[j]), votes=int(best)))
        work[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2] = 0
    return peaks


def line_residual(points, rho: float, theta_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return pts[:, 0] * math.cos(t) + pts[:, 1] * math.sin(t) - rho


def extract_segments(points, peaks, cfg: HoughConfig | None = None) -> list[LineSegment]:
    """Split each peak's supporting points into gap-free runs along the line."""
    cfg = cfg or HoughConfig()
    pts = _as_points(points)
    out = []
    for pk in peaks:
        near = np.abs(line_residual(pts, pk.rho, pk.theta)) <= cfg.rho_res
        if not near.any():
            continue
        sup = pts[near]
        t = math.radians(pk.theta)
        along = -sup[:, 0] * math.sin(t) + sup[:, 1] * math.cos(t)
        order = np.lexsort((sup[:, 0], along))
        sup, along = sup[order], along[order]
        breaks = np.flatnonzero(np.diff(along) > cfg.max_gap) + 1
        for lo, hi in zip(np.r_[0, breaks], np.r_[breaks, len(sup)]):
            if along[hi - 1] - along[lo] < cfg.min_seg_len:
                continue
            a, b = sup[lo], sup[hi - 1]
            out.append(LineSegment(p1=(int(a[0]), int(a[1])), p2=(int(b[0]), int(b[1])),
                                   theta=pk.theta, rho=pk.rho, support=int(hi - lo)))
    return out
