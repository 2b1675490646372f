"""Outer-border contour tracing and Ramer-Douglas-Peucker simplification.

Points are ``(x, y)`` pixel coordinates: ``x`` is the column, ``y`` the row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# Moore neighbourhood in clockwise order (screen coordinates), as (dy, dx)
_RING = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_RING_INDEX = {d: i for i, d in enumerate(_RING)}


@dataclass
class Polyline:
    points: np.ndarray  # (n, 2) float or int, columns x, y
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (n, 2)")
        self.points = pts

    def __len__(self) -> int:
        return len(self.points)

    def vertices(self) -> np.ndarray:
        """Points with the first repeated at the end when closed."""
        if self.closed and len(self.points) > 1:
            return np.vstack([self.points, self.points[:1]])
        return self.points

    def to_list(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.points]


# --------------------------------------------------------------------------
# tracing

def _trace_border(mask: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbour tracing with Jacob's stopping criterion.

    ``mask`` is padded by one so neighbours are always addressable; ``start``
    is the component's topmost-leftmost pixel, whose west neighbour is
    background.
    """
    cur = start
    back = (start[0], start[1] - 1)
    path = [cur]
    first_state = None
    while True:
        k = _RING_INDEX[(back[0] - cur[0], back[1] - cur[1])]
        for step in range(1, 9):
            dy, dx = _RING[(k + step) % 8]
            nb = (cur[0] + dy, cur[1] + dx)
            if mask[nb]:
                pdy, pdx = _RING[(k + step - 1) % 8]
                back = (cur[0] + pdy, cur[1] + pdx)
                cur = nb
                break
        else:
            return path  # isolated pixel
        state = (cur, back)
        if first_state is None:
            first_state = state
        elif state == first_state:
            # path ends ..., start, first-move target: drop the repeats
            return path[:-1]
        path.append(cur)


def trace_contours(edges, min_points: int = 8) -> list[Polyline]:
    """One closed outer-border contour per 8-connected component of ``edges``."""
    edges = np.asarray(edges, dtype=bool)
    if not edges.any():
        return []
    labels, n = ndimage.label(edges, structure=np.ones((3, 3), dtype=int))
    padded = np.pad(labels, 1)
    out = []
    slices = ndimage.find_objects(labels)
    for lab in range(1, n + 1):
        sl = slices[lab - 1]
        sub = labels[sl] == lab
        r0 = int(np.flatnonzero(sub.any(axis=1))[0])
        c0 = int(np.flatnonzero(sub[r0])[0])
        start = (sl[0].start + r0 + 1, sl[1].start + c0 + 1)
        path = _trace_border(padded == lab, start)
        if len(path) < min_points:
            continue
        pts = np.array([(c - 1, r - 1) for r, c in path], dtype=np.int64)
        out.append(Polyline(pts, closed=True))
    return out


# --------------------------------------------------------------------------
# simplification

def segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to the segment ``a``-``b``."""
    points = np.asarray(points, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    ab = np.asarray(b, dtype=np.float64) - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(*(points - a).T)
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(points - proj).T)


def _rdp_keep(pts: np.ndarray, eps: float) -> np.ndarray:
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = segment_distance(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > eps:
            k += i + 1
            keep[k] = True
            stack.append((i, k))
            stack.append((k, j))
    return keep


def rdp_simplify(p: Polyline, eps: float = 2.0) -> Polyline:
    """Ramer-Douglas-Peucker simplification with tolerance ``eps`` pixels.

    Closed contours are opened at their first point (the topmost-leftmost
    pixel for traced contours), simplified with that point at both ends,
    and closed again.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if len(p) < 2:
        raise ValueError("need at least two points")
    pts = p.vertices()
    keep = _rdp_keep(pts, eps)
    out = pts[keep]
    if p.closed:
        out = out[:-1]
        if len(out) < 2:
            out = pts[[0, len(pts) // 2]]
    return Polyline(out, closed=p.closed)


def bresenham(p0, p1) -> np.ndarray:
    """Integer pixels on the segment p0-p1 (inclusive), as (x, y) rows."""
    x0, y0 = (int(round(v)) for v in p0)
    x1, y1 = (int(round(v)) for v in p1)
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    while True:
        out.append((x0, y0))
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
    return np.array(out, dtype=np.int64)


def rasterize(polylines, shape=None) -> np.ndarray:
    """Unique pixels covered by the polylines' segments, sorted by (y, x)."""
    chunks = []
    for pl in polylines:
        v = pl.vertices()
        if len(v) == 1:
            chunks.append(np.asarray(v, dtype=np.int64))
        for a, b in zip(v[:-1], v[1:]):
            chunks.append(bresenham(a, b))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    pts = np.unique(np.vstack(chunks), axis=0)
    if shape is not None:
        ok = (pts[:, 0] >= 0) & (pts[:, 0] < shape[1]) & (pts[:, 1] >= 0) & (pts[:, 1] < shape[0])
        pts = pts[ok]
    order = np.lexsort((pts[:, 0], pts[:, 1]))
    return pts[order]
