import math
import numpy as np

from typing import List, Sequence
from svg.types import ORIGIN, CommandKind, EmptyGeometryError, Path, Point, SvgScript

# subdivision depth at which a cubic is emitted regardless of flatness
MAX_DEPTH = 24

# default tolerance for outline sampling in unit-square coordinates
OUTLINE_TOL = 1e-4


class OutlineSample:
    """Points spread uniformly by arclength over the outlines of a script."""
    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 2)

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f'OutlineSample(n={len(self)})'


def _lerp(a: Point, b: Point, t: float) -> Point:
    # (1 - t) * a + t * b is exact at both t=0 and t=1
    return ((1 - t) * a[0] + t * b[0], (1 - t) * a[1] + t * b[1])

def cubic_point(p0: Point, p1: Point, p2: Point, p3: Point, t: float) -> Point:
    a = _lerp(p0, p1, t)
    b = _lerp(p1, p2, t)
    c = _lerp(p2, p3, t)

    d = _lerp(a, b, t)
    e = _lerp(b, c, t)
    return _lerp(d, e, t)

def split_cubic(p0: Point, p1: Point, p2: Point, p3: Point, t: float = 0.5):
    a = _lerp(p0, p1, t)
    b = _lerp(p1, p2, t)
    c = _lerp(p2, p3, t)
    d = _lerp(a, b, t)
    e = _lerp(b, c, t)
    f = _lerp(d, e, t)
    return (p0, a, d, f), (f, e, c, p3)

def segment_distance(p: Point, a: Point, b: Point) -> float:
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    l2 = dx * dx + dy * dy
    if l2 == 0:
        return math.hypot(p[0] - a[0], p[1] - a[1])

    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (a[0] + t * dx), p[1] - (a[1] + t * dy))


def _flatten_cubic(p0: Point, p1: Point, p2: Point, p3: Point, tol: float, out: List[Point], depth: int = 0):
    # the curve lies in the hull of its controls, so control distance to the chord bounds its deviation
    flat = max(segment_distance(p1, p0, p3), segment_distance(p2, p0, p3)) <= tol
    if flat or depth >= MAX_DEPTH:
        out.append(p3)
        return

    left, right = split_cubic(p0, p1, p2, p3)
    _flatten_cubic(*left, tol, out, depth + 1)
    _flatten_cubic(*right, tol, out, depth + 1)


def subpaths(path: Path, tol: float) -> List[np.ndarray]:
    """Flatten a path into one polyline per subpath, splitting at every MoveTo."""
    if tol <= 0:
        raise ValueError('flatten tolerance must be positive')

    rings: List[List[Point]] = []
    ring: List[Point] = [ORIGIN]
    cursor = ORIGIN
    for cmd in path:
        if cmd.kind is CommandKind.MoveTo:
            rings.append(ring)
            cursor = cmd.end
            ring = [cursor]

        elif cmd.kind is CommandKind.LineTo:
            cursor = cmd.end
            ring.append(cursor)

        else:
            p1, p2, p3 = cmd.points()
            _flatten_cubic(cursor, p1, p2, p3, tol, ring)
            cursor = p3

    rings.append(ring)
    return [np.asarray(r, dtype=np.float64) for r in rings if len(r) > 1]


def flatten(path: Path, tol: float) -> np.ndarray:
    """Polyline following the cursor from the (0, 0) start through every command."""
    if tol <= 0:
        raise ValueError('flatten tolerance must be positive')

    out: List[Point] = [ORIGIN]
    for cmd in path:
        if cmd.kind is CommandKind.CubicBezier:
            p1, p2, p3 = cmd.points()
            _flatten_cubic(out[-1], p1, p2, p3, tol, out)
        else:
            out.append(cmd.end)

    return np.asarray(out, dtype=np.float64)


def outline_rings(script: SvgScript, tol: float) -> List[np.ndarray]:
    return [ring for path in script for ring in subpaths(path, tol)]


def arclength_sample(script: SvgScript, m: int, tol: float = OUTLINE_TOL) -> OutlineSample:
    if m < 1:
        raise ValueError(f'sample count must be >= 1, got {m}')

    rings = outline_rings(script, tol)
    return sample_rings(rings, m)


def sample_rings(rings: Sequence[np.ndarray], m: int) -> OutlineSample:
    starts = [r[:-1] for r in rings]
    ends = [r[1:] for r in rings]
    if not starts:
        raise EmptyGeometryError('script has no outline to sample')

    a = np.concatenate(starts)
    b = np.concatenate(ends)
    lengths = np.linalg.norm(b - a, axis=1)
    total = lengths.sum()
    if not total > 0:
        raise EmptyGeometryError('script outline has zero length')

    # midpoint rule: samples at (k + 0.5) / m of the total length
    targets = (np.arange(m) + 0.5) * (total / m)
    cum = np.concatenate([[0.], np.cumsum(lengths)])
    seg = np.searchsorted(cum, targets, side='right') - 1
    seg = np.clip(seg, 0, len(lengths) - 1)

    # zero-length segments are never selected since cum does not advance over them
    local = (targets - cum[seg]) / np.where(lengths[seg] > 0, lengths[seg], 1.)
    local = np.clip(local, 0., 1.)[:, None]
    points = (1 - local) * a[seg] + local * b[seg]
    return OutlineSample(points)
