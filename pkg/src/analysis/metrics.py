import numpy as np
from numba import njit

from analysis.raster import RasterMask
from svg.geometry import OutlineSample
from svg.types import EmptyGeometryError, ShapeError


def iou(a: RasterMask, b: RasterMask) -> float:
    if a.resolution != b.resolution:
        raise ShapeError(f'cannot compare masks of resolution {a.resolution} and {b.resolution}')

    union = np.logical_or(a.bits, b.bits).sum()
    if union == 0:
        return 1.0

    inter = np.logical_and(a.bits, b.bits).sum()
    return float(inter / union)


@njit(cache=True)
def nearest_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.empty(x.shape[0], dtype=np.float64)
    for i in range(x.shape[0]):
        best = np.inf
        for j in range(y.shape[0]):
            dx = x[i, 0] - y[j, 0]
            dy = x[i, 1] - y[j, 1]
            d = dx * dx + dy * dy
            if d < best:
                best = d
        out[i] = np.sqrt(best)

    return out


def chamfer(x: OutlineSample, y: OutlineSample) -> float:
    """Symmetric, unsquared mean nearest-neighbour distance between two point sets."""
    if len(x) == 0 or len(y) == 0:
        raise EmptyGeometryError('chamfer distance needs two non-empty point sets')

    a = np.ascontiguousarray(x.points)
    b = np.ascontiguousarray(y.points)
    return 0.5 * (float(nearest_distances(a, b).mean()) + float(nearest_distances(b, a).mean()))
