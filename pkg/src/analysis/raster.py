import numpy as np
from numba import njit
from PIL import Image

from typing import List, Union
from svg.geometry import subpaths
from svg.types import ShapeError, SvgScript

MIN_RESOLUTION = 8
FILL_RULES = ('nonzero', 'evenodd')


class RasterMask:
    """R x R occupancy grid; pixel (i, j) covers [j/R, (j+1)/R) x [i/R, (i+1)/R)."""
    def __init__(self, bits: np.ndarray):
        bits = np.asarray(bits, dtype=np.bool_)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
            raise ShapeError(f'masks must be square, got {bits.shape}')
        if bits.shape[0] < MIN_RESOLUTION:
            raise ShapeError(f'mask resolution must be >= {MIN_RESOLUTION}, got {bits.shape[0]}')

        self.bits = bits

    @property
    def resolution(self) -> int:
        return self.bits.shape[0]

    def area(self) -> float:
        return float(self.bits.sum()) / self.bits.size

    def __eq__(self, other):
        return isinstance(other, RasterMask) and np.array_equal(self.bits, other.bits)

    def __repr__(self):
        return f'RasterMask(R={self.resolution}, set={int(self.bits.sum())})'


@njit(cache=True)
def _scanline(edges: np.ndarray, resolution: int, evenodd: bool, out: np.ndarray):
    n = edges.shape[0]
    xs = np.empty(n, dtype=np.float64)
    ws = np.empty(n, dtype=np.int64)

    for i in range(resolution):
        y = (i + 0.5) / resolution

        k = 0
        for e in range(n):
            x0, y0, x1, y1 = edges[e, 0], edges[e, 1], edges[e, 2], edges[e, 3]
            if y0 == y1:
                continue

            # half-open in y so shared vertices are counted once
            if min(y0, y1) <= y < max(y0, y1):
                t = (y - y0) / (y1 - y0)
                xs[k] = x0 + t * (x1 - x0)
                ws[k] = 1 if y1 > y0 else -1
                k += 1

        if k < 2:
            continue

        order = np.argsort(xs[:k])
        wind = 0
        for j in range(k - 1):
            wind += ws[order[j]]
            inside = (abs(wind) % 2 == 1) if evenodd else (wind != 0)
            if not inside:
                continue

            # pixel centers (c + 0.5) / R inside [xa, xb)
            c0 = max(0, int(np.ceil(xs[order[j]] * resolution - 0.5)))
            c1 = min(resolution, int(np.ceil(xs[order[j + 1]] * resolution - 0.5)))
            for c in range(c0, c1):
                out[i, c] = True


def ring_edges(rings: List[np.ndarray]) -> np.ndarray:
    # every ring is implicitly closed
    edges = []
    for r in rings:
        closed = np.concatenate([r, r[:1]]) if not np.array_equal(r[0], r[-1]) else r
        edges.append(np.concatenate([closed[:-1], closed[1:]], axis=1))

    if not edges:
        return np.zeros((0, 4), dtype=np.float64)
    return np.ascontiguousarray(np.concatenate(edges), dtype=np.float64)


def rasterize(s: SvgScript, resolution: int = 128, rule: str = 'nonzero') -> RasterMask:
    if resolution < MIN_RESOLUTION:
        raise ShapeError(f'mask resolution must be >= {MIN_RESOLUTION}, got {resolution}')
    if rule not in FILL_RULES:
        raise ValueError(f'unknown fill rule {rule!r}, expected one of {FILL_RULES}')

    bits = np.zeros((resolution, resolution), dtype=np.bool_)
    tol = 0.25 / resolution
    for path in s:
        # each path is filled on its own then composited by union
        edges = ring_edges(subpaths(path, tol))
        if len(edges):
            _scanline(edges, resolution, rule == 'evenodd', bits)

    return RasterMask(bits)


def write_pgm(image: Union[RasterMask, np.ndarray], path: str):
    """Binary PGM export; masks are written with foreground 255, float images scaled from [0, 1]."""
    if isinstance(image, RasterMask):
        data = image.bits.astype(np.uint8) * 255
    else:
        arr = np.asarray(image)
        if arr.ndim == 3:
            arr = arr[..., 0]

        if arr.dtype == np.bool_:
            data = arr.astype(np.uint8) * 255
        elif np.issubdtype(arr.dtype, np.floating):
            data = np.floor(np.clip(arr, 0., 1.) * 255 + 0.5).astype(np.uint8)
        else:
            data = arr.astype(np.uint8)

    Image.fromarray(data).save(path, format='PPM')
