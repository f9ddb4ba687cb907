import numpy as np

from typing import List
from svg.canonical import DECIMALS, canonical_order
from svg.shapes import ellipse_commands
from svg.types import Command, L, M, Path, SvgScript

LO = 0.1
HI = 0.9

# smallest extent of a rect side or circle radius
MIN_SIZE = 0.05


def _clean(cmds: List[Command]) -> Path:
    # rounded to the canonical precision so the script survives serialization unchanged
    out = []
    for c in cmds:
        args = tuple(min(HI, max(LO, round(a, DECIMALS))) for a in c.args)
        out.append(Command(c.kind, args))
    return Path(tuple(out))


def _rect(rng: np.random.Generator) -> List[Command]:
    x0 = rng.uniform(LO, HI - MIN_SIZE)
    y0 = rng.uniform(LO, HI - MIN_SIZE)
    x1 = rng.uniform(x0 + MIN_SIZE, HI)
    y1 = rng.uniform(y0 + MIN_SIZE, HI)
    return [M(x0, y0), L(x1, y0), L(x1, y1), L(x0, y1), L(x0, y0)]


def _circle(rng: np.random.Generator) -> List[Command]:
    r = rng.uniform(MIN_SIZE, (HI - LO) / 2)
    cx = rng.uniform(LO + r, HI - r)
    cy = rng.uniform(LO + r, HI - r)
    return ellipse_commands(cx, cy, r, r)


def _polyline(rng: np.random.Generator) -> List[Command]:
    n = int(rng.integers(2, 7))
    pts = rng.uniform(LO, HI, size=(n + 1, 2))
    return [M(*pts[0])] + [L(*p) for p in pts[1:]]


SHAPES = (_rect, _circle, _polyline)


def synth_icon(rng: np.random.Generator) -> SvgScript:
    """1-4 paths of random rects, circles and 2-6 segment polylines inside [0.1, 0.9]^2."""
    n = int(rng.integers(1, 5))
    paths = []
    for _ in range(n):
        shape = SHAPES[int(rng.integers(len(SHAPES)))]
        paths.append(_clean(shape(rng)))

    return SvgScript(tuple(canonical_order(paths)))
