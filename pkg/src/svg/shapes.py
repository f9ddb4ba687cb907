import re

from typing import List, Mapping, Union
from svg.types import C, Command, DegenerateShapeError, L, M
from svg.parser import NUMBER_RE

# quarter-circle control-point offset with the smallest maximum radial error (about 1.96e-4 r);
# 4/3 tan(pi/8) = 0.5522847 overshoots by 2.7e-4 r
KAPPA = 0.5519150244935105

SHAPES = ('rect', 'circle', 'ellipse', 'line', 'polyline', 'polygon')

Attr = Union[str, float, int]


def _length(attrs: Mapping[str, Attr], key: str, default: float = 0.) -> float:
    v = attrs.get(key)
    if v is None:
        return default
    if isinstance(v, (int, float)):
        return float(v)

    m = NUMBER_RE.match(v.strip())
    if m is None:
        raise DegenerateShapeError(f'cannot read {key}={v!r}')
    return float(m.group())


def _points(attrs: Mapping[str, Attr]) -> List[float]:
    v = attrs.get('points', '')
    if isinstance(v, str):
        return [float(x) for x in NUMBER_RE.findall(v)]
    return [float(x) for x in v]


def ellipse_commands(cx: float, cy: float, rx: float, ry: float) -> List[Command]:
    kx = KAPPA * rx
    ky = KAPPA * ry
    return [
        M(cx + rx, cy),
        C(cx + rx, cy + ky, cx + kx, cy + ry, cx, cy + ry),
        C(cx - kx, cy + ry, cx - rx, cy + ky, cx - rx, cy),
        C(cx - rx, cy - ky, cx - kx, cy - ry, cx, cy - ry),
        C(cx + kx, cy - ry, cx + rx, cy - ky, cx + rx, cy),
    ]


def shape_to_commands(tag: str, attrs: Mapping[str, Attr]) -> List[Command]:
    """Lower one basic shape element (tag name plus geometry attributes) to M/L/C."""
    tag = re.sub(r'^\{.*\}', '', tag)

    if tag == 'rect':
        x, y = _length(attrs, 'x'), _length(attrs, 'y')
        w, h = _length(attrs, 'width'), _length(attrs, 'height')
        if w <= 0 or h <= 0:
            raise DegenerateShapeError(f'rect has zero area ({w}x{h})')

        return [M(x, y), L(x + w, y), L(x + w, y + h), L(x, y + h), L(x, y)]

    if tag == 'circle':
        r = _length(attrs, 'r')
        if r <= 0:
            raise DegenerateShapeError(f'circle radius must be positive, got {r}')

        return ellipse_commands(_length(attrs, 'cx'), _length(attrs, 'cy'), r, r)

    if tag == 'ellipse':
        rx, ry = _length(attrs, 'rx'), _length(attrs, 'ry')
        if rx <= 0 or ry <= 0:
            raise DegenerateShapeError(f'ellipse radii must be positive, got ({rx}, {ry})')

        return ellipse_commands(_length(attrs, 'cx'), _length(attrs, 'cy'), rx, ry)

    if tag == 'line':
        return [
            M(_length(attrs, 'x1'), _length(attrs, 'y1')),
            L(_length(attrs, 'x2'), _length(attrs, 'y2')),
        ]

    if tag in ('polyline', 'polygon'):
        pts = _points(attrs)
        if len(pts) < 4 or len(pts) % 2:
            raise DegenerateShapeError(f'{tag} needs at least two points, got {pts}')

        out = [M(pts[0], pts[1])]
        out += [L(pts[i], pts[i + 1]) for i in range(2, len(pts), 2)]
        if tag == 'polygon':
            out.append(L(pts[0], pts[1]))
        return out

    raise ValueError(f'not a basic shape: {tag}')
