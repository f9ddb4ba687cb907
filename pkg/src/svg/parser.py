"""
SVG 1.1 path-data and transform-list parsing.

Every path command is lowered while parsing to absolute MoveTo / LineTo / CubicBezier:
H and V become lines, quadratics are degree-elevated, S and T reflect the previous
control point, elliptical arcs are cut at quadrant boundaries into one cubic per
piece and Z becomes an explicit line back to the subpath start.
"""

import re
import math
import numpy as np

from typing import List, Optional
from svg.types import (
    ORIGIN, C, Command, L, M, PathParseError, Point, UnsupportedCommandError, UnsupportedFeatureError,
)

COMMANDS = set('MmZzLlHhVvCcSsQqTtAa')

NUMBER_RE = re.compile(r'[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?')
SEPARATOR_RE = re.compile(r'[\s,]*')

HALF_PI = math.pi / 2


class _PathLexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self):
        self.pos = SEPARATOR_RE.match(self.text, self.pos).end()

    def done(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos]

    def number(self) -> float:
        self.skip()
        if self.pos >= len(self.text):
            raise PathParseError('expected a number but the path ended', self.pos)

        m = NUMBER_RE.match(self.text, self.pos)
        if m is None:
            raise PathParseError(f'malformed number {self.text[self.pos:self.pos + 8]!r}', self.pos)

        self.pos = m.end()
        return float(m.group())

    def flag(self) -> bool:
        # flags may be packed without separators, e.g. "a1 1 0 01 5 5"
        self.skip()
        if self.pos >= len(self.text) or self.text[self.pos] not in '01':
            raise PathParseError('expected an arc flag (0 or 1)', self.pos)

        self.pos += 1
        return self.text[self.pos - 1] == '1'

    def point(self, origin: Point) -> Point:
        x = self.number()
        y = self.number()
        return (origin[0] + x, origin[1] + y)


def parse_path_data(d: str) -> List[Command]:
    lex = _PathLexer(d)
    out: List[Command] = []

    cur = ORIGIN
    start = ORIGIN
    cmd: Optional[str] = None
    prev: Optional[str] = None

    # reflected control points for S and T
    last_cubic: Optional[Point] = None
    last_quad: Optional[Point] = None

    while not lex.done():
        ch = lex.peek()
        if ch.isalpha():
            if ch not in COMMANDS:
                raise UnsupportedCommandError(ch, lex.pos)
            cmd = ch
            lex.pos += 1

        elif cmd is None or cmd in 'Zz':
            raise PathParseError('expected a path command', lex.pos)

        assert cmd is not None
        upper = cmd.upper()
        origin = ORIGIN if cmd.isupper() else cur

        if upper == 'Z':
            out.append(L(*start))
            cur = start

        elif upper == 'M':
            cur = lex.point(origin)
            start = cur
            out.append(M(*cur))
            # further coordinate pairs are implicit linetos
            cmd = 'L' if cmd.isupper() else 'l'

        elif upper == 'L':
            cur = lex.point(origin)
            out.append(L(*cur))

        elif upper == 'H':
            x = lex.number() + origin[0]
            cur = (x, cur[1])
            out.append(L(*cur))

        elif upper == 'V':
            y = lex.number() + origin[1]
            cur = (cur[0], y)
            out.append(L(*cur))

        elif upper == 'C':
            c1 = lex.point(origin)
            c2 = lex.point(origin)
            end = lex.point(origin)
            out.append(C(*c1, *c2, *end))
            cur = end
            last_cubic = c2

        elif upper == 'S':
            c1 = _reflect(last_cubic, cur) if prev in ('C', 'S') else cur
            c2 = lex.point(origin)
            end = lex.point(origin)
            out.append(C(*c1, *c2, *end))
            cur = end
            last_cubic = c2

        elif upper == 'Q':
            q = lex.point(origin)
            end = lex.point(origin)
            out.append(elevate_quadratic(cur, q, end))
            cur = end
            last_quad = q

        elif upper == 'T':
            q = _reflect(last_quad, cur) if prev in ('Q', 'T') else cur
            end = lex.point(origin)
            out.append(elevate_quadratic(cur, q, end))
            cur = end
            last_quad = q

        elif upper == 'A':
            rx = lex.number()
            ry = lex.number()
            phi = lex.number()
            large = lex.flag()
            sweep = lex.flag()
            end = lex.point(origin)
            out.extend(arc_to_commands(cur, rx, ry, phi, large, sweep, end))
            cur = end

        prev = upper

    return out


def _reflect(p: Optional[Point], about: Point) -> Point:
    assert p is not None
    return (2 * about[0] - p[0], 2 * about[1] - p[1])


def elevate_quadratic(p0: Point, q: Point, p2: Point) -> Command:
    c1 = (p0[0] + 2 * (q[0] - p0[0]) / 3, p0[1] + 2 * (q[1] - p0[1]) / 3)
    c2 = (p2[0] + 2 * (q[0] - p2[0]) / 3, p2[1] + 2 * (q[1] - p2[1]) / 3)
    return C(*c1, *c2, *p2)


def _angle(ux: float, uy: float, vx: float, vy: float) -> float:
    return math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)


def _quadrant_cuts(a: float, b: float) -> List[float]:
    # parametric angles of every quadrant boundary strictly between a and b, in travel order
    lo, hi = min(a, b), max(a, b)
    k = math.floor(lo / HALF_PI) + 1
    cuts = []
    while k * HALF_PI < hi - 1e-9:
        if k * HALF_PI > lo + 1e-9:
            cuts.append(k * HALF_PI)
        k += 1

    return cuts if b >= a else cuts[::-1]


def arc_to_commands(p0: Point, rx: float, ry: float, phi_deg: float, large: bool, sweep: bool, p1: Point) -> List[Command]:
    if p0 == p1:
        return []

    rx, ry = abs(rx), abs(ry)
    if rx == 0 or ry == 0:
        return [L(*p1)]

    # endpoint to center parameterization, SVG 1.1 implementation notes
    phi = math.radians(phi_deg)
    cosr, sinr = math.cos(phi), math.sin(phi)
    dx2 = (p0[0] - p1[0]) / 2
    dy2 = (p0[1] - p1[1]) / 2
    x1p = cosr * dx2 + sinr * dy2
    y1p = -sinr * dx2 + cosr * dy2

    lam = (x1p * x1p) / (rx * rx) + (y1p * y1p) / (ry * ry)
    if lam > 1:
        rx *= math.sqrt(lam)
        ry *= math.sqrt(lam)

    num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p
    den = rx * rx * y1p * y1p + ry * ry * x1p * x1p
    coef = math.sqrt(max(0., num / den))
    if large == sweep:
        coef = -coef

    cxp = coef * rx * y1p / ry
    cyp = -coef * ry * x1p / rx
    cx = cosr * cxp - sinr * cyp + (p0[0] + p1[0]) / 2
    cy = sinr * cxp + cosr * cyp + (p0[1] + p1[1]) / 2

    ux, uy = (x1p - cxp) / rx, (y1p - cyp) / ry
    vx, vy = (-x1p - cxp) / rx, (-y1p - cyp) / ry
    theta = _angle(1., 0., ux, uy)
    delta = _angle(ux, uy, vx, vy)
    if not sweep and delta > 0:
        delta -= 2 * math.pi
    elif sweep and delta < 0:
        delta += 2 * math.pi

    def at(t: float) -> Point:
        x, y = rx * math.cos(t), ry * math.sin(t)
        return (cosr * x - sinr * y + cx, sinr * x + cosr * y + cy)

    def tangent(t: float) -> Point:
        x, y = -rx * math.sin(t), ry * math.cos(t)
        return (cosr * x - sinr * y, sinr * x + cosr * y)

    angles = [theta] + _quadrant_cuts(theta, theta + delta) + [theta + delta]
    out: List[Command] = []
    for i, (a, b) in enumerate(zip(angles[:-1], angles[1:])):
        alpha = 4 / 3 * math.tan((b - a) / 4)
        start = p0 if i == 0 else at(a)
        end = p1 if i == len(angles) - 2 else at(b)
        ta, tb = tangent(a), tangent(b)
        c1 = (start[0] + alpha * ta[0], start[1] + alpha * ta[1])
        c2 = (end[0] - alpha * tb[0], end[1] - alpha * tb[1])
        out.append(C(*c1, *c2, *end))

    return out


# ----------------
# -- Transforms --
# ----------------
TRANSFORM_RE = re.compile(r'([A-Za-z]+)\s*\(([^)]*)\)')

def parse_transform(text: Optional[str]) -> np.ndarray:
    """Compose an SVG transform list into a 3x3 affine matrix."""
    out = np.eye(3)
    if not text:
        return out

    for name, body in TRANSFORM_RE.findall(text):
        args = [float(v) for v in NUMBER_RE.findall(body)]
        out = out @ _transform_matrix(name, args)

    return out


def _transform_matrix(name: str, args: List[float]) -> np.ndarray:
    if name == 'matrix' and len(args) == 6:
        a, b, c, d, e, f = args
        return np.array([[a, c, e], [b, d, f], [0., 0., 1.]])

    if name == 'translate' and len(args) in (1, 2):
        tx, ty = args[0], args[1] if len(args) == 2 else 0.
        return np.array([[1., 0., tx], [0., 1., ty], [0., 0., 1.]])

    if name == 'scale' and len(args) in (1, 2):
        sx = args[0]
        sy = args[1] if len(args) == 2 else sx
        return np.array([[sx, 0., 0.], [0., sy, 0.], [0., 0., 1.]])

    if name == 'rotate' and len(args) in (1, 3):
        r = math.radians(args[0])
        rot = np.array([[math.cos(r), -math.sin(r), 0.], [math.sin(r), math.cos(r), 0.], [0., 0., 1.]])
        if len(args) == 1:
            return rot

        cx, cy = args[1], args[2]
        to = np.array([[1., 0., cx], [0., 1., cy], [0., 0., 1.]])
        back = np.array([[1., 0., -cx], [0., 1., -cy], [0., 0., 1.]])
        return to @ rot @ back

    raise UnsupportedFeatureError(f'unsupported transform {name}({", ".join(map(str, args))})')


def apply_transform(mat: np.ndarray, commands: List[Command]) -> List[Command]:
    # affine maps commute with Bezier evaluation so transforming control points is exact
    out = []
    for cmd in commands:
        pts = np.asarray(list(cmd.points()))
        moved = pts @ mat[:2, :2].T + mat[:2, 2]
        out.append(Command(cmd.kind, tuple(float(v) for v in moved.reshape(-1))))

    return out


def transformed(mat: np.ndarray, commands: List[Command]) -> List[Command]:
    if np.array_equal(mat, np.eye(3)):
        return commands
    return apply_transform(mat, commands)
