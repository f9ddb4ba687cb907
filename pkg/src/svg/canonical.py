import logging
import numpy as np
import xml.etree.ElementTree as ET

from typing import List, Tuple
from svg.types import CannotNormalizeError, Command, DegenerateShapeError, Path, SvgError, SvgScript
from svg.parser import NUMBER_RE, parse_path_data, parse_transform, transformed
from svg.shapes import SHAPES, shape_to_commands

logger = logging.getLogger(__name__)

SVG_NS = 'http://www.w3.org/2000/svg'

# subtrees that never contribute filled geometry
SKIPPED = {
    'defs', 'clipPath', 'mask', 'symbol', 'style', 'title', 'desc', 'metadata',
    'text', 'pattern', 'linearGradient', 'radialGradient', 'filter', 'marker',
}

DECIMALS = 6


def _local(tag: str) -> str:
    return tag.rsplit('}', 1)[-1]


def _viewbox(root: ET.Element) -> Tuple[float, float, float, float]:
    vb = root.get('viewBox')
    if vb:
        nums = [float(v) for v in NUMBER_RE.findall(vb)]
        if len(nums) == 4 and nums[2] > 0 and nums[3] > 0:
            return nums[0], nums[1], nums[2], nums[3]

    w, h = root.get('width'), root.get('height')
    if w is not None and h is not None:
        mw, mh = NUMBER_RE.match(w.strip()), NUMBER_RE.match(h.strip())
        if mw and mh and float(mw.group()) > 0 and float(mh.group()) > 0:
            return 0., 0., float(mw.group()), float(mh.group())

    raise CannotNormalizeError('document has neither a usable viewBox nor width/height')


def _collect(elem: ET.Element, mat: np.ndarray, out: List[List[Command]]):
    tag = _local(elem.tag)
    if tag in SKIPPED:
        return

    mat = mat @ parse_transform(elem.get('transform'))

    cmds: List[Command] = []
    if tag == 'path':
        cmds = parse_path_data(elem.get('d', ''))

    elif tag in SHAPES:
        try:
            cmds = shape_to_commands(tag, elem.attrib)
        except DegenerateShapeError as e:
            # degenerate shapes do not render
            logger.debug(f'dropping {tag}: {e}')

    if cmds:
        out.append(transformed(mat, cmds))

    for child in elem:
        _collect(child, mat, out)


def _normalizer(minx: float, miny: float, w: float, h: float):
    # uniform scale by the longer side, shorter axis centered
    side = max(w, h)
    ox = minx - (side - w) / 2
    oy = miny - (side - h) / 2

    def _inner(cmd: Command) -> Command:
        out = []
        for i, v in enumerate(cmd.args):
            u = (v - (ox if i % 2 == 0 else oy)) / side
            out.append(min(1., max(0., round(u, DECIMALS))))
        return Command(cmd.kind, tuple(out))

    return _inner


def canonical_order(paths: List[Path]) -> List[Path]:
    def key(item):
        i, p = item
        x, y = p.commands[0].end
        return (y, x, -len(p), i)

    return [p for _, p in sorted(enumerate(paths), key=key)]


def canonicalize(document: str) -> SvgScript:
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        raise SvgError(f'malformed XML: {e}') from e

    minx, miny, w, h = _viewbox(root)
    raw: List[List[Command]] = []
    _collect(root, np.eye(3), raw)

    norm = _normalizer(minx, miny, w, h)
    paths = [Path(tuple(norm(c) for c in cmds)) for cmds in raw]
    return SvgScript(tuple(canonical_order(paths)), viewbox=(w, h))


def path_data(path: Path) -> str:
    return ' '.join(
        cmd.kind.value + ' ' + ' '.join(f'{a:.{DECIMALS}f}' for a in cmd.args)
        for cmd in path
    )


def serialize(script: SvgScript) -> str:
    lines = [f'<svg xmlns="{SVG_NS}" viewBox="0 0 1 1">']
    lines += [f'<path d="{path_data(p)}" fill="black"/>' for p in script if len(p)]
    lines.append('</svg>')
    return '\n'.join(lines) + '\n'
