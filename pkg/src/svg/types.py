from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Tuple

Point = Tuple[float, float]

# paths start at the origin unless their first command moves the cursor
ORIGIN: Point = (0.0, 0.0)


class CommandKind(Enum):
    MoveTo = 'M'
    LineTo = 'L'
    CubicBezier = 'C'

    @property
    def arity(self) -> int:
        return 6 if self is CommandKind.CubicBezier else 2


# ------------
# -- Errors --
# ------------
class SvgError(Exception):
    ...

class PathParseError(SvgError):
    def __init__(self, message: str, offset: int):
        super().__init__(f'{message} at offset {offset}')
        self.offset = offset

class UnsupportedCommandError(SvgError):
    def __init__(self, letter: str, offset: int):
        super().__init__(f'unsupported path command {letter!r} at offset {offset}')
        self.letter = letter
        self.offset = offset

class DegenerateShapeError(SvgError):
    ...

class CannotNormalizeError(SvgError):
    ...

class UnsupportedFeatureError(SvgError):
    ...

class EmptyGeometryError(SvgError):
    ...

# array or mask dimensions that do not fit together
class ShapeError(ValueError):
    ...


# ------------------
# -- Domain types --
# ------------------
@dataclass(frozen=True)
class Command:
    kind: CommandKind
    args: Tuple[float, ...]

    def __post_init__(self):
        if len(self.args) != self.kind.arity:
            raise ValueError(f'{self.kind.name} takes {self.kind.arity} args, got {len(self.args)}')

    @property
    def end(self) -> Point:
        return (self.args[-2], self.args[-1])

    def points(self) -> Iterator[Point]:
        for i in range(0, len(self.args), 2):
            yield (self.args[i], self.args[i + 1])

    def __repr__(self):
        args = ', '.join(f'{a:g}' for a in self.args)
        return f'{self.kind.value}({args})'


def M(x: float, y: float) -> Command:
    return Command(CommandKind.MoveTo, (float(x), float(y)))

def L(x: float, y: float) -> Command:
    return Command(CommandKind.LineTo, (float(x), float(y)))

def C(x1: float, y1: float, x2: float, y2: float, x: float, y: float) -> Command:
    return Command(CommandKind.CubicBezier, tuple(float(v) for v in (x1, y1, x2, y2, x, y)))


@dataclass(frozen=True)
class Path:
    commands: Tuple[Command, ...] = ()

    def __len__(self):
        return len(self.commands)

    def __iter__(self):
        return iter(self.commands)


@dataclass(frozen=True)
class SvgScript:
    paths: Tuple[Path, ...] = ()
    # source width/height; not part of the geometry so excluded from equality
    viewbox: Tuple[float, float] = field(default=(1.0, 1.0), compare=False)

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def coordinates(self) -> Iterator[float]:
        for path in self.paths:
            for cmd in path:
                yield from cmd.args
