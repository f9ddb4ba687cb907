from dataclasses import dataclass
from svg.types import SvgScript

MAX_PATHS = 8
MAX_COMMANDS = 32


@dataclass(frozen=True)
class FilterResult:
    accepted: bool
    reason: str = ''

    def __bool__(self):
        return self.accepted


def filter_icon(s: SvgScript, max_paths: int = MAX_PATHS, max_commands: int = MAX_COMMANDS) -> FilterResult:
    # limits are inclusive: only icons with *more than* the limit are excluded
    if len(s) > max_paths:
        return FilterResult(False, f'paths={len(s)}>{max_paths}')

    longest = max((len(p) for p in s), default=0)
    if longest > max_commands:
        return FilterResult(False, f'commands={longest}>{max_commands}')

    return FilterResult(True)
