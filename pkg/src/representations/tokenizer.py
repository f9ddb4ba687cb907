"""
Paired (type, argument) sequence representation of an SvgScript.

Each path becomes a type sequence T and an aligned argument sequence A of fixed
length 2 + 7 * n_commands: SOS, one 7-wide block per command, EOS, then padding.
Blocks are [M|L, ARG, ARG, pad x4] or [C, ARG x6]. Padding is -1 in both sequences
and A holds a coordinate only where T holds ARG.
"""

import numpy as np

from enum import IntEnum
from typing import List, NamedTuple, Tuple
from svg.types import Command, CommandKind, Path, SvgScript

PAD = -1
WIDTH = 7
N_TYPES = 6

# argument slots per command in the non-autoregressive layout
N_ARGS = 11


class TokenType(IntEnum):
    SOS = 0
    EOS = 1
    M = 2
    L = 3
    C = 4
    ARG = 5


KIND_TO_TOKEN = {
    CommandKind.MoveTo: TokenType.M,
    CommandKind.LineTo: TokenType.L,
    CommandKind.CubicBezier: TokenType.C,
}
TOKEN_TO_KIND = {v: k for k, v in KIND_TO_TOKEN.items()}
COMMAND_TOKENS = tuple(int(t) for t in TOKEN_TO_KIND)


def max_length(n_commands: int) -> int:
    return 2 + WIDTH * n_commands


# ------------
# -- Errors --
# ------------
class TokenizerError(Exception):
    ...

class CapacityError(TokenizerError):
    def __init__(self, message: str, index: int, count: int):
        super().__init__(message)
        self.index = index
        self.count = count

class DecodeError(TokenizerError):
    def __init__(self, position: int, expected: str):
        super().__init__(f'expected {expected} at position {position}')
        self.position = position
        self.expected = expected

class QuantizationRangeError(TokenizerError):
    ...


# -----------
# -- Types --
# -----------
class TokenizedPath(NamedTuple):
    T: np.ndarray
    A: np.ndarray

class TokenizedIcon(NamedTuple):
    T: np.ndarray   # (n_paths, max_len) int
    A: np.ndarray   # (n_paths, max_len) float
    v: np.ndarray   # (n_paths,) visibility bits

    @property
    def n_paths(self) -> int:
        return self.T.shape[0]


# ------------------
# -- Quantization --
# ------------------
def quantize8(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~((x >= 0) & (x <= 1))):
        raise QuantizationRangeError(f'coordinates must lie in [0, 1], got {x}')

    # round half up
    q = np.floor(255 * x + 0.5).astype(np.int64)
    return int(q) if q.ndim == 0 else q

def dequantize8(q):
    q = np.asarray(q)
    out = q / 255.
    return float(out) if out.ndim == 0 else out


# --------------
# -- Encoding --
# --------------
def encode_command(c: Command) -> Tuple[np.ndarray, np.ndarray]:
    T = np.full(WIDTH, PAD, dtype=np.int64)
    A = np.full(WIDTH, PAD, dtype=np.float64)

    T[0] = KIND_TO_TOKEN[c.kind]
    n = len(c.args)
    T[1:1 + n] = TokenType.ARG
    A[1:1 + n] = c.args
    return T, A


def encode_path(path: Path, n_commands: int) -> TokenizedPath:
    size = max_length(n_commands)
    T = np.full(size, PAD, dtype=np.int64)
    A = np.full(size, PAD, dtype=np.float64)

    T[0] = TokenType.SOS
    for j, cmd in enumerate(path):
        s = 1 + j * WIDTH
        T[s:s + WIDTH], A[s:s + WIDTH] = encode_command(cmd)

    T[1 + len(path) * WIDTH] = TokenType.EOS
    return TokenizedPath(T, A)


def empty_icon(n_paths: int, n_commands: int) -> TokenizedIcon:
    size = max_length(n_commands)
    return TokenizedIcon(
        T=np.full((n_paths, size), PAD, dtype=np.int64),
        A=np.full((n_paths, size), PAD, dtype=np.float64),
        v=np.zeros(n_paths, dtype=np.int64),
    )


def encode_script(s: SvgScript, n_paths: int = 8, n_commands: int = 32) -> TokenizedIcon:
    if len(s) > n_paths:
        raise CapacityError(f'script has {len(s)} paths, capacity is {n_paths}', index=n_paths, count=len(s))

    icon = empty_icon(n_paths, n_commands)
    for i, path in enumerate(s):
        if len(path) > n_commands:
            raise CapacityError(f'path {i} has {len(path)} commands, capacity is {n_commands}', index=i, count=len(path))

        icon.T[i], icon.A[i] = encode_path(path, n_commands)
        icon.v[i] = 1

    return icon


# --------------
# -- Decoding --
# --------------
def _decode_strict(T: np.ndarray, A: np.ndarray) -> Path:
    size = len(T)
    if size == 0 or T[0] != TokenType.SOS:
        raise DecodeError(0, 'SOS')

    cmds: List[Command] = []
    k = 1
    while k < size:
        t = T[k]
        if t == TokenType.EOS:
            rest = np.nonzero(T[k + 1:] != PAD)[0]
            if len(rest):
                raise DecodeError(k + 1 + int(rest[0]), 'PAD')
            break

        if t not in COMMAND_TOKENS:
            raise DecodeError(k, 'command or EOS')

        kind = TOKEN_TO_KIND[TokenType(t)]
        for j in range(1, WIDTH):
            pos = k + j
            if j <= kind.arity:
                if pos >= size or T[pos] != TokenType.ARG:
                    raise DecodeError(pos, 'ARG')
                if not 0 <= A[pos] <= 1:
                    raise DecodeError(pos, 'ARG value in [0, 1]')

            elif pos < size and T[pos] != PAD:
                raise DecodeError(pos, 'PAD')

        cmds.append(Command(kind, tuple(float(a) for a in A[k + 1:k + 1 + kind.arity])))
        k += WIDTH

    return Path(tuple(cmds))


def _decode_lenient(T: np.ndarray, A: np.ndarray) -> Path:
    cmds: List[Command] = []
    kind = None
    args: List[float] = []

    start = 1 if len(T) and T[0] == TokenType.SOS else 0
    for k in range(start, len(T)):
        t = T[k]
        if kind is not None:
            if t == TokenType.ARG:
                args.append(float(np.clip(np.nan_to_num(A[k]), 0., 1.)))
                if len(args) == kind.arity:
                    cmds.append(Command(kind, tuple(args)))
                    kind = None
                continue

            # an interrupted command is dropped
            kind = None

        if t == TokenType.EOS:
            break

        if t in COMMAND_TOKENS:
            kind = TOKEN_TO_KIND[TokenType(t)]
            args = []

    return Path(tuple(cmds))


def decode_path(T: np.ndarray, A: np.ndarray, lenient: bool = False) -> Path:
    T = np.asarray(T)
    A = np.asarray(A)
    return _decode_lenient(T, A) if lenient else _decode_strict(T, A)


def decode_icon(t: TokenizedIcon, lenient: bool = False) -> SvgScript:
    paths = []
    for i in range(t.n_paths):
        if t.v[i] != 1:
            continue

        try:
            paths.append(decode_path(t.T[i], t.A[i], lenient=lenient))
        except DecodeError as e:
            e.args = (f'path {i}: {e}', )
            raise

    return SvgScript(tuple(paths))


# ------------------------------------
# -- Command-unit (parallel) layout --
# ------------------------------------
def tokens_to_parallel(T: np.ndarray, A: np.ndarray, n_commands: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Re-block (..., max_len) sequences into per-command rows: a type per command
    (EOS for unused rows) and 11 argument slots where M/L fill the last two and
    C the last six, the rest -1.
    """
    T = np.asarray(T)
    A = np.asarray(A)
    lead = T.shape[:-1]

    blocks_T = T[..., 1:1 + WIDTH * n_commands].reshape(lead + (n_commands, WIDTH))
    blocks_A = A[..., 1:1 + WIDTH * n_commands].reshape(lead + (n_commands, WIDTH))

    cmd = blocks_T[..., 0]
    is_cmd = np.isin(cmd, COMMAND_TOKENS)
    types = np.where(is_cmd, cmd, int(TokenType.EOS))

    a6 = blocks_A[..., 1:]
    args = np.full(lead + (n_commands, N_ARGS), PAD, dtype=np.float64)
    is_c = (cmd == TokenType.C)[..., None]
    is_ml = ((cmd == TokenType.M) | (cmd == TokenType.L))[..., None]

    args[..., 5:] = np.where(is_c, a6, PAD)
    args[..., 9:] = np.where(is_ml, a6[..., :2], args[..., 9:])
    return types, args


def parallel_to_tokens(types: np.ndarray, args: np.ndarray, n_commands: int) -> TokenizedPath:
    """Inverse of tokens_to_parallel for a single path; stops at the first non-command row."""
    size = max_length(n_commands)
    T = np.full(size, PAD, dtype=np.int64)
    A = np.full(size, PAD, dtype=np.float64)
    T[0] = TokenType.SOS

    j = 0
    for j in range(n_commands):
        t = int(types[j])
        if t not in COMMAND_TOKENS:
            break

        kind = TOKEN_TO_KIND[TokenType(t)]
        values = args[j, N_ARGS - kind.arity:]
        s = 1 + j * WIDTH
        T[s] = t
        T[s + 1:s + 1 + kind.arity] = TokenType.ARG
        A[s + 1:s + 1 + kind.arity] = np.clip(values, 0., 1.)
    else:
        j = n_commands

    T[1 + j * WIDTH] = TokenType.EOS
    return TokenizedPath(T, A)


def commands_to_parallel(path: Path, n_commands: int) -> Tuple[np.ndarray, np.ndarray]:
    T, A = encode_path(path, n_commands)
    return tokens_to_parallel(T, A, n_commands)


def parallel_to_path(types: np.ndarray, args: np.ndarray, lenient: bool = True) -> Path:
    n_commands = len(types)
    T, A = parallel_to_tokens(np.asarray(types), np.asarray(args), n_commands)
    return decode_path(T, A, lenient=lenient)
