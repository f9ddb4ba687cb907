"""
Inference-time decoding of path sequences.

Greedy decoding runs the teacher-forced decoder once per position on its own outputs
and masks the type logits with the token grammar, so every produced sequence
strict-decodes: SOS, then blocks of one command followed by exactly its arity of
ARG tokens and pad up to the block width, then EOS and pad.
"""

from typing import Callable, Tuple

import jax
import jax.numpy as jnp

from representations.tokenizer import N_TYPES, PAD, WIDTH, TokenType
from utils.jax import shift_right

NEG_INF = -1e30

# [N_TYPES] lookups
_CODES = jnp.arange(N_TYPES)
_IS_COMMAND = (_CODES == TokenType.M) | (_CODES == TokenType.L) | (_CODES == TokenType.C)
_ROW_TYPES = _IS_COMMAND | (_CODES == TokenType.EOS)

# (z, T_in, A_in) -> (type_logits [B, L, 6], args [B, L] or [B, L, 256])
Forward = Callable[[jax.Array, jax.Array, jax.Array], Tuple[jax.Array, jax.Array]]


def grammar_mask(k: jax.Array, cmd: jax.Array, done: jax.Array, max_len: int) -> Tuple[jax.Array, jax.Array]:
    """
    Legal token types at position k.

    cmd is the command type of the current block (or pad), done marks sequences that
    already emitted EOS. Returns the [B, 6] allowed-type mask and a [B] flag for
    positions that must hold pad.
    """
    k = jnp.asarray(k)
    offset = (k - 1) % WIDTH
    at_boundary = offset == 0

    start = _CODES == TokenType.SOS
    boundary = _IS_COMMAND | ((_CODES == TokenType.EOS) & (k > 1))
    # no room left for a full block
    boundary = jnp.where(k + WIDTH - 1 >= max_len, _CODES == TokenType.EOS, boundary)
    arg = _CODES == TokenType.ARG

    allowed = jnp.where(k == 0, start, jnp.where(at_boundary, boundary, arg))
    allowed = jnp.broadcast_to(allowed, cmd.shape + (N_TYPES, ))

    needs_arg = (offset <= 2) | (cmd == TokenType.C)
    forced_pad = done | ((k > 0) & ~at_boundary & ~needs_arg)
    return allowed, forced_pad


def _read_args(args: jax.Array, discrete: bool) -> jax.Array:
    if discrete:
        return jnp.argmax(args, axis=-1).astype(jnp.float32) / 255.
    return jnp.clip(args, 0., 1.)


def greedy_decode(forward: Forward, z: jax.Array, max_len: int, discrete: bool) -> Tuple[jax.Array, jax.Array]:
    """Grammar-masked argmax decoding; z is [B, d_model], outputs are [B, max_len]."""
    B = z.shape[0]
    T = jnp.full((B, max_len), PAD, dtype=jnp.int32)
    A = jnp.full((B, max_len), PAD, dtype=jnp.float32)
    cmd = jnp.full((B, ), PAD, dtype=jnp.int32)
    done = jnp.zeros((B, ), dtype=bool)

    def cond(carry):
        k, _, _, _, done = carry
        return (k < max_len) & ~jnp.all(done)

    def body(carry):
        k, T, A, cmd, done = carry
        T_in, A_in = shift_right(T, A)
        logits, args = forward(z, T_in, A_in)

        logits_k = jax.lax.dynamic_index_in_dim(logits, k, axis=1, keepdims=False)
        args_k = jax.lax.dynamic_index_in_dim(args, k, axis=1, keepdims=False)

        allowed, forced_pad = grammar_mask(k, cmd, done, max_len)
        t = jnp.argmax(jnp.where(allowed, logits_k, NEG_INF), axis=-1).astype(jnp.int32)
        t = jnp.where(forced_pad, PAD, t)

        a = jnp.where(t == TokenType.ARG, _read_args(args_k, discrete), PAD)

        T = jax.lax.dynamic_update_index_in_dim(T, t, k, axis=1)
        A = jax.lax.dynamic_update_index_in_dim(A, a.astype(A.dtype), k, axis=1)

        is_cmd = (t == TokenType.M) | (t == TokenType.L) | (t == TokenType.C)
        cmd = jnp.where(is_cmd, t, cmd)
        done = done | (t == TokenType.EOS)
        return k + 1, T, A, cmd, done

    carry = (jnp.asarray(0, dtype=jnp.int32), T, A, cmd, done)
    _, T, A, _, _ = jax.lax.while_loop(cond, body, carry)
    return T, A


def parallel_choice(type_logits: jax.Array, args: jax.Array, discrete: bool) -> Tuple[jax.Array, jax.Array]:
    """Per-row argmax over {EOS, M, L, C} and argument read-out for the one-pass decoder."""
    types = jnp.argmax(jnp.where(_ROW_TYPES, type_logits, NEG_INF), axis=-1).astype(jnp.int32)
    return types, _read_args(args, discrete)
