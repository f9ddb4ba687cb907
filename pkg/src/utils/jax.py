from typing import Any, Tuple
import numpy as np

import jax
import jax.numpy as jnp

from representations.tokenizer import PAD, TokenType

tree_map = jax.tree_util.tree_map


def shift_right(T: jax.Array, A: jax.Array) -> Tuple[jax.Array, jax.Array]:
    """Teacher-forcing inputs: [SOS, T[:-1]] and [pad, A[:-1]] along the last axis."""
    sos = jnp.full(T.shape[:-1] + (1, ), TokenType.SOS, dtype=T.dtype)
    pad = jnp.full(A.shape[:-1] + (1, ), PAD, dtype=A.dtype)
    return (
        jnp.concatenate((sos, T[..., :-1]), axis=-1),
        jnp.concatenate((pad, A[..., :-1]), axis=-1),
    )


def tree_equal(a: Any, b: Any) -> bool:
    la, ta = jax.tree_util.tree_flatten(a)
    lb, tb = jax.tree_util.tree_flatten(b)
    if ta != tb:
        return False

    return all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(la, lb))


def grads_nonzero(grads: Any) -> Any:
    # per-leaf flag: at least one nonzero gradient entry
    return tree_map(lambda g: bool(np.any(np.asarray(g) != 0)), grads)
