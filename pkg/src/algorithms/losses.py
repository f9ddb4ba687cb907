import jax
import chex
import optax
import jax.numpy as jnp
import utils.chex as cxu

from dataclasses import dataclass
from typing import Optional

from svg.types import ShapeError
from representations.tokenizer import PAD, TokenType


@dataclass(frozen=True)
class LossWeights:
    w_vis: float = 1.
    w_type: float = 1.
    w_args: float = 6e3


@cxu.dataclass(frozen=True)
class PathPrediction:
    type_logits: jax.Array      # [..., L, 6]
    args: jax.Array             # [..., L] continuous or [..., L, 256] discrete


@cxu.dataclass(frozen=True)
class LossReport:
    total: jax.Array
    vis: jax.Array
    type: jax.Array
    args: jax.Array
    per_path: jax.Array         # [..., N_P]

    def mean(self) -> 'LossReport':
        return cxu.tree_mean(self)


def quantize(x: jax.Array) -> jax.Array:
    return jnp.floor(255 * jnp.clip(x, 0., 1.) + 0.5).astype(jnp.int32)


def _masked_ce(logits: jax.Array, labels: jax.Array, mask: jax.Array) -> jax.Array:
    labels = jnp.where(mask, labels, 0)
    ce = optax.softmax_cross_entropy_with_integer_labels(logits, labels)
    return jnp.sum(jnp.where(mask, ce, 0.), axis=-1)


def type_loss(logits: jax.Array, target_T: jax.Array, valid: Optional[jax.Array] = None) -> jax.Array:
    """Cross-entropy summed over non-pad positions, divided by the padded length."""
    if valid is None:
        valid = target_T != PAD
    return _masked_ce(logits, target_T, valid) / target_T.shape[-1]


def vis_loss(v_logits: jax.Array, v_target: jax.Array) -> jax.Array:
    return optax.softmax_cross_entropy_with_integer_labels(v_logits, v_target.astype(jnp.int32))


def args_loss(pred_A: jax.Array, target_A: jax.Array, arg_mask: jax.Array) -> jax.Array:
    se = jnp.where(arg_mask, jnp.square(pred_A - target_A), 0.)
    return jnp.sum(se, axis=-1) / target_A.shape[-1]


def discrete_args_loss(arg_logits: jax.Array, target_A: jax.Array, arg_mask: jax.Array) -> jax.Array:
    return _masked_ce(arg_logits, quantize(target_A), arg_mask) / target_A.shape[-1]


def _sequence_terms(pred: PathPrediction, target_T, target_A, discrete: bool):
    typ = type_loss(pred.type_logits, target_T)

    arg_mask = target_T == TokenType.ARG
    if discrete:
        arg = discrete_args_loss(pred.args, target_A, arg_mask)
    else:
        arg = args_loss(pred.args, target_A, arg_mask)
    return typ, arg


def _weighted(vis, typ, arg, v_target, w: LossWeights, discrete: bool):
    # ground-truth visibility gates the sequence terms
    gate = v_target.astype(vis.dtype)
    w_args = w.w_type if discrete else w.w_args
    return w.w_vis * vis, gate * (w.w_type * typ), gate * (w_args * arg)


def _report(vis, typ, arg, v_target, w: LossWeights, discrete: bool) -> LossReport:
    vis, typ, arg = _weighted(vis, typ, arg, v_target, w, discrete)
    per_path = vis + typ + arg

    return LossReport(
        total=jnp.sum(per_path, axis=-1),
        vis=jnp.sum(vis, axis=-1),
        type=jnp.sum(typ, axis=-1),
        args=jnp.sum(arg, axis=-1),
        per_path=per_path,
    )


def path_loss(pred: PathPrediction, target_T, target_A, v_logits, v_target, w: LossWeights, discrete: bool = False) -> jax.Array:
    vis = vis_loss(v_logits, v_target)
    typ, arg = _sequence_terms(pred, target_T, target_A, discrete)
    return sum(_weighted(vis, typ, arg, v_target, w, discrete))


def total_loss(pred: PathPrediction, target_T, target_A, v_logits, v_target, w: LossWeights, discrete: bool = False) -> LossReport:
    """Sum of per-slot path losses; leading axes are [..., N_P]."""
    if pred.type_logits.shape[:-1] != target_T.shape or v_logits.shape[:-1] != v_target.shape:
        raise ShapeError(f'prediction {pred.type_logits.shape[:-1]} does not match targets {target_T.shape}')
    if target_T.shape[:-1] != v_target.shape:
        raise ShapeError(f'{target_T.shape[:-1]} token slots but {v_target.shape} visibility bits')

    chex.assert_equal_shape((target_T, target_A))

    vis = vis_loss(v_logits, v_target)
    typ, arg = _sequence_terms(pred, target_T, target_A, discrete)
    return _report(vis, typ, arg, v_target, w, discrete)


def parallel_total_loss(pred: PathPrediction, target_types, target_args, v_logits, v_target, w: LossWeights, discrete: bool = False) -> LossReport:
    """
    Command-unit variant: every command row carries a type target (EOS for unused rows)
    and the used argument slots carry values; both sums are divided by the row count.
    """
    if pred.type_logits.shape[:-1] != target_types.shape or v_logits.shape[:-1] != v_target.shape:
        raise ShapeError(f'prediction {pred.type_logits.shape[:-1]} does not match targets {target_types.shape}')

    n_rows = target_types.shape[-1]
    vis = vis_loss(v_logits, v_target)
    typ = _masked_ce(pred.type_logits, target_types, jnp.ones(target_types.shape, dtype=bool)) / n_rows

    used = target_args != PAD
    if discrete:
        ce = _masked_ce(pred.args, quantize(target_args), used)
        arg = jnp.sum(ce, axis=-1) / n_rows
    else:
        se = jnp.where(used, jnp.square(pred.args - target_args), 0.)
        arg = jnp.sum(se, axis=(-2, -1)) / n_rows

    return _report(vis, typ, arg, v_target, w, discrete)
