import numpy as np
import pytest

import jax
import jax.numpy as jnp
from jax.experimental import enable_x64
from jax.flatten_util import ravel_pytree

from algorithms.losses import (
    LossWeights, PathPrediction, args_loss, parallel_total_loss, path_loss, quantize, total_loss, type_loss, vis_loss,
)
from algorithms.nn.SVGReconstruction import SVGReconstruction
from svg.types import ShapeError
from representations.tokenizer import PAD, TokenType, encode_script, tokens_to_parallel
from svg.types import C, L, M, Path, SvgScript

from conftest import desk_config, quiet_collector

N_COMMANDS = 4
ICON = SvgScript((
    Path((M(0.1, 0.1), L(0.9, 0.1), L(0.5, 0.9))),
    Path((M(0.2, 0.5), C(0.2, 0.2, 0.8, 0.2, 0.8, 0.5))),
))


def targets(n_paths: int = 3):
    icon = encode_script(ICON, n_paths, N_COMMANDS)
    return jnp.asarray(icon.T), jnp.asarray(icon.A), jnp.asarray(icon.v)


def random_prediction(T, discrete: bool = False, seed: int = 0):
    k1, k2, k3 = jax.random.split(jax.random.PRNGKey(seed), 3)
    shape = T.shape
    logits = jax.random.normal(k1, shape + (6, ))
    if discrete:
        args = jax.random.normal(k2, shape + (256, ))
    else:
        args = jax.random.uniform(k2, shape)
    v_logits = jax.random.normal(k3, shape[:-1] + (2, ))
    return PathPrediction(type_logits=logits, args=args), v_logits


# ------------------
# -- Loss pieces --
# ------------------
def test_type_loss_ignores_pad():
    T = jnp.array([TokenType.SOS, TokenType.EOS, PAD, PAD])
    logits = jnp.zeros((4, 6))
    # two positions of uniform cross-entropy over a padded length of 4
    assert type_loss(logits, T) == pytest.approx(2 * np.log(6) / 4, rel=1e-6)


def test_args_loss_masked_mean():
    pred = jnp.array([0.5, 0.2, 0.9, 0.0])
    target = jnp.array([0.5, 0.4, PAD, PAD])
    mask = jnp.array([True, True, False, False])
    assert args_loss(pred, target, mask) == pytest.approx(0.04 / 4, rel=1e-6)


def test_vis_loss_prefers_correct_bit():
    logits = jnp.array([[-3., 3.], [3., -3.]])
    good = vis_loss(logits, jnp.array([1, 0]))
    bad = vis_loss(logits, jnp.array([0, 1]))
    assert np.all(good < bad)


def test_quantize():
    np.testing.assert_array_equal(quantize(jnp.array([0., 0.5, 1., 1.3])), [0, 128, 255, 255])


def test_report_sums_paths():
    T, A, v = targets()
    pred, v_logits = random_prediction(T)
    w = LossWeights()
    report = total_loss(pred, T, A, v_logits, v, w)

    assert report.per_path.shape == (3, )
    assert report.total == pytest.approx(float(report.vis + report.type + report.args), rel=1e-5)
    assert report.total == pytest.approx(float(report.per_path.sum()), rel=1e-5)


def test_path_loss_matches_report_slots():
    T, A, v = targets()
    pred, v_logits = random_prediction(T)
    w = LossWeights()
    per_path = total_loss(pred, T, A, v_logits, v, w).per_path

    for i in range(3):
        slot = PathPrediction(type_logits=pred.type_logits[i], args=pred.args[i])
        got = path_loss(slot, T[i], A[i], v_logits[i], v[i], w)
        assert float(got) == pytest.approx(float(per_path[i]), rel=1e-5)


# ---------------------
# -- Loss semantics --
# ---------------------
@pytest.mark.parametrize('discrete', [False, True])
def test_invisible_slots_get_no_sequence_gradient(discrete):
    T, A, v = targets()
    pred, v_logits = random_prediction(T, discrete)
    w = LossWeights()

    def f(p):
        return total_loss(p, T, A, v_logits, v, w, discrete).total

    grads = jax.grad(f)(pred)
    assert not np.any(np.asarray(grads.type_logits[2]))
    assert not np.any(np.asarray(grads.args[2]))
    assert np.any(np.asarray(grads.type_logits[0]))


def test_pad_positions_do_not_change_loss():
    T, A, v = targets()
    pred, v_logits = random_prediction(T)
    w = LossWeights()
    base = total_loss(pred, T, A, v_logits, v, w)

    pad = (T == PAD)
    not_arg = (T != TokenType.ARG)
    noise = jax.random.normal(jax.random.PRNGKey(7), T.shape)

    moved = PathPrediction(
        type_logits=jnp.where(pad[..., None], pred.type_logits + 5., pred.type_logits),
        args=jnp.where(not_arg, pred.args + noise, pred.args),
    )
    A_moved = jnp.where(pad, A + noise, A)
    report = total_loss(moved, T, A_moved, v_logits, v, w)

    np.testing.assert_array_equal(np.asarray(report.total), np.asarray(base.total))
    np.testing.assert_array_equal(np.asarray(report.per_path), np.asarray(base.per_path))


def test_discrete_mode_uses_type_weight():
    T, A, v = targets()
    pred, v_logits = random_prediction(T, discrete=True)
    a = total_loss(pred, T, A, v_logits, v, LossWeights(w_args=1.), discrete=True)
    b = total_loss(pred, T, A, v_logits, v, LossWeights(w_args=1e4), discrete=True)
    assert a.args == b.args


def test_parallel_loss():
    T, A, v = targets()
    types, args = tokens_to_parallel(np.asarray(T), np.asarray(A), N_COMMANDS)
    k1, k2, k3 = jax.random.split(jax.random.PRNGKey(0), 3)
    pred = PathPrediction(
        type_logits=jax.random.normal(k1, types.shape + (6, )),
        args=jax.random.uniform(k2, args.shape),
    )
    v_logits = jax.random.normal(k3, (3, 2))
    report = parallel_total_loss(pred, jnp.asarray(types), jnp.asarray(args), v_logits, v, LossWeights())

    assert np.isfinite(float(report.total))
    assert float(report.per_path[2]) == pytest.approx(float(vis_loss(v_logits[2], v[2])), rel=1e-6)


def test_shape_errors():
    T, A, v = targets()
    pred, v_logits = random_prediction(T)

    with pytest.raises(ShapeError):
        total_loss(pred, T[:2], A[:2], v_logits[:2], v[:2], LossWeights())

    with pytest.raises(ShapeError):
        total_loss(pred, T, A, v_logits[:2], v[:2], LossWeights())


# --------------------
# -- Gradient check --
# --------------------
def test_model_gradients_match_finite_differences(reader):
    config = desk_config()
    learner = SVGReconstruction(config, quiet_collector(), seed=0)
    batch = reader.batch([0])

    rng = np.random.default_rng(0)
    eps = 1e-5

    with enable_x64():
        params = jax.tree_util.tree_map(lambda p: jnp.asarray(p, dtype=jnp.float64), learner.state.params)
        flat, unravel = ravel_pytree(params)
        data = {
            'T': jnp.asarray(batch['T']),
            'A': jnp.asarray(batch['A'], dtype=jnp.float64),
            'v': jnp.asarray(batch['v']),
        }

        @jax.jit
        def f(x):
            loss, _ = learner._loss(unravel(x), data, jax.random.PRNGKey(0), is_training=False)
            return loss

        analytic = np.asarray(jax.grad(f)(flat))
        coords = rng.choice(flat.shape[0], size=200, replace=False)

        errors = []
        for i in coords:
            step = jnp.zeros_like(flat).at[i].set(eps)
            numeric = (float(f(flat + step)) - float(f(flat - step))) / (2 * eps)
            scale = max(abs(analytic[i]), abs(numeric), 1e-2)
            errors.append(abs(analytic[i] - numeric) / scale)

    assert np.mean(np.asarray(errors) < 1e-3) >= 0.99
