import logging
import numpy as np

import jax
import optax
import jax.numpy as jnp
import utils.chex as cxu

from abc import abstractmethod
from functools import partial
from typing import Any, Dict, List, Set, Tuple
from PyExpUtils.collection.Collector import Collector

import representations.networks as nets
from algorithms.BaseVectorizer import Batch, BaseVectorizer, Prediction
from algorithms.decoding import greedy_decode, parallel_choice
from algorithms.losses import LossReport, PathPrediction, parallel_total_loss, total_loss
from experiment.ExperimentModel import TrainConfig
from representations.networks import ConfigError, EmptyIconError, NetworkBuilder, PositionOverflowError
from representations.tokenizer import DecodeError, TokenizedIcon, decode_icon, parallel_to_tokens, tokens_to_parallel
from svg.types import SvgScript
from utils.checkpoint import checkpointable
from utils.jax import shift_right, tree_map

logger = logging.getLogger(__name__)

ROUTES = ('svg', 'img')


@cxu.dataclass
class VectorizerState:
    params: Any
    optim: optax.OptState


def learning_rate_schedule(config: TrainConfig) -> optax.Schedule:
    """lr(step) = lr * min(1, step / warmup_steps)"""
    if config.warmup_steps <= 0:
        return optax.constant_schedule(config.lr)

    return optax.join_schedules(
        [optax.linear_schedule(0., config.lr, config.warmup_steps), optax.constant_schedule(config.lr)],
        [config.warmup_steps],
    )


def build_optimizer(config: TrainConfig, schedule: optax.Schedule, labels: Any) -> optax.GradientTransformation:
    step = optax.chain(
        optax.clip_by_global_norm(config.clip),
        optax.adamw(schedule, b1=config.beta1, b2=config.beta2, eps=config.eps, weight_decay=config.weight_decay),
    )
    return optax.multi_transform({'train': step, 'frozen': optax.set_to_zero()}, labels)


@checkpointable(('state', 'key', 'updates'))
class NNVectorizer(BaseVectorizer):
    # latent used by the training loss
    train_route = 'svg'

    def __init__(self, config: TrainConfig, collector: Collector, seed: int):
        super().__init__(config, collector, seed)
        self.weights = config.weights

        # ---------------------
        # -- NN Architecture --
        # ---------------------
        c = self.model
        builder = NetworkBuilder(c, seed)
        self._build_components(builder)

        z = nets.sample_latent(c)
        self.structure = builder.addComponent('structure', nets.structure, z)
        if c.autoregressive:
            T, A, _ = nets.sample_tokens(c)
            self.path = builder.addComponent('path', nets.pathDecoder, z, T[:, 0], A[:, 0])
            self._embed = builder.getFunction('path', nets.stepEmbedding)
        else:
            self.path = builder.addComponent('path', nets.pathDecoder, z)

        params = builder.getParams()

        # ---------------
        # -- Optimizer --
        # ---------------
        trainable = self._trainable()
        labels = {
            name: tree_map(lambda _, n=name: 'train' if n in trainable else 'frozen', p)
            for name, p in params.items()
        }
        self.schedule = learning_rate_schedule(config)
        self.optimizer = build_optimizer(config, self.schedule, labels)

        # --------------------------
        # -- Stateful information --
        # --------------------------
        self.state = VectorizerState(
            params=params,
            optim=self.optimizer.init(params),
        )

        self.key = jax.random.PRNGKey(seed)
        self.updates = 0

    # -----------------------------
    # -- NN vectorizer interface --
    # -----------------------------
    @abstractmethod
    def _build_components(self, builder: NetworkBuilder) -> None:
        ...

    @abstractmethod
    def _trainable(self) -> Set[str]:
        ...

    def _image_latent(self, params: Any, rng: Any, batch: Batch, is_training: bool) -> jax.Array:
        raise ConfigError(f'{type(self).__name__} has no image route')

    def _encode(self, params: Any, rng: Any, batch: Batch, route: str, is_training: bool) -> jax.Array:
        if route == 'svg':
            return self.svg_encoder(params, rng, batch['T'], batch['A'], batch['v'], is_training=is_training)
        if route == 'img':
            return self._image_latent(params, rng, batch, is_training)
        raise ConfigError(f'route must be one of {ROUTES}, got {route!r}')

    def learning_rate(self, step: int) -> float:
        return float(self.schedule(step))

    def prepare(self, batch: Batch) -> Batch:
        out = dict(batch)
        if not self.model.autoregressive:
            types, args = tokens_to_parallel(batch['T'], batch['A'], self.model.n_commands)
            out['types'] = types.astype(np.int32)
            out['args'] = args.astype(np.float32)
        return out

    # ----------
    # -- Loss --
    # ----------
    def _decode_loss(self, params: Any, rng: jax.Array, z: jax.Array, batch: Batch, is_training: bool) -> LossReport:
        c = self.model
        k1, k2 = jax.random.split(rng)
        z_p, v_logits = self.structure(params, k1, z, is_training=is_training)

        B, P, D = z_p.shape
        flat = z_p.reshape(B * P, D)

        if c.autoregressive:
            T_in, A_in = shift_right(batch['T'], batch['A'])
            L = T_in.shape[-1]
            logits, args = self.path(params, k2, flat, T_in.reshape(B * P, L), A_in.reshape(B * P, L), is_training=is_training)
            pred = PathPrediction(
                type_logits=logits.reshape((B, P) + logits.shape[1:]),
                args=args.reshape((B, P) + args.shape[1:]),
            )
            return total_loss(pred, batch['T'], batch['A'], v_logits, batch['v'], self.weights, c.discrete)

        logits, args = self.path(params, k2, flat, is_training=is_training)
        pred = PathPrediction(
            type_logits=logits.reshape((B, P) + logits.shape[1:]),
            args=args.reshape((B, P) + args.shape[1:]),
        )
        return parallel_total_loss(pred, batch['types'], batch['args'], v_logits, batch['v'], self.weights, c.discrete)

    def _loss(self, params: Any, batch: Batch, rng: jax.Array, is_training: bool = True):
        k1, k2 = jax.random.split(rng)
        z = self._encode(params, k1, batch, self.train_route, is_training)
        report = self._decode_loss(params, k2, z, batch, is_training)
        return jnp.mean(report.total), report

    @partial(jax.jit, static_argnums=0)
    def _computeUpdate(self, state: VectorizerState, batch: Batch, rng: jax.Array):
        grad, report = jax.grad(partial(self._loss, is_training=True), has_aux=True)(state.params, batch, rng)

        updates, optim = self.optimizer.update(grad, state.optim, state.params)
        params = optax.apply_updates(state.params, updates)

        return VectorizerState(params=params, optim=optim), report, optax.global_norm(grad)

    @partial(jax.jit, static_argnums=0)
    def _evalLoss(self, params: Any, batch: Batch):
        _, report = self._loss(params, batch, jax.random.PRNGKey(0), is_training=False)
        return report

    @partial(jax.jit, static_argnums=0)
    def _gradients(self, params: Any, batch: Batch):
        grad, _ = jax.grad(partial(self._loss, is_training=False), has_aux=True)(params, batch, jax.random.PRNGKey(0))
        return grad

    def update(self, batch: Batch) -> LossReport:
        batch = self.prepare(batch)
        lr = self.learning_rate(self.updates)

        self.key, key = jax.random.split(self.key)
        self.state, report, grad_norm = self._computeUpdate(self.state, batch, key)
        self.updates += 1

        report = jax.device_get(report.mean())
        self.collector.collect('loss', float(report.total))
        self.collector.collect('vis', float(report.vis))
        self.collector.collect('type', float(report.type))
        self.collector.collect('args', float(report.args))
        self.collector.collect('grad_norm', float(grad_norm))
        self.collector.collect('lr', lr)

        return report

    def loss(self, batch: Batch) -> LossReport:
        """Per-icon loss with dropout off."""
        return jax.device_get(self._evalLoss(self.state.params, self.prepare(batch)))

    def gradients(self, batch: Batch) -> Any:
        return jax.device_get(self._gradients(self.state.params, self.prepare(batch)))

    # ---------------
    # -- Inference --
    # ---------------
    def _decode(self, params: Any, z: jax.Array):
        c = self.model
        z_p, v_logits = self.structure(params, None, z)
        visible = jnp.argmax(v_logits, axis=-1) == 1

        B, P, D = z_p.shape
        flat = z_p.reshape(B * P, D)

        if c.autoregressive:
            T, A = greedy_decode(partial(self.path, params, None), flat, c.max_len, c.discrete)
            return T.reshape(B, P, -1), A.reshape(B, P, -1), visible

        logits, args = self.path(params, None, flat)
        types, values = parallel_choice(logits, args, c.discrete)
        return types.reshape((B, P) + types.shape[1:]), values.reshape((B, P) + values.shape[1:]), visible

    @partial(jax.jit, static_argnums=(0, 3))
    def _infer(self, params: Any, batch: Batch, route: str):
        z = self._encode(params, None, batch, route, False)
        return self._decode(params, z)

    def _tokens(self, T: np.ndarray, A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.model.autoregressive:
            return T, A

        # per-command rows back to token sequences
        paths = [parallel_to_tokens(t, a, self.model.n_commands) for t, a in zip(T, A)]
        return np.stack([p.T for p in paths]), np.stack([p.A for p in paths])

    def _prediction(self, T: np.ndarray, A: np.ndarray, visible: np.ndarray) -> Prediction:
        v = visible.astype(np.int64)
        n = int(v.sum())
        if n == 0:
            logger.warning('no visible path slots; emitting an empty icon')
            return Prediction(SvgScript(()), 0, 'empty')

        T, A = self._tokens(T, A)
        tokens = TokenizedIcon(T=T, A=A, v=v)
        try:
            return Prediction(decode_icon(tokens), n)
        except DecodeError as e:
            logger.info(f'strict decode failed ({e}); decoding leniently')
            return Prediction(decode_icon(tokens, lenient=True), n, 'lenient')

    def predict(self, batch: Batch, route: str = 'svg') -> List[Prediction]:
        T, A, visible = jax.device_get(self._infer(self.state.params, batch, route))
        return [self._prediction(T[b], A[b], visible[b]) for b in range(visible.shape[0])]

    # ----------------------------
    # -- Component entry points --
    # ----------------------------
    def embed_step(self, T: np.ndarray, A: np.ndarray, positions: np.ndarray) -> jax.Array:
        if not self.model.autoregressive:
            raise ConfigError('step embeddings belong to the autoregressive decoder')

        positions = np.asarray(positions)
        if np.any(positions >= self.model.max_len) or np.any(positions < 0):
            raise PositionOverflowError(f'positions must lie in [0, {self.model.max_len})')

        return self._embed(self.state.params, jnp.asarray(T), jnp.asarray(A, dtype=jnp.float32), jnp.asarray(positions))

    def svg_encode(self, tokens: TokenizedIcon) -> jax.Array:
        if not np.any(np.asarray(tokens.v) == 1):
            raise EmptyIconError('icon has no visible paths')

        T = jnp.asarray(tokens.T, dtype=jnp.int32)[None]
        A = jnp.asarray(tokens.A, dtype=jnp.float32)[None]
        v = jnp.asarray(tokens.v, dtype=jnp.int32)[None]
        return self.svg_encoder(self.state.params, None, T, A, v)[0]

    def structure_decode(self, z: jax.Array) -> Tuple[jax.Array, jax.Array]:
        return self.structure(self.state.params, None, z)

    def path_decode_teacher(self, z_p: jax.Array, T: np.ndarray, A: np.ndarray) -> PathPrediction:
        if not self.model.autoregressive:
            raise ConfigError('teacher forcing needs the autoregressive decoder')

        T_in, A_in = shift_right(jnp.asarray(T, dtype=jnp.int32), jnp.asarray(A, dtype=jnp.float32))
        logits, args = self.path(self.state.params, None, z_p, T_in, A_in)
        return PathPrediction(type_logits=logits, args=args)

    def path_decode_greedy(self, z_p: jax.Array) -> Tuple[np.ndarray, np.ndarray]:
        if not self.model.autoregressive:
            raise ConfigError('greedy decoding needs the autoregressive decoder')

        z_p = jnp.atleast_2d(z_p)
        T, A = self._greedy(self.state.params, z_p)
        return np.asarray(T), np.asarray(A)

    @partial(jax.jit, static_argnums=0)
    def _greedy(self, params: Any, z_p: jax.Array):
        c = self.model
        return greedy_decode(partial(self.path, params, None), z_p, c.max_len, c.discrete)

    def path_decode_parallel(self, z_p: jax.Array) -> PathPrediction:
        if self.model.autoregressive:
            raise ConfigError('one-pass decoding needs decoder_mode=parallel')

        logits, args = self.path(self.state.params, None, z_p)
        return PathPrediction(type_logits=logits, args=args)

    def params_of(self, name: str) -> Dict[str, Any]:
        return self.state.params[name]
