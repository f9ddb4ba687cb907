import dataclasses
import numpy as np
from typing import Any, Callable, Dict, Optional, Tuple

import jax
import jax.numpy as jnp
import haiku as hk

from representations.tokenizer import N_ARGS, N_TYPES, PAD, TokenType, max_length

# embedding row used for padding positions
PAD_INDEX = N_TYPES
QUANT_LEVELS = 256

ARG_MODES = ('continuous', 'discrete')
DECODER_MODES = ('autoregressive', 'parallel')
BACKBONES = ('patch', 'precomputed')


# ------------
# -- Errors --
# ------------
class ConfigError(Exception):
    ...

class PositionOverflowError(IndexError):
    ...

class EmptyIconError(ValueError):
    ...


# -------------------
# -- Configuration --
# -------------------
@dataclasses.dataclass(frozen=True)
class ModelConfig:
    d_model: int = 256
    d_ff: int = 512
    n_heads: int = 8
    structure_layers: int = 4
    path_layers: int = 12
    encoder_layers: int = 4
    n_paths: int = 8
    n_commands: int = 32
    arg_mode: str = 'continuous'
    decoder_mode: str = 'autoregressive'
    dropout: float = 0.1

    # image route
    backbone: str = 'patch'
    backbone_layers: int = 4
    image_size: int = 64
    channels: int = 1
    patch: int = 8
    embedding_width: int = 768
    freeze_backbone: bool = False

    def __post_init__(self):
        if self.arg_mode not in ARG_MODES:
            raise ConfigError(f'arg_mode must be one of {ARG_MODES}, got {self.arg_mode!r}')
        if self.decoder_mode not in DECODER_MODES:
            raise ConfigError(f'decoder_mode must be one of {DECODER_MODES}, got {self.decoder_mode!r}')
        if self.backbone not in BACKBONES:
            raise ConfigError(f'backbone must be one of {BACKBONES}, got {self.backbone!r}')
        if self.d_model % self.n_heads:
            raise ConfigError(f'd_model={self.d_model} is not divisible by n_heads={self.n_heads}')
        if self.backbone == 'patch' and self.image_size % self.patch:
            raise ConfigError(f'image_size={self.image_size} is not divisible by patch={self.patch}')

    @property
    def max_len(self) -> int:
        return max_length(self.n_commands)

    @property
    def discrete(self) -> bool:
        return self.arg_mode == 'discrete'

    @property
    def autoregressive(self) -> bool:
        return self.decoder_mode == 'autoregressive'

    def decoder_signature(self) -> Dict[str, Any]:
        # fields that must agree for decoder weights to transfer between stages
        keys = ('d_model', 'd_ff', 'n_heads', 'structure_layers', 'path_layers', 'n_paths', 'n_commands', 'arg_mode', 'decoder_mode')
        return {k: getattr(self, k) for k in keys}

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> 'ModelConfig':
        params = dict(params)
        max_len = params.pop('max_len', None)

        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(params) - known
        if unknown:
            raise ConfigError(f'unknown model settings: {sorted(unknown)}')

        out = cls(**params)
        if max_len is not None and max_len != out.max_len:
            raise ConfigError(f'max_len={max_len} does not match 2 + 7 * n_commands = {out.max_len}')
        return out


# ------------------
# -- Layer pieces --
# ------------------
def _layer_norm(name: str):
    return hk.LayerNorm(axis=-1, create_scale=True, create_offset=True, name=name)

def _dropout(x: jax.Array, rate: float, is_training: bool):
    if not is_training or rate == 0:
        return x
    return hk.dropout(hk.next_rng_key(), rate, x)

def masked_mean(x: jax.Array, mask: jax.Array) -> jax.Array:
    m = mask.astype(x.dtype)[..., None]
    return jnp.sum(x * m, axis=-2) / jnp.maximum(jnp.sum(m, axis=-2), 1.)

def causal_mask(length: int) -> jax.Array:
    return jnp.tril(jnp.ones((length, length), dtype=bool))[None, None]

def key_mask(valid: jax.Array) -> jax.Array:
    # [..., T'] -> [..., 1, 1, T'] broadcast over heads and queries
    return valid[..., None, None, :]


class Block(hk.Module):
    """Pre-norm transformer block with optional cross-attention to a memory."""
    def __init__(self, config: ModelConfig, cross: bool, name: Optional[str] = None):
        super().__init__(name=name)
        self.config = config
        self.cross = cross

    def _attention(self, name: str):
        c = self.config
        return hk.MultiHeadAttention(
            num_heads=c.n_heads,
            key_size=c.d_model // c.n_heads,
            model_size=c.d_model,
            w_init=hk.initializers.VarianceScaling(1.0, 'fan_avg', 'uniform'),
            name=name,
        )

    def __call__(self, x, mask=None, memory=None, memory_mask=None, is_training: bool = False):
        c = self.config

        h = _layer_norm('ln_self')(x)
        h = self._attention('self_attn')(h, h, h, mask=mask)
        x = x + _dropout(h, c.dropout, is_training)

        if self.cross:
            h = _layer_norm('ln_cross')(x)
            h = self._attention('cross_attn')(h, memory, memory, mask=memory_mask)
            x = x + _dropout(h, c.dropout, is_training)

        h = _layer_norm('ln_ff')(x)
        h = hk.Linear(c.d_ff, name='ff_in')(h)
        h = jax.nn.gelu(h)
        h = hk.Linear(c.d_model, name='ff_out')(h)
        return x + _dropout(h, c.dropout, is_training)


class StepEmbedding(hk.Module):
    """type embedding + argument embedding (ARG positions only) + learned index embedding"""
    def __init__(self, config: ModelConfig, name: Optional[str] = None):
        super().__init__(name=name)
        self.config = config

    def __call__(self, T: jax.Array, A: jax.Array, positions: Optional[jax.Array] = None) -> jax.Array:
        c = self.config
        if positions is None:
            if T.shape[-1] > c.max_len:
                raise PositionOverflowError(f'sequence length {T.shape[-1]} exceeds max_len={c.max_len}')
            positions = jnp.arange(T.shape[-1])

        idx = jnp.where(T < 0, PAD_INDEX, T)
        out = hk.Embed(N_TYPES + 1, c.d_model, name='type')(idx)

        if c.discrete:
            q = jnp.floor(255 * jnp.clip(A, 0., 1.) + 0.5).astype(jnp.int32)
            arg = hk.Embed(QUANT_LEVELS, c.d_model, name='arg')(q)
        else:
            arg = hk.Linear(c.d_model, name='arg')(A[..., None])

        is_arg = (T == TokenType.ARG)[..., None]
        out = out + jnp.where(is_arg, arg, 0.)
        return out + hk.Embed(c.max_len, c.d_model, name='index')(positions)


# ----------------
# -- Components --
# ----------------
class SvgEncoder(hk.Module):
    def __init__(self, config: ModelConfig, name: Optional[str] = None):
        super().__init__(name=name)
        self.config = config

    def __call__(self, T: jax.Array, A: jax.Array, v: jax.Array, is_training: bool = False) -> jax.Array:
        c = self.config
        B, P, L = T.shape

        # stage 1: every slot's sequence to one path vector
        t = T.reshape(B * P, L)
        a = A.reshape(B * P, L)
        valid = t != PAD

        x = StepEmbedding(c, name='embed')(t, a)
        for i in range(c.encoder_layers):
            x = Block(c, cross=False, name=f'path_block_{i}')(x, key_mask(valid), is_training=is_training)

        x = _layer_norm('path_ln')(x)
        paths = masked_mean(x, valid).reshape(B, P, c.d_model)

        # stage 2: visible path vectors to one latent
        paths = paths + hk.Embed(P, c.d_model, name='slot')(jnp.arange(P))
        visible = v > 0
        for i in range(c.encoder_layers):
            paths = Block(c, cross=False, name=f'icon_block_{i}')(paths, key_mask(visible), is_training=is_training)

        paths = _layer_norm('icon_ln')(paths)
        return masked_mean(paths, visible)


class PatchBackbone(hk.Module):
    def __init__(self, config: ModelConfig, name: Optional[str] = None):
        super().__init__(name=name)
        self.config = config

    def __call__(self, image: jax.Array, is_training: bool = False) -> jax.Array:
        c = self.config
        x = hk.Conv2D(c.d_model, kernel_shape=c.patch, stride=c.patch, padding='VALID', name='patch')(image)
        x = x.reshape(x.shape[0], -1, c.d_model)

        pos = hk.get_parameter('position', [x.shape[1], c.d_model], init=hk.initializers.TruncatedNormal(0.02))
        x = x + pos
        for i in range(c.backbone_layers):
            x = Block(c, cross=False, name=f'block_{i}')(x, is_training=is_training)

        x = _layer_norm('ln')(x)
        return jnp.mean(x, axis=-2)


class StructureDecoder(hk.Module):
    def __init__(self, config: ModelConfig, name: Optional[str] = None):
        super().__init__(name=name)
        self.config = config

    def __call__(self, z: jax.Array, is_training: bool = False) -> Tuple[jax.Array, jax.Array]:
        c = self.config
        queries = hk.get_parameter('slots', [c.n_paths, c.d_model], init=hk.initializers.TruncatedNormal(0.02))
        x = jnp.broadcast_to(queries, z.shape[:-1] + queries.shape)

        memory = z[..., None, :]
        for i in range(c.structure_layers):
            x = Block(c, cross=True, name=f'block_{i}')(x, memory=memory, is_training=is_training)

        x = _layer_norm('ln')(x)
        z_p = hk.Linear(c.d_model, name='z_head')(x)
        v_logits = hk.Linear(2, name='v_head')(x)
        return z_p, v_logits


class PathDecoder(hk.Module):
    """Causal decoder over shifted (type, argument) inputs, cross-attending to one path embedding."""
    def __init__(self, config: ModelConfig, name: Optional[str] = None):
        super().__init__(name=name)
        self.config = config

    def __call__(self, z: jax.Array, T_in: jax.Array, A_in: jax.Array, is_training: bool = False):
        c = self.config
        x = StepEmbedding(c, name='embed')(T_in, A_in)
        mask = causal_mask(x.shape[-2])

        memory = z[..., None, :]
        for i in range(c.path_layers):
            x = Block(c, cross=True, name=f'block_{i}')(x, mask, memory, is_training=is_training)

        x = _layer_norm('ln')(x)
        type_logits = hk.Linear(N_TYPES, name='type_head')(x)
        if c.discrete:
            args = hk.Linear(QUANT_LEVELS, name='arg_head')(x)
        else:
            args = hk.Linear(1, name='arg_head')(x)[..., 0]

        return type_logits, args


class ParallelPathDecoder(hk.Module):
    """One pass over learned command queries; 11 argument slots per command."""
    def __init__(self, config: ModelConfig, name: Optional[str] = None):
        super().__init__(name=name)
        self.config = config

    def __call__(self, z: jax.Array, is_training: bool = False):
        c = self.config
        queries = hk.get_parameter('commands', [c.n_commands, c.d_model], init=hk.initializers.TruncatedNormal(0.02))
        x = jnp.broadcast_to(queries, z.shape[:-1] + queries.shape)

        memory = z[..., None, :]
        for i in range(c.path_layers):
            x = Block(c, cross=True, name=f'block_{i}')(x, memory=memory, is_training=is_training)

        x = _layer_norm('ln')(x)
        type_logits = hk.Linear(N_TYPES, name='type_head')(x)
        if c.discrete:
            args = hk.Linear(N_ARGS * QUANT_LEVELS, name='arg_head')(x)
            args = args.reshape(x.shape[:-1] + (N_ARGS, QUANT_LEVELS))
        else:
            args = hk.Linear(N_ARGS, name='arg_head')(x)

        return type_logits, args


# --------------------------
# -- Component transforms --
# --------------------------
def svgEncoder(config: ModelConfig):
    def _inner(T, A, v, is_training=False):
        return SvgEncoder(config, name='svg_encoder')(T, A, v, is_training)
    return _inner

def backbone(config: ModelConfig):
    def _inner(image, is_training=False):
        return PatchBackbone(config, name='backbone')(image, is_training)
    return _inner

def adapter(config: ModelConfig):
    def _inner(x, is_training=False):
        mlp = hk.nets.MLP([config.d_model] * 3, activation=jax.nn.gelu, name='adapter')
        return mlp(x)
    return _inner

def structure(config: ModelConfig):
    def _inner(z, is_training=False):
        return StructureDecoder(config, name='structure')(z, is_training)
    return _inner

def pathDecoder(config: ModelConfig):
    if config.autoregressive:
        def _inner(z, T_in, A_in, is_training=False):
            return PathDecoder(config, name='path')(z, T_in, A_in, is_training)
    else:
        def _inner(z, is_training=False):
            return ParallelPathDecoder(config, name='path')(z, is_training)
    return _inner

class _PathEmbedding(hk.Module):
    # mirrors the naming inside PathDecoder so it reads the decoder's embedding parameters
    def __init__(self, config: ModelConfig):
        super().__init__(name='path')
        self.config = config

    def __call__(self, T, A, positions):
        return StepEmbedding(self.config, name='embed')(T, A, positions)

def stepEmbedding(config: ModelConfig):
    def _inner(T, A, positions):
        return _PathEmbedding(config)(T, A, positions)
    return _inner


Apply = Callable[..., Any]

class NetworkBuilder:
    def __init__(self, config: ModelConfig, seed: int):
        self.config = config
        self._rng = jax.random.PRNGKey(seed)
        self._params: Dict[str, Any] = {}
        self._retrieved_params = False

    def getParams(self):
        self._retrieved_params = True
        return self._params

    def addComponent(self, name: str, module: Callable[..., Callable], *sample_inputs) -> Apply:
        assert not self._retrieved_params, 'Attempted to add a component after params have been retrieved'

        net = hk.transform(module(self.config))
        self._rng, rng = jax.random.split(self._rng)
        self._params[name] = net.init(rng, *sample_inputs)

        def _inner(params: Any, rng: Optional[jax.Array], *args, is_training: bool = False):
            return net.apply(params[name], rng, *args, is_training=is_training)

        return _inner

    def getFunction(self, name: str, module: Callable[..., Callable]) -> Apply:
        """Apply function over an existing component's parameters, for modules nested in it."""
        net = hk.transform(module(self.config))

        def _inner(params: Any, *args):
            return net.apply(params[name], None, *args)

        return _inner


# -------------------
# -- Sample inputs --
# -------------------
def sample_tokens(config: ModelConfig, batch: int = 1):
    T = np.full((batch, config.n_paths, config.max_len), PAD, dtype=np.int32)
    T[..., 0] = TokenType.SOS
    A = np.full(T.shape, PAD, dtype=np.float32)
    v = np.ones((batch, config.n_paths), dtype=np.int32)
    return jnp.asarray(T), jnp.asarray(A), jnp.asarray(v)

def sample_image(config: ModelConfig, batch: int = 1):
    return jnp.ones((batch, config.image_size, config.image_size, config.channels), dtype=jnp.float32)

def sample_latent(config: ModelConfig, batch: int = 1, width: Optional[int] = None):
    return jnp.zeros((batch, width or config.d_model), dtype=jnp.float32)
