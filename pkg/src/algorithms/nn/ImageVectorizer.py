import logging
import numpy as np

import jax
import jax.numpy as jnp

from typing import Any, Optional, Set

import representations.networks as nets
from algorithms.BaseVectorizer import Batch, Prediction
from algorithms.nn.NNVectorizer import NNVectorizer, VectorizerState
from svg.types import ShapeError
from representations.networks import ConfigError, NetworkBuilder
from utils.checkpoint import CheckpointMismatchError

logger = logging.getLogger(__name__)

# copied from the pretraining checkpoint
DECODERS = ('structure', 'path')


class ImageVectorizer(NNVectorizer):
    """
    Joint stage: image -> backbone -> adapter -> latent, decoded by the pretrained
    structure and path decoders. The pretraining encoder rides along frozen so the
    SVG-to-SVG route stays available for evaluation.
    """
    train_route = 'img'

    def _build_components(self, builder: NetworkBuilder) -> None:
        c = self.model
        self.svg_encoder = builder.addComponent('svg_encoder', nets.svgEncoder, *nets.sample_tokens(c))

        self.backbone = None
        width = c.embedding_width
        if c.backbone == 'patch':
            self.backbone = builder.addComponent('backbone', nets.backbone, nets.sample_image(c))
            width = c.d_model

        self.adapter = builder.addComponent('adapter', nets.adapter, nets.sample_latent(c, width=width))

    def _trainable(self) -> Set[str]:
        out = {'adapter', 'structure', 'path'}
        if self.backbone is not None and not self.model.freeze_backbone:
            out.add('backbone')
        return out

    def _image_latent(self, params: Any, rng: Any, batch: Batch, is_training: bool) -> jax.Array:
        if self.backbone is None:
            x = batch['emb']
        else:
            x = self.backbone(params, rng, batch['image'], is_training=is_training)

        return self.adapter(params, None, x, is_training=is_training)

    # ----------------------
    # -- Stage transition --
    # ----------------------
    def init_from(self, pretrained: NNVectorizer) -> None:
        """Take the decoders (and the SVG encoder) from a pretraining learner and reset the optimizer."""
        ours = self.model.decoder_signature()
        theirs = pretrained.model.decoder_signature()
        if ours != theirs:
            diff = sorted(k for k in ours if ours[k] != theirs.get(k))
            raise CheckpointMismatchError(f'pretrained decoders differ in {diff}: {theirs} vs {ours}')

        params = dict(self.state.params)
        for name in DECODERS:
            params[name] = pretrained.state.params[name]

        if pretrained.model.encoder_layers == self.model.encoder_layers:
            params['svg_encoder'] = pretrained.state.params['svg_encoder']
        else:
            logger.warning('encoder_layers differs from the pretrained model; the SVG route keeps fresh weights')

        self.state = VectorizerState(
            params=params,
            optim=self.optimizer.init(params),
        )
        self.updates = 0

    # ---------------
    # -- Inference --
    # ---------------
    def _check_image(self, image: np.ndarray) -> np.ndarray:
        c = self.model
        image = np.asarray(image, dtype=np.float32)
        if image.ndim == 2:
            image = image[..., None]

        expected = (c.image_size, c.image_size, c.channels)
        if image.shape[-3:] != expected:
            raise ShapeError(f'expected an image of shape {expected}, got {image.shape}')
        return image

    def image_encode(self, image: Optional[np.ndarray] = None, emb: Optional[np.ndarray] = None) -> jax.Array:
        params = self.state.params
        if self.backbone is None:
            if emb is None:
                raise ConfigError('backbone=precomputed needs an embedding vector')
            emb = jnp.asarray(emb, dtype=jnp.float32)
            if emb.shape[-1] != self.model.embedding_width:
                raise ShapeError(f'expected embeddings of width {self.model.embedding_width}, got {emb.shape}')
            return self._image_latent(params, None, {'emb': jnp.atleast_2d(emb)}, False)

        image = self._check_image(image)
        batch = image if image.ndim == 4 else image[None]
        return self._image_latent(params, None, {'image': jnp.asarray(batch)}, False)

    def vectorize(self, image: Optional[np.ndarray] = None, emb: Optional[np.ndarray] = None) -> Prediction:
        if self.backbone is None:
            if emb is None:
                raise ConfigError('backbone=precomputed needs an embedding vector')
            batch = {'emb': np.asarray(emb, dtype=np.float32).reshape(1, -1)}
        else:
            batch = {'image': self._check_image(image)[None]}

        return self.predict(batch, 'img')[0]
