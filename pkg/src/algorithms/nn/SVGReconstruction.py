from typing import Set

import representations.networks as nets
from algorithms.nn.NNVectorizer import NNVectorizer
from representations.networks import NetworkBuilder


class SVGReconstruction(NNVectorizer):
    """Decoder pretraining: icon tokens -> latent -> icon tokens."""
    train_route = 'svg'

    def _build_components(self, builder: NetworkBuilder) -> None:
        self.svg_encoder = builder.addComponent('svg_encoder', nets.svgEncoder, *nets.sample_tokens(self.model))

    def _trainable(self) -> Set[str]:
        return {'svg_encoder', 'structure', 'path'}
