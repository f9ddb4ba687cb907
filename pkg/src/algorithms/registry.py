from typing import Type
from algorithms.nn.NNVectorizer import NNVectorizer
from representations.networks import ConfigError

from algorithms.nn.ImageVectorizer import ImageVectorizer
from algorithms.nn.SVGReconstruction import SVGReconstruction

def getLearner(name) -> Type[NNVectorizer]:
    if name == 'SVGReconstruction':
        return SVGReconstruction

    if name == 'ImageVectorizer':
        return ImageVectorizer

    raise ConfigError(f'Unknown learner: {name}')
