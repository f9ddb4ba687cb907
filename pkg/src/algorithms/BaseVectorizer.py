import numpy as np

from abc import abstractmethod
from dataclasses import dataclass
from typing import Dict, List
from PyExpUtils.collection.Collector import Collector

from algorithms.losses import LossReport
from experiment.ExperimentModel import TrainConfig
from svg.types import SvgScript

Batch = Dict[str, np.ndarray]


@dataclass
class Prediction:
    script: SvgScript
    n_visible: int
    # '' | 'empty' | 'lenient'
    flag: str = ''


class BaseVectorizer:
    def __init__(self, config: TrainConfig, collector: Collector, seed: int):
        self.config = config
        self.model = config.model
        self.collector = collector

        self.seed = seed
        self.rng = np.random.default_rng(seed)

    @abstractmethod
    def update(self, batch: Batch) -> LossReport:
        ...

    @abstractmethod
    def predict(self, batch: Batch, route: str) -> List[Prediction]:
        ...

    # -------------------
    # -- Checkpointing --
    # -------------------
    def __getstate__(self):
        return {
            '__args': (self.config, self.collector, self.seed),
            'rng': self.rng,
        }

    def __setstate__(self, state):
        self.__init__(*state['__args'])
        self.rng = state['rng']
