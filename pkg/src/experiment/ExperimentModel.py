import sys
import json
import dataclasses
from typing import Any, Dict, Optional
from PyExpUtils.models.ExperimentDescription import ExperimentDescription

from algorithms.losses import LossWeights
from representations.networks import ConfigError, ModelConfig

STAGES = ('pretrain', 'joint')

# per-stage optimizer defaults
STAGE_DEFAULTS = {
    'pretrain': {'lr': 5e-4, 'warmup_steps': 500},
    'joint': {'lr': 1e-6, 'warmup_steps': 0},
}


@dataclasses.dataclass(frozen=True)
class EvalConfig:
    resolution: int = 128
    samples: int = 1000
    every: int = 500
    patience: int = 5
    # icons scored per periodic evaluation; 0 scores the whole split
    max_icons: int = 64
    split: str = 'train'


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    stage: str
    learner: str
    total_steps: int
    batch_size: int = 16
    lr: float = 5e-4
    warmup_steps: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    clip: float = 1.0
    checkpoint_every: int = 1000
    log_every: int = 100
    weights: LossWeights = dataclasses.field(default_factory=LossWeights)
    eval: EvalConfig = dataclasses.field(default_factory=EvalConfig)
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigError(f'stage must be one of {STAGES}, got {self.stage!r}')
        if self.batch_size < 1 or self.total_steps < 0 or self.warmup_steps < 0:
            raise ConfigError('batch_size must be positive; total_steps and warmup_steps non-negative')

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> 'TrainConfig':
        d = dict(d)
        return cls(
            weights=LossWeights(**d.pop('weights')),
            eval=EvalConfig(**d.pop('eval')),
            model=ModelConfig.from_params(d.pop('model')),
            **d,
        )

    @classmethod
    def from_params(cls, stage: str, learner: str, total_steps: int, params: Dict[str, Any], **cadence) -> 'TrainConfig':
        if stage not in STAGE_DEFAULTS:
            raise ConfigError(f'stage must be one of {STAGES}, got {stage!r}')

        optimizer = {**STAGE_DEFAULTS[stage], **params.get('optimizer', {})}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(optimizer) - known
        if unknown:
            raise ConfigError(f'unknown optimizer settings: {sorted(unknown)}')

        try:
            weights = LossWeights(**params.get('loss', {}))
            evaluation = EvalConfig(**params.get('eval', {}))
        except TypeError as e:
            raise ConfigError(str(e)) from e

        return cls(
            stage=stage,
            learner=learner,
            total_steps=total_steps,
            batch_size=params.get('batch', 16),
            weights=weights,
            eval=evaluation,
            model=ModelConfig.from_params(params.get('model', {})),
            **optimizer,
            **cadence,
        )


class ExperimentModel(ExperimentDescription):
    def __init__(self, d, path):
        super().__init__(d, path)
        self.learner = d['learner']
        self.stage = d.get('stage', 'pretrain')
        self.total_steps = d['total_steps']

        # name of the pretraining experiment (same folder) whose checkpoint seeds a joint run
        self.init = d.get('init')

        self.cadence = {
            k: d[k] for k in ('checkpoint_every', 'log_every') if k in d
        }

    def train_config(self, idx: int, total_steps: Optional[int] = None) -> TrainConfig:
        return TrainConfig.from_params(
            self.stage,
            self.learner,
            total_steps if total_steps is not None else self.total_steps,
            self.get_hypers(idx),
            **self.cadence,
        )


def load(path=None):
    path = path if path is not None else sys.argv[1]
    with open(path, 'r') as f:
        d = json.load(f)

    exp = ExperimentModel(d, path)
    return exp
