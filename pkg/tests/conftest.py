import os
import sys
sys.path.append(os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

import pytest

from PyExpUtils.collection.Collector import Collector
from PyExpUtils.collection.Sampler import Ignore

from data.container import CorpusSpec, RecordReader
from data.corpus import synth_corpus
from experiment.ExperimentModel import EvalConfig, TrainConfig
from representations.networks import ModelConfig

# small enough for a laptop CPU, large enough to hold every synthetic icon
DESK_MODEL = dict(
    d_model=32,
    d_ff=64,
    n_heads=4,
    structure_layers=1,
    path_layers=2,
    encoder_layers=1,
    n_paths=4,
    n_commands=8,
    dropout=0.,
    backbone='patch',
    backbone_layers=1,
    image_size=16,
    patch=8,
)

DESK_CORPUS = CorpusSpec(n_paths=4, n_commands=8, image_size=16, channels=1)


def desk_model(**overrides) -> ModelConfig:
    return ModelConfig(**{**DESK_MODEL, **overrides})


def desk_config(stage: str = 'pretrain', learner: str = 'SVGReconstruction', total_steps: int = 4, **overrides) -> TrainConfig:
    model = overrides.pop('model', desk_model())
    return TrainConfig(
        stage=stage,
        learner=learner,
        total_steps=total_steps,
        batch_size=overrides.pop('batch_size', 4),
        lr=overrides.pop('lr', 1e-3),
        warmup_steps=overrides.pop('warmup_steps', 0),
        checkpoint_every=overrides.pop('checkpoint_every', 0),
        log_every=overrides.pop('log_every', 0),
        eval=overrides.pop('eval', EvalConfig(every=0, resolution=32, samples=64)),
        model=model,
        **overrides,
    )


def quiet_collector() -> Collector:
    collector = Collector(config={}, default=Ignore())
    collector.setIdx(0)
    return collector


@pytest.fixture
def model_config() -> ModelConfig:
    return desk_model()


@pytest.fixture
def collector() -> Collector:
    return quiet_collector()


@pytest.fixture(scope='session')
def corpus_path(tmp_path_factory) -> str:
    path = str(tmp_path_factory.mktemp('corpus') / 'synth.rec')
    synth_corpus(12, seed=3, out_path=path, spec=DESK_CORPUS)
    return path


@pytest.fixture
def reader(corpus_path) -> RecordReader:
    return RecordReader(corpus_path)
