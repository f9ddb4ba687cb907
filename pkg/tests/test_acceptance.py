import os
import dataclasses
import numpy as np
import pytest

import jax
import haiku as hk

import representations.networks as nets
from algorithms.nn.SVGReconstruction import SVGReconstruction
from data.container import CorpusSpec, RecordReader
from data.corpus import synth_corpus
from experiment import ExperimentModel
from experiment.evaluation import evaluate, score_icon
from experiment.training import joint_train, pretrain
from representations.tokenizer import DecodeError, decode_icon, decode_path

from conftest import desk_config, quiet_collector

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DESK = os.path.join(ROOT, 'experiments/desk/Synthetic')


def desk(name: str, **model):
    config = ExperimentModel.load(os.path.join(DESK, f'{name}.json')).train_config(0)
    return dataclasses.replace(
        config,
        eval=dataclasses.replace(config.eval, every=0),
        model=dataclasses.replace(config.model, **model),
    )


def overfit(tmp_path, reader: RecordReader, seed: int = 0, **model):
    """Pretrain then train the image route on every icon of the corpus; returns both learners."""
    tag = '-'.join(map(str, model.values())) or 'baseline'
    pre = str(tmp_path / f'pre-{tag}-{seed}.ckpt')
    svg = pretrain(reader, desk('Pretrain', **model), pre, seed=seed, split='all', collector=quiet_collector())

    out = str(tmp_path / f'joint-{tag}-{seed}.ckpt')
    img = joint_train(reader, pre, desk('Joint', **model), out, seed=seed, split='all', collector=quiet_collector())
    return svg, img


def vectorized_iou(learner, reader: RecordReader) -> float:
    scores = []
    for i in range(len(reader)):
        pred = learner.vectorize(reader.image(i))
        score, _, _ = score_icon(pred.script, decode_icon(reader.tokens(i)), resolution=128, samples=1000)
        scores.append(score)
    return float(np.mean(scores))


@pytest.fixture(scope='module')
def overfit_corpus(tmp_path_factory):
    path = str(tmp_path_factory.mktemp('overfit') / 'corpus.rec')
    synth_corpus(16, seed=0, out_path=path, spec=CorpusSpec())
    return RecordReader(path)


def test_single_step_decreases_loss(reader):
    batch = reader.batch([0])
    improved = 0
    for seed in range(10):
        learner = SVGReconstruction(desk_config(lr=1e-3), quiet_collector(), seed=seed)
        before = float(learner.loss(batch).total[0])
        learner.update(batch)
        improved += float(learner.loss(batch).total[0]) < before

    assert improved >= 9


@pytest.mark.slow
def test_greedy_decodes_are_grammatical():
    learner = SVGReconstruction(desk('Pretrain'), quiet_collector(), seed=0)
    c = learner.model

    # fresh path decoder weights per seed, same shapes so the decode is compiled once
    z = nets.sample_latent(c)
    T, A, _ = nets.sample_tokens(c)
    init = jax.jit(hk.transform(nets.pathDecoder(c)).init)

    failures = 0
    for seed in range(1000):
        key = jax.random.PRNGKey(seed)
        params = dict(learner.state.params, path=init(key, z, T[:, 0], A[:, 0]))
        learner.state = learner.state.replace(params=params)

        z_p = jax.random.normal(jax.random.fold_in(key, 1), (1, c.d_model))
        t, a = learner.path_decode_greedy(z_p)
        try:
            decode_path(t[0], a[0])
        except DecodeError:
            failures += 1

    assert failures == 0


@pytest.mark.slow
def test_first_fifty_losses_reproduce(overfit_corpus):
    idxs = np.arange(len(overfit_corpus))

    def trajectory():
        learner = SVGReconstruction(desk('Pretrain'), quiet_collector(), seed=3)
        rng = np.random.default_rng(3)
        return [float(learner.update(overfit_corpus.batch(rng.choice(idxs, 16))).total) for _ in range(50)]

    assert trajectory() == trajectory()


@pytest.mark.slow
def test_overfit(tmp_path, overfit_corpus):
    ids = overfit_corpus.ids
    svg, img = overfit(tmp_path, overfit_corpus)

    report = evaluate(svg, overfit_corpus, ids, 'svg', resolution=128, samples=1000)
    assert report.mean_iou >= 0.90
    assert report.mean_cd <= 0.02

    report = evaluate(img, overfit_corpus, ids, 'img', resolution=128, samples=1000)
    assert report.mean_iou >= 0.80
    assert report.visibility_accuracy >= 0.90


@pytest.mark.slow
def test_ablation_direction(tmp_path, overfit_corpus):
    def score(**model):
        scores = []
        for seed in range(3):
            _, img = overfit(tmp_path, overfit_corpus, seed, **model)
            scores.append(vectorized_iou(img, overfit_corpus))
        return np.mean(scores)

    continuous = score(arg_mode='continuous', decoder_mode='autoregressive')
    assert continuous > score(arg_mode='discrete', decoder_mode='autoregressive')
    assert continuous > score(arg_mode='continuous', decoder_mode='parallel')
