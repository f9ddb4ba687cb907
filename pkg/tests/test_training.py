import os
import json
import multiprocessing
import numpy as np
import pytest

from algorithms.BaseVectorizer import Prediction
from algorithms.losses import LossReport
from algorithms.nn.NNVectorizer import learning_rate_schedule
from algorithms.nn.SVGReconstruction import SVGReconstruction
from analysis.results import EvalReport, EvalRow
from experiment import ExperimentModel
from experiment.ExperimentModel import EvalConfig, TrainConfig
from experiment.evaluation import EMPTY_CD, evaluate, score_icon
from experiment.training import (
    TrainingDivergedError, build_collector, joint_train, log_path_for, partial_path, pretrain, split_indices,
)
from experiment.tools import readTrainingLog, resultsPath
from representations.networks import ConfigError
from representations.tokenizer import TokenizedIcon, decode_icon
from svg.types import L, M, Path, SvgScript
from utils.checkpoint import Checkpoint, CheckpointMismatchError, load_learner
from utils.iterators import EpochIterator

import experiment.training as training

from conftest import desk_config, desk_model, quiet_collector

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class EchoPredictor:
    """Predicts each icon's own target."""
    def predict(self, batch, route):
        out = []
        for T, A, v in zip(batch['T'], batch['A'], batch['v']):
            script = decode_icon(TokenizedIcon(T=T, A=A, v=v))
            out.append(Prediction(script, int(v.sum())))
        return out


# -------------------
# -- Configuration --
# -------------------
def test_warmup_schedule():
    schedule = learning_rate_schedule(desk_config(lr=5e-4, warmup_steps=500))
    assert float(schedule(0)) == 0.
    assert float(schedule(250)) == pytest.approx(2.5e-4)
    assert float(schedule(500)) == pytest.approx(5e-4)
    assert float(schedule(10_000)) == pytest.approx(5e-4)


def test_experiment_file():
    exp = ExperimentModel.load(os.path.join(ROOT, 'experiments/desk/Synthetic/Pretrain.json'))
    config = exp.train_config(0)

    assert config.stage == 'pretrain'
    assert config.learner == 'SVGReconstruction'
    assert config.batch_size == 16
    assert config.lr == 5e-4
    assert config.warmup_steps == 500
    assert config.weights.w_args == 6000
    assert config.model.d_model == 64

    joint = ExperimentModel.load(os.path.join(ROOT, 'experiments/desk/Synthetic/Joint.json'))
    assert joint.stage == 'joint'
    assert joint.init == 'Pretrain'


def test_train_config_errors():
    with pytest.raises(ConfigError):
        TrainConfig.from_params('pretrain', 'SVGReconstruction', 10, {'optimizer': {'momentum': 0.9}})

    with pytest.raises(ConfigError):
        TrainConfig.from_params('finetune', 'SVGReconstruction', 10, {})

    with pytest.raises(ConfigError):
        TrainConfig.from_params('pretrain', 'SVGReconstruction', 10, {'model': {'d_model': 30}})

    config = TrainConfig.from_params('joint', 'ImageVectorizer', 10, {})
    assert config.lr == 1e-6
    assert config.warmup_steps == 0
    assert TrainConfig.from_dict(config.to_dict()) == config


def test_results_path():
    assert resultsPath('experiments/desk/Synthetic/Pretrain.json') == 'results/desk/Synthetic/Pretrain'
    assert resultsPath('experiments/desk/Synthetic/Joint.json', base='out', suffix='/0-1.ckpt') == 'out/desk/Synthetic/Joint/0-1.ckpt'


# ---------------
# -- Iteration --
# ---------------
def test_epoch_iterator():
    a = EpochIterator(np.arange(10), 4, seed=3)
    b = EpochIterator(np.arange(10), 4, seed=3)

    first = [a.next_batch() for _ in range(5)]
    assert all(len(x) == 4 for x in first)
    assert all(np.array_equal(x, y) for x, y in zip(first, [b.next_batch() for _ in range(5)]))

    # the first epoch visits every index once
    seen = np.concatenate(first)[:10]
    assert sorted(seen.tolist()) == list(range(10))
    assert a.epoch == 2

    with pytest.raises(ValueError):
        EpochIterator([], 4, seed=0)


def test_split_indices(reader):
    assert len(split_indices(reader, 'all')) == len(reader)

    train = split_indices(reader, 'train')
    held = split_indices(reader, 'eval')
    assert len(train) + len(held) == len(reader)
    assert not set(train.tolist()) & set(held.tolist())


def test_split_without_manifest(tmp_path, reader):
    import shutil
    from data.container import RecordReader

    path = str(tmp_path / 'copy.rec')
    shutil.copy(reader.path, path)
    assert len(split_indices(RecordReader(path), 'train')) == len(reader)


# --------------
# -- Learning --
# --------------
def test_first_losses_are_deterministic(reader):
    batches = [reader.batch([i, i + 1, i + 2, i + 3]) for i in range(0, 8, 2)]

    def run():
        learner = SVGReconstruction(desk_config(), quiet_collector(), seed=11)
        return [float(learner.update(b).total) for b in batches]

    assert run() == run()


def test_updates_reduce_loss(reader):
    learner = SVGReconstruction(desk_config(), quiet_collector(), seed=0)
    batch = reader.batch([0, 1, 2, 3])

    before = float(np.mean(learner.loss(batch).total))
    for _ in range(5):
        learner.update(batch)
    after = float(np.mean(learner.loss(batch).total))

    assert after < before
    assert learner.updates == 5


# -------------------
# -- Checkpointing --
# -------------------
def test_checkpoint_store(tmp_path):
    path = str(tmp_path / 'run.ckpt')
    config = desk_config()

    chk = Checkpoint(path, config)
    assert chk.build('thing', lambda: [1, 2]) == [1, 2]
    assert chk.initial_value('step', 3) == 3
    chk['step'] = 7
    chk.save()
    assert not os.path.exists(path + '.tmp')

    other = Checkpoint(path, config)
    assert other.load_if_exists()
    assert other['step'] == 7
    assert other.build('thing', lambda: None) == [1, 2]

    changed = Checkpoint(path, desk_config(model=desk_model(d_model=64)))
    with pytest.raises(CheckpointMismatchError):
        changed.load()

    chk.delete()
    assert not Checkpoint(path, config).load_if_exists()


def test_checkpoint_round_trip(tmp_path, reader):
    out = str(tmp_path / 'pre.ckpt')
    learner = pretrain(reader, desk_config(total_steps=3), out, seed=0, split='all', collector=quiet_collector())

    assert os.path.exists(out)
    assert not os.path.exists(partial_path(out))

    loaded = load_learner(out)
    assert isinstance(loaded, SVGReconstruction)
    assert loaded.updates == 3

    ids = reader.ids[:4]
    a = evaluate(learner, reader, ids, 'svg', resolution=32, samples=64)
    b = evaluate(loaded, reader, ids, 'svg', resolution=32, samples=64)
    assert a.rows == b.rows

    log = readTrainingLog(log_path_for(out))
    assert list(log['step']) == [0, 1, 2]
    assert set(log) == {'step', 'lr', 'loss', 'vis', 'type', 'args', 'wall'}


def test_joint_training_starts_from_pretraining(tmp_path, reader):
    pre = str(tmp_path / 'pre.ckpt')
    pretrain(reader, desk_config(total_steps=1), pre, seed=0, split='all', collector=quiet_collector())

    out = str(tmp_path / 'joint.ckpt')
    config = desk_config('joint', 'ImageVectorizer', total_steps=2)
    learner = joint_train(reader, pre, config, out, seed=0, split='all', collector=quiet_collector())

    assert learner.updates == 2
    report = evaluate(load_learner(out), reader, reader.ids[:3], 'img', resolution=32, samples=64)
    assert len(report.rows) == 3


def test_stage_mismatch(tmp_path, reader):
    with pytest.raises(ConfigError):
        pretrain(reader, desk_config('joint', 'ImageVectorizer'), str(tmp_path / 'x.ckpt'), seed=0)

    with pytest.raises(ConfigError):
        pretrain(reader, desk_config('pretrain', 'ImageVectorizer'), str(tmp_path / 'x.ckpt'), seed=0)


def test_divergence_guard(tmp_path, reader, monkeypatch):
    nan = np.float32(np.nan)

    def diverged(self, batch):
        return LossReport(total=nan, vis=nan, type=nan, args=nan, per_path=np.full(4, nan))

    monkeypatch.setattr(SVGReconstruction, 'update', diverged)
    out = str(tmp_path / 'pre.ckpt')
    with pytest.raises(TrainingDivergedError):
        pretrain(reader, desk_config(), out, seed=0, collector=quiet_collector())

    assert not os.path.exists(out)


def test_early_stopping(tmp_path, reader, monkeypatch):
    def flat_report(*args, **kwargs):
        return EvalReport('svg', 'train', 32, 64, rows=[EvalRow('x', 0.5, 0.1, 1, 1)])

    monkeypatch.setattr(training, 'evaluate', flat_report)
    config = desk_config(total_steps=20, eval=EvalConfig(every=2, patience=2, max_icons=2, resolution=32, samples=64))

    out = str(tmp_path / 'pre.ckpt')
    learner = pretrain(reader, config, out, seed=0, split='all', collector=build_collector())

    # the first evaluation sets the best score, two flat ones stop the run
    assert learner.updates == 6
    assert len(readTrainingLog(log_path_for(out))['step']) == 6


# ----------------
# -- Evaluation --
# ----------------
def test_identity_evaluation(tmp_path, reader):
    report = evaluate(EchoPredictor(), reader, reader.ids, 'svg', resolution=64, samples=200, batch_size=5)

    assert len(report.rows) == len(reader)
    assert report.mean_iou == 1.0
    assert report.mean_cd == 0.0
    assert report.visibility_accuracy == 1.0
    assert report.fingerprint['corpus']['n_paths'] == reader.spec.n_paths

    path = str(tmp_path / 'report.tsv')
    report.write(path)
    with open(path) as f:
        lines = f.read().splitlines()
    assert len(lines) == len(reader) + 1
    assert lines[-1].startswith('mean\t')

    again = EvalReport.read(path)
    assert again.rows == report.rows
    with open(path + '.json') as f:
        assert json.load(f)['summary']['icons'] == len(reader)


def test_parallel_scoring_matches(reader, monkeypatch):
    contexts = []
    get_context = multiprocessing.get_context

    def recording(method=None):
        contexts.append(method)
        return get_context(method)

    monkeypatch.setattr(multiprocessing, 'get_context', recording)

    ids = reader.ids[:6]
    serial = evaluate(EchoPredictor(), reader, ids, 'svg', resolution=32, samples=50)
    pooled = evaluate(EchoPredictor(), reader, ids, 'svg', resolution=32, samples=50, workers=2)
    assert serial.rows == pooled.rows
    assert 'spawn' in contexts


def test_score_empty_cases():
    square = SvgScript((Path((M(0.2, 0.2), L(0.8, 0.2), L(0.8, 0.8), L(0.2, 0.8), L(0.2, 0.2))), ))
    empty = SvgScript(())

    assert score_icon(empty, empty, 32, 50) == (1.0, 0.0, '')
    assert score_icon(empty, square, 32, 50) == (0.0, EMPTY_CD, 'empty')

    score, cd, flag = score_icon(square, square, 32, 50)
    assert (score, cd, flag) == (1.0, 0.0, '')
