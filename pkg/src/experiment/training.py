import os
import json
import time
import logging
import numpy as np

from typing import Optional, Sequence
from PyExpUtils.collection.Collector import Collector
from PyExpUtils.collection.Sampler import Identity, Ignore, MovingAverage, Subsample
from PyExpUtils.collection.utils import Pipe

from algorithms.nn.ImageVectorizer import ImageVectorizer
from algorithms.nn.NNVectorizer import NNVectorizer
from algorithms.registry import getLearner
from data.container import EmbeddingTable, RecordReader
from data.corpus import SplitManifest, manifest_path
from experiment.ExperimentModel import TrainConfig
from experiment.evaluation import evaluate, load_batch
from representations.networks import ConfigError
from utils.checkpoint import Checkpoint, load_learner
from utils.iterators import EpochIterator
from utils.preempt import TimeoutHandler

logger = logging.getLogger('exp')


class TrainingDivergedError(RuntimeError):
    ...


def build_collector(idx: int = 0) -> Collector:
    collector = Collector(
        config={
            'loss': Pipe(
                MovingAverage(0.99),
                Subsample(100),
            ),
            'grad_norm': Pipe(
                MovingAverage(0.99),
                Subsample(100),
            ),
            'eval_iou': Identity(),
            'eval_cd': Identity(),
        },
        # by default, ignore keys that are not explicitly listed above
        default=Ignore(),
    )
    collector.setIdx(idx)
    return collector


def split_indices(reader: RecordReader, split: str) -> np.ndarray:
    """'all' uses every record; 'train'/'eval' follow the corpus manifest when one exists."""
    if split == 'all':
        return np.arange(len(reader), dtype=np.int64)

    path = manifest_path(reader.path)
    if not os.path.exists(path):
        logger.warning(f'no split manifest at {path}; using every record')
        return np.arange(len(reader), dtype=np.int64)

    return reader.indices(SplitManifest.read(path).ids(split))


def _check_stage(config: TrainConfig, stage: str, route: str):
    if config.stage != stage:
        raise ConfigError(f'expected a {stage} config, got stage={config.stage!r}')

    Learner = getLearner(config.learner)
    if Learner.train_route != route:
        raise ConfigError(f'{config.learner} trains the {Learner.train_route} route, {stage} needs {route}')


def _check_embeddings(config: TrainConfig, embeddings: Optional[EmbeddingTable]):
    if config.model.backbone == 'precomputed' and embeddings is None:
        raise ConfigError('backbone=precomputed needs a precomputed-embedding file')


def check_corpus(config: TrainConfig, reader: RecordReader):
    c = config.model
    spec = reader.spec
    if (spec.n_paths, spec.n_commands) != (c.n_paths, c.n_commands):
        raise ConfigError(f'corpus holds {spec.n_paths}x{spec.n_commands} slots, the model expects {c.n_paths}x{c.n_commands}')

    if config.stage == 'joint' and c.backbone == 'patch' and (spec.image_size, spec.channels) != (c.image_size, c.channels):
        raise ConfigError(f'corpus images are {spec.image_size}px x{spec.channels}, the model expects {c.image_size}px x{c.channels}')


# -----------------
# -- Shared loop --
# -----------------
def _run(
    chk: Checkpoint,
    learner: NNVectorizer,
    reader: RecordReader,
    train_idxs: np.ndarray,
    log_path: str,
    embeddings: Optional[EmbeddingTable],
    resumed: bool,
) -> NNVectorizer:
    config = learner.config
    ev = config.eval

    icon_ids = reader.ids
    it = chk.build('iterator', lambda: EpochIterator(train_idxs, config.batch_size, learner.seed))
    chk.initial_value('step', 0)
    chk.initial_value('best', -np.inf)
    chk.initial_value('stale', 0)

    eval_ids: Sequence[str] = []
    if ev.every > 0:
        eval_ids = [icon_ids[i] for i in split_indices(reader, ev.split)]
        if ev.max_icons > 0:
            eval_ids = eval_ids[:ev.max_icons]

    collector = learner.collector
    start_step = chk['step']
    start_time = time.time()

    with open(log_path, 'a' if resumed else 'w', encoding='utf-8') as log:
        for step in range(start_step, config.total_steps):
            collector.next_frame()
            chk.maybe_save()

            batch = load_batch(reader, it.next_batch(), icon_ids, embeddings)
            lr = learner.learning_rate(learner.updates)
            report = learner.update(batch)

            total = float(report.total)
            if not np.isfinite(total):
                raise TrainingDivergedError(f'loss became {total} at step {step}')

            chk['step'] = step + 1
            log.write(json.dumps({
                'step': step,
                'lr': lr,
                'loss': total,
                'vis': float(report.vis),
                'type': float(report.type),
                'args': float(report.args),
                'wall': time.time() - start_time,
            }) + '\n')

            if config.log_every > 0 and step % config.log_every == 0:
                avg_time = 1000 * (time.time() - start_time) / (step - start_step + 1)
                logger.debug(f'{step} {total:.4} {lr:.3} {avg_time:.4}ms')

            if config.checkpoint_every > 0 and (step + 1) % config.checkpoint_every == 0:
                log.flush()
                chk.save()

            if ev.every > 0 and eval_ids and (step + 1) % ev.every == 0:
                er = evaluate(learner, reader, eval_ids, learner.train_route, ev.resolution, ev.samples, config.batch_size, embeddings=embeddings, split=ev.split)
                collector.collect('eval_iou', er.mean_iou)
                collector.collect('eval_cd', er.mean_cd)

                if er.mean_iou > chk['best']:
                    chk['best'] = er.mean_iou
                    chk['stale'] = 0
                else:
                    chk['stale'] += 1

                if ev.patience > 0 and chk['stale'] >= ev.patience:
                    logger.debug(f'eval IoU flat for {ev.patience} evaluations; stopping at step {step + 1}')
                    break

    return learner


def _finish(chk: Checkpoint, out_path: str):
    chk.save(out_path)
    chk.delete()


def partial_path(out_path: str) -> str:
    return out_path + '.partial'


def log_path_for(out_path: str) -> str:
    return os.path.splitext(out_path)[0] + '.ndjson'


# ------------
# -- Stages --
# ------------
def pretrain(
    reader: RecordReader,
    config: TrainConfig,
    out_path: str,
    seed: int,
    split: str = 'train',
    collector: Optional[Collector] = None,
    log_path: Optional[str] = None,
    timeout_handler: Optional[TimeoutHandler] = None,
) -> NNVectorizer:
    """SVG-to-SVG reconstruction: trains the SVG encoder with both decoders under teacher forcing."""
    _check_stage(config, 'pretrain', 'svg')
    check_corpus(config, reader)

    chk = Checkpoint(partial_path(out_path), config)
    resumed = chk.load_if_exists()
    if timeout_handler is not None:
        timeout_handler.before_cancel(chk.save)

    Learner = getLearner(config.learner)
    learner = chk.build('learner', lambda: Learner(config, collector or build_collector(), seed))

    _run(chk, learner, reader, split_indices(reader, split), log_path or log_path_for(out_path), None, resumed)
    _finish(chk, out_path)
    return learner


def joint_train(
    reader: RecordReader,
    init_path: str,
    config: TrainConfig,
    out_path: str,
    seed: int,
    split: str = 'train',
    embeddings: Optional[EmbeddingTable] = None,
    collector: Optional[Collector] = None,
    log_path: Optional[str] = None,
    timeout_handler: Optional[TimeoutHandler] = None,
) -> NNVectorizer:
    """Image-to-SVG training of the backbone, adapter and pretrained decoders."""
    _check_stage(config, 'joint', 'img')
    _check_embeddings(config, embeddings)
    check_corpus(config, reader)

    chk = Checkpoint(partial_path(out_path), config)
    resumed = chk.load_if_exists()
    if timeout_handler is not None:
        timeout_handler.before_cancel(chk.save)

    def _build():
        Learner = getLearner(config.learner)
        learner = Learner(config, collector or build_collector(), seed)
        assert isinstance(learner, ImageVectorizer)
        learner.init_from(load_learner(init_path))
        return learner

    learner = chk.build('learner', _build)

    _run(chk, learner, reader, split_indices(reader, split), log_path or log_path_for(out_path), embeddings, resumed)
    _finish(chk, out_path)
    return learner
