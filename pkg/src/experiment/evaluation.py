import logging
import numpy as np
import multiprocessing as mp

from functools import partial
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

from algorithms.BaseVectorizer import Batch, Prediction
from analysis.metrics import chamfer, iou
from analysis.raster import rasterize
from analysis.results import EvalReport, EvalRow
from data.container import EmbeddingTable, RecordReader
from representations.tokenizer import decode_icon
from svg.geometry import arclength_sample
from svg.types import EmptyGeometryError, SvgScript
from utils.iterators import chunks, unique

logger = logging.getLogger('exp')

# chamfer distance charged when exactly one side has no outline
EMPTY_CD = float(np.sqrt(2.))

Job = Tuple[str, SvgScript, SvgScript, int, int, str]


class Predictor(Protocol):
    def predict(self, batch: Batch, route: str) -> List[Prediction]: ...


def score_icon(pred: SvgScript, target: SvgScript, resolution: int = 128, samples: int = 1000) -> Tuple[float, float, str]:
    score = iou(rasterize(pred, resolution), rasterize(target, resolution))

    outlines = []
    for s in (pred, target):
        try:
            outlines.append(arclength_sample(s, samples))
        except EmptyGeometryError:
            outlines.append(None)

    a, b = outlines
    if a is None and b is None:
        return score, 0., ''
    if a is None or b is None:
        return score, EMPTY_CD, 'empty'

    return score, chamfer(a, b), ''


def _score_job(job: Job, resolution: int, samples: int) -> EvalRow:
    icon_id, pred, target, n_pred, n_target, flag = job
    score, cd, score_flag = score_icon(pred, target, resolution, samples)
    flags = unique(f for f in (flag, score_flag) if f)
    return EvalRow(icon_id, score, cd, n_pred, n_target, ','.join(flags))


def load_batch(reader: RecordReader, idxs: np.ndarray, icon_ids: Sequence[str], embeddings: Optional[EmbeddingTable] = None) -> Batch:
    batch = reader.batch(idxs)
    if embeddings is not None:
        batch['emb'] = embeddings.lookup_many([icon_ids[i] for i in idxs])
    return batch


def evaluate(
    learner: Predictor,
    reader: RecordReader,
    icon_ids: Sequence[str],
    route: str,
    resolution: int = 128,
    samples: int = 1000,
    batch_size: int = 16,
    workers: int = 1,
    embeddings: Optional[EmbeddingTable] = None,
    fingerprint: Optional[Dict[str, Any]] = None,
    split: str = 'eval',
) -> EvalReport:
    all_ids = reader.ids
    jobs: List[Job] = []
    for chunk in chunks(list(icon_ids), batch_size):
        idxs = reader.indices(chunk)
        preds = learner.predict(load_batch(reader, idxs, all_ids, embeddings), route)

        for icon_id, i, p in zip(chunk, idxs, preds):
            tokens = reader.tokens(int(i))
            jobs.append((icon_id, p.script, decode_icon(tokens), p.n_visible, int(tokens.v.sum()), p.flag))

    score = partial(_score_job, resolution=resolution, samples=samples)
    if workers <= 1 or len(jobs) < 2:
        rows = list(map(score, jobs))
    else:
        # workers start fresh instead of forking the multithreaded jax runtime
        with mp.get_context('spawn').Pool(workers) as pool:
            rows = pool.map(score, jobs, chunksize=4)

    report = EvalReport(
        route=route,
        split=split,
        resolution=resolution,
        samples=samples,
        rows=rows,
        fingerprint={
            'route': route,
            'split': split,
            'resolution': resolution,
            'samples': samples,
            'corpus': reader.header,
            **(fingerprint or {}),
        },
    )

    logger.debug(f'evaluated {len(rows)} icons: iou={report.mean_iou:.4} cd={report.mean_cd:.4}')
    return report
