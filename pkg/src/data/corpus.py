import os
import json
import logging
import numpy as np
import multiprocessing as mp

from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Dict, Iterable, List, Optional, Tuple

from data.container import ContainerFormatError, CorpusSpec, RecordWriter
from data.filters import filter_icon
from data.images import render_input
from data.synth import synth_icon
from representations.tokenizer import TokenizedIcon, TokenizerError, encode_script
from svg.canonical import canonicalize
from svg.types import SvgError, SvgScript

logger = logging.getLogger(__name__)

TRAIN_RATIO = 0.70


@dataclass
class SplitManifest:
    seed: int
    train_ids: List[str] = field(default_factory=list)
    eval_ids: List[str] = field(default_factory=list)
    counts: Dict[str, int] = field(default_factory=dict)
    skipped: List[Dict[str, str]] = field(default_factory=list)
    corpus: Dict[str, Any] = field(default_factory=dict)

    def ids(self, split: str) -> List[str]:
        if split == 'train':
            return self.train_ids
        if split == 'eval':
            return self.eval_ids
        raise ValueError(f'unknown split {split!r}')

    def write(self, path: str):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)
            f.write('\n')

    @classmethod
    def read(cls, path: str) -> 'SplitManifest':
        with open(path, 'r', encoding='utf-8') as f:
            return cls(**json.load(f))


def manifest_path(corpus_path: str) -> str:
    return os.path.splitext(corpus_path)[0] + '.manifest.json'


def split_ids(ids: List[str], seed: int, ratio: float = TRAIN_RATIO) -> Tuple[List[str], List[str]]:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    n_train = int(round(ratio * len(ids)))

    # both lists keep container order
    train = sorted(perm[:n_train].tolist())
    held = sorted(perm[n_train:].tolist())
    return [ids[i] for i in train], [ids[i] for i in held]


def icon_record(s: SvgScript, spec: CorpusSpec) -> Tuple[TokenizedIcon, np.ndarray]:
    tokens = encode_script(s, spec.n_paths, spec.n_commands)
    image = render_input(s, spec.image_size, spec.channels)
    return tokens, image


# -------------------
# -- SVG directory --
# -------------------
Outcome = Tuple[str, str, Optional[Tuple[TokenizedIcon, np.ndarray]]]

def _process_file(path: str, src_dir: str, spec: CorpusSpec) -> Outcome:
    icon_id = os.path.splitext(os.path.relpath(path, src_dir))[0]
    try:
        with open(path, 'r', encoding='utf-8') as f:
            script = canonicalize(f.read())

        verdict = filter_icon(script, spec.n_paths, spec.n_commands)
        if not verdict:
            return icon_id, f'rejected: {verdict.reason}', None

        if len(script) == 0:
            return icon_id, 'rejected: no geometry', None

        return icon_id, 'ok', icon_record(script, spec)

    except (OSError, UnicodeDecodeError, SvgError, TokenizerError, ValueError) as e:
        return icon_id, f'failed: {type(e).__name__}: {e}', None


def _svg_files(src_dir: str) -> List[str]:
    out = []
    for root, dirs, files in os.walk(src_dir):
        dirs.sort()
        out += [os.path.join(root, f) for f in sorted(files) if f.lower().endswith('.svg')]
    return out


def _write(outcomes: Iterable[Outcome], out_path: str, spec: CorpusSpec, seed: int) -> SplitManifest:
    accepted: List[str] = []
    skipped: List[Dict[str, str]] = []
    total = 0

    # single writer; outcomes arrive in file order
    with RecordWriter(out_path, spec) as writer:
        for icon_id, status, payload in outcomes:
            total += 1
            if payload is None:
                logger.info(f'skipping {icon_id}: {status}')
                skipped.append({'icon_id': icon_id, 'reason': status})
                continue

            try:
                writer.append(icon_id, *payload)
            except ContainerFormatError as e:
                skipped.append({'icon_id': icon_id, 'reason': f'failed: {e}'})
                continue

            accepted.append(icon_id)

    train, held = split_ids(accepted, seed)
    counts = {
        'files': total,
        'accepted': len(accepted),
        'rejected': sum(1 for s in skipped if s['reason'].startswith('rejected')),
        'failed': sum(1 for s in skipped if s['reason'].startswith('failed')),
        'train': len(train),
        'eval': len(held),
    }

    manifest = SplitManifest(
        seed=seed,
        train_ids=train,
        eval_ids=held,
        counts=counts,
        skipped=skipped,
        corpus={'path': os.path.basename(out_path), 'train_ratio': TRAIN_RATIO, **spec.header()},
    )
    manifest.write(manifest_path(out_path))
    logger.info(f'wrote {len(accepted)} records to {out_path} ({len(skipped)} skipped)')
    return manifest


def build_corpus(src_dir: str, out_path: str, seed: int, spec: CorpusSpec = CorpusSpec(), workers: int = 1) -> SplitManifest:
    files = _svg_files(src_dir)
    work = partial(_process_file, src_dir=src_dir, spec=spec)

    if workers <= 1 or len(files) < 2:
        return _write(map(work, files), out_path, spec, seed)

    with mp.get_context('spawn').Pool(workers) as pool:
        return _write(pool.imap(work, files, chunksize=8), out_path, spec, seed)


# -----------------------
# -- Synthetic corpora --
# -----------------------
def synth_corpus(count: int, seed: int, out_path: str, spec: CorpusSpec = CorpusSpec()) -> SplitManifest:
    rng = np.random.default_rng(seed)

    def _outcomes():
        for i in range(count):
            s = synth_icon(rng)
            yield f'synth-{i:06d}', 'ok', icon_record(s, spec)

    return _write(_outcomes(), out_path, spec, seed)
