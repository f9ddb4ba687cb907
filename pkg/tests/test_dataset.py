import os
import multiprocessing
import numpy as np
import pytest

from data.container import (
    ContainerFormatError, CorpusSpec, EmbeddingLookupError, EmbeddingTable, EmbeddingWriter, RecordReader, RecordWriter,
    write_embeddings,
)
from data.corpus import SplitManifest, build_corpus, manifest_path, split_ids, synth_corpus
from data.filters import filter_icon
from data.images import load_image, render_input
from data.synth import synth_icon
from representations.tokenizer import decode_icon, encode_script
from svg.types import L, M, Path, SvgScript
from PIL import Image

SPEC = CorpusSpec(n_paths=4, n_commands=8, image_size=16)


def line_path(n: int) -> Path:
    return Path((M(0, 0), ) + tuple(L(i / n, 0.5) for i in range(1, n)))


def svg_doc(body: str) -> str:
    return f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10">{body}</svg>'


# -------------
# -- Filters --
# -------------
def test_filter_boundaries():
    assert filter_icon(SvgScript((line_path(4), ) * 8))
    assert not filter_icon(SvgScript((line_path(4), ) * 9))

    assert filter_icon(SvgScript((line_path(32), )))
    verdict = filter_icon(SvgScript((line_path(33), )))
    assert not verdict
    assert verdict.reason == 'commands=33>32'


# ---------------
# -- Container --
# ---------------
def test_record_round_trip(tmp_path):
    path = str(tmp_path / 'c.rec')
    s = SvgScript((Path((M(0.1, 0.1), L(0.9, 0.1), L(0.5, 0.9), L(0.1, 0.1))), ))
    tokens = encode_script(s, SPEC.n_paths, SPEC.n_commands)
    image = render_input(s, SPEC.image_size)

    with RecordWriter(path, SPEC) as w:
        w.append('a', tokens, image)
        w.append('b', tokens, 1. - image)

    reader = RecordReader(path)
    assert len(reader) == 2
    assert reader.ids == ['a', 'b']
    assert reader.header['max_len'] == SPEC.max_len
    assert reader.spec == SPEC

    got = reader.tokens(reader.index_of('b'))
    np.testing.assert_array_equal(got.T, tokens.T)
    np.testing.assert_array_equal(got.v, tokens.v)
    np.testing.assert_allclose(got.A, tokens.A, atol=1e-7)
    np.testing.assert_array_equal(reader.image(0), image)

    batch = reader.batch([1, 0])
    assert batch['T'].shape == (2, SPEC.n_paths, SPEC.max_len)
    assert batch['image'].shape == (2, 16, 16, 1)
    np.testing.assert_array_equal(batch['image'][1], image)


def test_container_rejects_garbage(tmp_path):
    path = tmp_path / 'bad.rec'
    path.write_bytes(b'not a record file at all')
    with pytest.raises(ContainerFormatError):
        RecordReader(str(path))


def test_container_rejects_partial_records(tmp_path):
    path = str(tmp_path / 'c.rec')
    s = SvgScript((line_path(3), ))
    with RecordWriter(path, SPEC) as w:
        w.append('a', encode_script(s, 4, 8), render_input(s, 16))

    with open(path, 'ab') as f:
        f.write(b'\x00' * 5)

    with pytest.raises(ContainerFormatError):
        RecordReader(path)


def test_embedding_writer(tmp_path):
    path = str(tmp_path / 'emb.rec')
    with EmbeddingWriter(path, 2) as w:
        w.append('a', [0.5, 1.5])
        w.append('b', np.ones(2))
    assert w.count == 2
    np.testing.assert_array_equal(EmbeddingTable(path).lookup('a'), [0.5, 1.5])

    # a bad row aborts the whole file
    bad = str(tmp_path / 'bad.rec')
    with pytest.raises(ContainerFormatError):
        with EmbeddingWriter(bad, 2) as w:
            w.append('a', np.ones(3))
    assert not os.path.exists(bad)
    assert not os.path.exists(bad + '.tmp')


def test_writer_aborts_on_error(tmp_path):
    path = str(tmp_path / 'c.rec')
    with pytest.raises(RuntimeError):
        with RecordWriter(path, SPEC):
            raise RuntimeError('boom')

    assert not os.path.exists(path)
    assert not os.path.exists(path + '.tmp')


def test_embeddings(tmp_path):
    path = str(tmp_path / 'emb.rec')
    vectors = np.arange(12, dtype=np.float32).reshape(3, 4)
    write_embeddings(path, ['x', 'y', 'z'], vectors)

    table = EmbeddingTable(path)
    assert len(table) == 3
    assert 'y' in table
    np.testing.assert_array_equal(table.lookup_many(['z', 'x']), vectors[[2, 0]])

    with pytest.raises(EmbeddingLookupError):
        table.lookup('w')

    # kinds are not interchangeable
    with pytest.raises(ContainerFormatError):
        RecordReader(path)


# ------------
# -- Images --
# ------------
def test_render_input_convention():
    s = SvgScript((Path((M(0.25, 0.25), L(0.75, 0.25), L(0.75, 0.75), L(0.25, 0.75), L(0.25, 0.25))), ))
    img = render_input(s, 8, channels=3)
    assert img.shape == (8, 8, 3)
    assert img[0, 0, 0] == 1.
    assert img[4, 4, 0] == 0.


def test_load_image_resizes(tmp_path):
    path = str(tmp_path / 'glyph.png')
    Image.fromarray(np.full((32, 32), 255, dtype=np.uint8)).save(path)

    img = load_image(path, 16)
    assert img.shape == (16, 16, 1)
    np.testing.assert_allclose(img, 1.)


# ------------
# -- Corpus --
# ------------
def test_split_ids():
    ids = [f'i{k}' for k in range(10)]
    train, held = split_ids(ids, seed=0)
    assert len(train) == 7
    assert sorted(train + held) == sorted(ids)
    assert train == sorted(train, key=ids.index)
    assert split_ids(ids, seed=0) == (train, held)


def test_synth_corpus_is_deterministic(tmp_path):
    a = str(tmp_path / 'a.rec')
    b = str(tmp_path / 'b.rec')
    synth_corpus(20, seed=5, out_path=a, spec=SPEC)
    synth_corpus(20, seed=5, out_path=b, spec=SPEC)

    with open(a, 'rb') as fa, open(b, 'rb') as fb:
        assert fa.read() == fb.read()

    manifest = SplitManifest.read(manifest_path(a))
    assert manifest.counts['accepted'] == 20
    assert len(manifest.ids('train')) == 14
    assert len(manifest.ids('eval')) == 6


def test_build_corpus(tmp_path):
    src = tmp_path / 'icons'
    (src / 'nested').mkdir(parents=True)
    (src / 'square.svg').write_text(svg_doc('<rect x="2" y="2" width="6" height="6"/>'))
    (src / 'nested' / 'dot.svg').write_text(svg_doc('<circle cx="5" cy="5" r="3"/>'))
    (src / 'crowded.svg').write_text(svg_doc(''.join(f'<rect x="{i}" y="0" width="1" height="1"/>' for i in range(9))))
    (src / 'broken.svg').write_text('<svg><path d="M 0 0 L')
    (src / 'blank.svg').write_text(svg_doc(''))

    out = str(tmp_path / 'corpus.rec')
    manifest = build_corpus(str(src), out, seed=0, spec=SPEC)

    assert manifest.counts['files'] == 5
    assert manifest.counts['accepted'] == 2
    assert manifest.counts['rejected'] == 2
    assert manifest.counts['failed'] == 1

    reader = RecordReader(out)
    assert sorted(reader.ids) == ['nested/dot', 'square']

    s = decode_icon(reader.tokens(reader.index_of('square')))
    np.testing.assert_allclose(s.paths[0].commands[0].args, (0.2, 0.2), atol=1e-7)

    reasons = {r['icon_id']: r['reason'] for r in manifest.skipped}
    assert reasons['crowded'].startswith('rejected: paths=9')
    assert reasons['blank'] == 'rejected: no geometry'
    assert reasons['broken'].startswith('failed')


def test_build_corpus_pooled(tmp_path, monkeypatch):
    src = tmp_path / 'icons'
    src.mkdir()
    for i in range(6):
        (src / f'r{i}.svg').write_text(svg_doc(f'<rect x="1" y="{i}" width="{i + 2}" height="3"/>'))

    contexts = []
    get_context = multiprocessing.get_context

    def recording(method=None):
        contexts.append(method)
        return get_context(method)

    monkeypatch.setattr(multiprocessing, 'get_context', recording)

    serial = str(tmp_path / 'serial.rec')
    pooled = str(tmp_path / 'pooled.rec')
    build_corpus(str(src), serial, seed=0, spec=SPEC)
    build_corpus(str(src), pooled, seed=0, spec=SPEC, workers=2)
    assert 'spawn' in contexts

    with open(serial, 'rb') as a, open(pooled, 'rb') as b:
        assert a.read() == b.read()


# ---------------
# -- Synthetic --
# ---------------
def test_synth_shapes():
    rng = np.random.default_rng(4)
    seen = set()
    for _ in range(300):
        s = synth_icon(rng)
        assert 1 <= len(s) <= 4
        assert all(0.1 <= a <= 0.9 for a in s.coordinates())

        for p in s:
            kinds = ''.join(c.kind.value for c in p)
            if kinds == 'MCCCC':
                seen.add('circle')
            elif kinds == 'MLLLL' and p.commands[0].end == p.commands[-1].end:
                seen.add('rect')
            else:
                assert kinds[0] == 'M' and 3 <= len(kinds) <= 7 and set(kinds[1:]) == {'L'}
                seen.add('polyline')

    assert seen == {'circle', 'rect', 'polyline'}
