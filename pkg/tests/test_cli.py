import json
import numpy as np
import pytest
from PIL import Image

import main
from data.container import RecordReader
from experiment.tools import readTrainingLog

MODEL = {
    'd_model': 16,
    'd_ff': 32,
    'n_heads': 2,
    'structure_layers': 1,
    'path_layers': 1,
    'encoder_layers': 1,
    'backbone': 'patch',
    'backbone_layers': 1,
    'image_size': 16,
    'patch': 8,
    'n_paths': 8,
    'n_commands': 32,
    'dropout': 0.,
}

SQUARE = '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 8 8"><rect x="2" y="2" width="4" height="4"/></svg>'


def write_experiment(root, name: str, stage: str, learner: str, **extra) -> str:
    d = {
        'learner': learner,
        'stage': stage,
        'total_steps': 2,
        'checkpoint_every': 0,
        'log_every': 1,
        'metaParameters': {
            'batch': 2,
            'optimizer': {'lr': 1e-3, 'warmup_steps': 0},
            'model': MODEL,
            'eval': {'every': 0, 'resolution': 32, 'samples': 64},
        },
        **extra,
    }

    folder = root / 'experiments' / 'cli'
    folder.mkdir(parents=True, exist_ok=True)
    path = folder / f'{name}.json'
    path.write_text(json.dumps(d))
    return str(path)


def run(*argv) -> int:
    return main.run([*argv, '--silent'])


@pytest.fixture(scope='module')
def cli_corpus(tmp_path_factory):
    path = str(tmp_path_factory.mktemp('cli') / 'corpus.rec')
    assert run('synth', '--count', '10', '--out', path, '--image-size', '16', '--seed', '2') == main.EXIT_OK
    return path


# ----------------
# -- Exit codes --
# ----------------
def test_usage_errors():
    assert main.run(['pretrain']) == main.EXIT_USAGE
    assert main.run(['transcode', '--silent']) == main.EXIT_USAGE
    assert main.run([]) == main.EXIT_USAGE


def test_data_errors(tmp_path):
    out = str(tmp_path / 'x.pgm')
    assert run('render', '--svg', str(tmp_path / 'missing.svg'), '--size', '16', '--out', out) == main.EXIT_DATA

    bad = tmp_path / 'bad.svg'
    bad.write_text('<svg><path d="M 0 0 L')
    assert run('render', '--svg', str(bad), '--size', '16', '--out', out) == main.EXIT_DATA

    assert run('preprocess', '--src', str(tmp_path / 'nowhere'), '--out', str(tmp_path / 'c.rec')) == main.EXIT_DATA


# --------------
# -- Commands --
# --------------
def test_synth_is_reproducible(tmp_path, cli_corpus):
    again = str(tmp_path / 'again.rec')
    assert run('synth', '--count', '10', '--out', again, '--image-size', '16', '--seed', '2') == main.EXIT_OK

    with open(cli_corpus, 'rb') as a, open(again, 'rb') as b:
        assert a.read() == b.read()

    reader = RecordReader(again)
    assert len(reader) == 10
    assert reader.spec.image_size == 16


def test_preprocess(tmp_path):
    src = tmp_path / 'icons'
    src.mkdir()
    (src / 'square.svg').write_text(SQUARE)
    (src / 'broken.svg').write_text('<svg><path d="M 0 0 L')

    out = str(tmp_path / 'corpus.rec')
    assert run('preprocess', '--src', str(src), '--out', out, '--image-size', '16') == main.EXIT_OK
    assert RecordReader(out).ids == ['square']


def test_render(tmp_path):
    svg = tmp_path / 'square.svg'
    svg.write_text(SQUARE)

    out = str(tmp_path / 'square.pgm')
    assert run('render', '--svg', str(svg), '--size', '16', '--out', out) == main.EXIT_OK

    with Image.open(out) as im:
        data = np.asarray(im)
    assert data.shape == (16, 16)
    assert data[0, 0] == 255
    assert data[8, 8] == 0


# --------------
# -- Pipeline --
# --------------
def test_pipeline(tmp_path, cli_corpus):
    pre_cfg = write_experiment(tmp_path, 'Pretrain', 'pretrain', 'SVGReconstruction')
    joint_cfg = write_experiment(tmp_path, 'Joint', 'joint', 'ImageVectorizer', init='Pretrain')

    pre = str(tmp_path / 'pre.ckpt')
    assert run('pretrain', '--corpus', cli_corpus, '--config', pre_cfg, '--out', pre) == main.EXIT_OK
    assert list(readTrainingLog(str(tmp_path / 'pre.ndjson'))['step']) == [0, 1]

    # a pretraining checkpoint has no image route
    png = str(tmp_path / 'glyph.png')
    image = RecordReader(cli_corpus).image(0)
    Image.fromarray((image[..., 0] * 255).astype(np.uint8)).save(png)
    assert run('vectorize', '--ckpt', pre, '--image', png, '--out', str(tmp_path / 'x.svg')) == main.EXIT_RUNTIME

    joint = str(tmp_path / 'joint.ckpt')
    missing = str(tmp_path / 'nothing.ckpt')
    assert run('train', '--corpus', cli_corpus, '--config', joint_cfg, '--out', joint, '--init', missing) == main.EXIT_DATA
    assert run('train', '--corpus', cli_corpus, '--config', joint_cfg, '--out', joint, '--init', pre) == main.EXIT_OK

    svg = tmp_path / 'glyph.svg'
    assert run('vectorize', '--ckpt', joint, '--image', png, '--out', str(svg)) == main.EXIT_OK
    assert svg.read_text().startswith('<svg')

    report = str(tmp_path / 'report.tsv')
    code = run(
        'evaluate', '--ckpt', joint, '--corpus', cli_corpus, '--split', 'train', '--report', report,
        '--limit', '3', '--resolution', '32', '--samples', '64',
    )
    assert code == main.EXIT_OK
    with open(report + '.json') as f:
        summary = json.load(f)['summary']
    assert summary['icons'] == 3
    assert summary['route'] == 'img'


def test_corpus_shape_mismatch(tmp_path, cli_corpus):
    d = dict(MODEL, n_paths=4, n_commands=8)
    cfg = write_experiment(tmp_path, 'Small', 'pretrain', 'SVGReconstruction')
    with open(cfg) as f:
        exp = json.load(f)
    exp['metaParameters']['model'] = d
    with open(cfg, 'w') as f:
        json.dump(exp, f)

    assert run('pretrain', '--corpus', cli_corpus, '--config', cfg, '--out', str(tmp_path / 'p.ckpt')) == main.EXIT_RUNTIME
