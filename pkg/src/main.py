import os
import sys
sys.path.append(os.getcwd())
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import logging
import argparse
from typing import Callable, Dict, List, Optional

logger = logging.getLogger('exp')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

NOISY_LOGGERS = ('absl', 'jax', 'numba', 'filelock', 'PIL')
PACKAGES = ('svg', 'representations', 'analysis', 'data', 'algorithms', 'experiment', 'utils')


class UsageError(Exception):
    ...


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f'{self.prog}: error: {message}\n')
        raise UsageError(message)


# ------------------
# -- Command Args --
# ------------------
def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--workers', type=int, default=1)
    common.add_argument('--seed', type=int, default=None)
    common.add_argument('--silent', action='store_true', default=False)
    common.add_argument('--gpu', action='store_true', default=False)

    parser = _Parser(prog='main.py', description='icon vectorization pipeline')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('preprocess', parents=[common])
    p.add_argument('--src', type=str, required=True)
    p.add_argument('--out', type=str, required=True)
    p.add_argument('--image-size', type=int, default=64)
    p.add_argument('--channels', type=int, default=1)

    p = sub.add_parser('synth', parents=[common])
    p.add_argument('--count', type=int, required=True)
    p.add_argument('--out', type=str, required=True)
    p.add_argument('--image-size', type=int, default=64)
    p.add_argument('--channels', type=int, default=1)

    for name in ('pretrain', 'train'):
        p = sub.add_parser(name, parents=[common])
        p.add_argument('--corpus', type=str, required=True)
        p.add_argument('--config', type=str, required=True)
        p.add_argument('--out', type=str, required=True)
        p.add_argument('-i', '--idx', type=int, default=0)
        p.add_argument('--split', choices=('train', 'eval', 'all'), default='train')
        p.add_argument('--log', type=str, default=None)
        p.add_argument('--results', type=str, default=None)
        if name == 'train':
            p.add_argument('--init', type=str, required=True)
            p.add_argument('--embeddings', type=str, default=None)

    p = sub.add_parser('vectorize', parents=[common])
    p.add_argument('--ckpt', type=str, required=True)
    p.add_argument('--image', type=str, required=True)
    p.add_argument('--out', type=str, required=True)

    p = sub.add_parser('evaluate', parents=[common])
    p.add_argument('--ckpt', type=str, required=True)
    p.add_argument('--corpus', type=str, required=True)
    p.add_argument('--split', choices=('train', 'eval'), required=True)
    p.add_argument('--report', type=str, required=True)
    p.add_argument('--route', choices=('svg', 'img'), default=None)
    p.add_argument('--resolution', type=int, default=128)
    p.add_argument('--samples', type=int, default=1000)
    p.add_argument('--limit', type=int, default=0)
    p.add_argument('--embeddings', type=str, default=None)

    p = sub.add_parser('render', parents=[common])
    p.add_argument('--svg', type=str, required=True)
    p.add_argument('--size', type=int, required=True)
    p.add_argument('--out', type=str, required=True)

    return parser


# ---------------------------
# -- Library Configuration --
# ---------------------------
def configure(args: argparse.Namespace):
    logging.basicConfig(level=logging.ERROR, stream=sys.stderr)
    for name in NOISY_LOGGERS:
        logging.getLogger(name).setLevel(logging.ERROR)

    if not args.silent:
        logger.setLevel(logging.DEBUG)
        for name in PACKAGES:
            logging.getLogger(name).setLevel(logging.INFO)
    else:
        logger.setLevel(logging.ERROR)
        for name in PACKAGES:
            logging.getLogger(name).setLevel(logging.WARNING)

    import jax
    jax.config.update('jax_platform_name', 'gpu' if args.gpu else 'cpu')


# --------------
# -- Commands --
# --------------
def _seed(args: argparse.Namespace, default: int = 0) -> int:
    return args.seed if args.seed is not None else default


def cmd_preprocess(args) -> int:
    from data.container import CorpusSpec
    from data.corpus import build_corpus

    if not os.path.isdir(args.src):
        raise FileNotFoundError(f'no such directory: {args.src}')

    spec = CorpusSpec(image_size=args.image_size, channels=args.channels)
    manifest = build_corpus(args.src, args.out, _seed(args), spec, workers=args.workers)
    logger.debug(f'counts: {manifest.counts}')
    return EXIT_OK


def cmd_synth(args) -> int:
    from data.container import CorpusSpec
    from data.corpus import synth_corpus

    spec = CorpusSpec(image_size=args.image_size, channels=args.channels)
    manifest = synth_corpus(args.count, _seed(args), args.out, spec)
    logger.debug(f'counts: {manifest.counts}')
    return EXIT_OK


def _train(args, stage: str) -> int:
    from PyExpUtils.results.sqlite import saveCollector
    from data.container import EmbeddingTable, RecordReader
    from experiment import ExperimentModel
    from experiment.training import build_collector, joint_train, pretrain
    from utils.preempt import TimeoutHandler

    exp = ExperimentModel.load(args.config)
    config = exp.train_config(args.idx)
    seed = _seed(args, exp.getRun(args.idx))

    reader = RecordReader(args.corpus)
    collector = build_collector(args.idx)
    timeout_handler = TimeoutHandler()

    if stage == 'pretrain':
        pretrain(reader, config, args.out, seed, args.split, collector, args.log, timeout_handler)
    else:
        embeddings = EmbeddingTable(args.embeddings) if args.embeddings else None
        joint_train(reader, args.init, config, args.out, seed, args.split, embeddings, collector, args.log, timeout_handler)

    collector.reset()
    if args.results is not None:
        saveCollector(exp, collector, base=args.results)

    return EXIT_OK


def cmd_pretrain(args) -> int:
    return _train(args, 'pretrain')


def cmd_train(args) -> int:
    return _train(args, 'joint')


def cmd_vectorize(args) -> int:
    from algorithms.nn.ImageVectorizer import ImageVectorizer
    from data.images import load_image
    from representations.networks import ConfigError
    from svg.canonical import serialize
    from utils.checkpoint import load_learner

    learner = load_learner(args.ckpt)
    if not isinstance(learner, ImageVectorizer):
        raise ConfigError(f'{args.ckpt} holds a {type(learner).__name__}, which has no image route')

    c = learner.model
    image = load_image(args.image, c.image_size, c.channels)
    pred = learner.vectorize(image)
    if pred.flag:
        logger.warning(f'vectorize: {pred.flag}')

    with open(args.out, 'w', encoding='utf-8') as f:
        f.write(serialize(pred.script))

    logger.debug(f'wrote {len(pred.script)} paths to {args.out}')
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from data.container import EmbeddingTable, RecordReader
    from experiment.evaluation import evaluate
    from experiment.training import check_corpus, split_indices
    from utils.checkpoint import load_learner

    learner = load_learner(args.ckpt)
    reader = RecordReader(args.corpus)
    route = args.route or learner.train_route
    check_corpus(learner.config, reader)

    ids = reader.ids
    icon_ids = [ids[i] for i in split_indices(reader, args.split)]
    if args.limit > 0:
        icon_ids = icon_ids[:args.limit]

    embeddings = EmbeddingTable(args.embeddings) if args.embeddings else None
    report = evaluate(
        learner, reader, icon_ids, route,
        resolution=args.resolution,
        samples=args.samples,
        batch_size=learner.config.batch_size,
        workers=args.workers,
        embeddings=embeddings,
        fingerprint={'checkpoint': os.path.basename(args.ckpt), 'config': learner.config.to_dict()},
        split=args.split,
    )
    report.write(args.report)

    s = report.summary()
    logger.debug(f'{s["icons"]} icons  iou={s["mean_iou"]:.4}  cd={s["mean_cd"]:.4}  vis={s["visibility_accuracy"]:.3}')
    return EXIT_OK


def cmd_render(args) -> int:
    from analysis.raster import write_pgm
    from data.images import render_input
    from svg.canonical import canonicalize

    with open(args.svg, 'r', encoding='utf-8') as f:
        script = canonicalize(f.read())

    # same convention as model inputs: black glyph on white
    write_pgm(render_input(script, args.size), args.out)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    'preprocess': cmd_preprocess,
    'synth': cmd_synth,
    'pretrain': cmd_pretrain,
    'train': cmd_train,
    'vectorize': cmd_vectorize,
    'evaluate': cmd_evaluate,
    'render': cmd_render,
}


def _data_errors():
    from data.container import ContainerFormatError, EmbeddingLookupError
    from representations.tokenizer import TokenizerError
    from svg.types import ShapeError, SvgError

    from PIL import UnidentifiedImageError
    from json import JSONDecodeError

    return (OSError, UnicodeDecodeError, JSONDecodeError, UnidentifiedImageError, SvgError, TokenizerError, ContainerFormatError, EmbeddingLookupError, ShapeError)


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    configure(args)

    try:
        return COMMANDS[args.command](args)
    except _data_errors() as e:
        logger.error(f'{args.command}: {type(e).__name__}: {e}')
        return EXIT_DATA
    except Exception as e:
        logger.error(f'{args.command}: {type(e).__name__}: {e}')
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(run())
