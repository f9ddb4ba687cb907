import sys
import glob
import json
import numpy as np
from collections import namedtuple
from typing import Dict, Generator
import PyExpUtils.utils.path as Path

NON_DOMAIN_FOLDERS = ['plots']

Domain = namedtuple(
    'NamedTuple',
    ['path', 'name', 'exp_paths', 'save_path']
)

def iterateDomains(experiment_dir: str) -> Generator[Domain, None, None]:
    domains = glob.glob(f'{experiment_dir}/*')
    domains = filter(lambda p: '.' not in Path.fileName(p) and Path.fileName(p) not in NON_DOMAIN_FOLDERS, domains)
    domains = filter(lambda p: len(glob.glob(f'{p}/*.json')) > 0, domains)

    for domain_path in sorted(domains):
        domain_name = Path.fileName(domain_path)

        exp_paths = sorted(glob.glob(f'{domain_path}/*.json'))
        save_path = f'{experiment_dir}/plots'
        yield Domain(domain_path, domain_name, exp_paths, save_path)

def parseCmdLineArgs():
    path = sys.argv[0]
    path = Path.up(path)
    save = False
    if len(sys.argv) > 1 and sys.argv[1] == 'save':
        save = True

    save_type = 'png'
    if len(sys.argv) > 2:
        save_type = sys.argv[2]

    return (path, save, save_type)

def resultsPath(exp_path: str, base: str = 'results', suffix: str = '') -> str:
    """experiments/desk/Synthetic/Pretrain.json -> results/desk/Synthetic/Pretrain<suffix>"""
    parts = Path.up(exp_path).split('/')
    study = '/'.join(parts[1:]) if parts and parts[0] == 'experiments' else '/'.join(parts)
    name = Path.fileName(exp_path).rsplit('.', 1)[0]
    return f'{base}/{study}/{name}{suffix}'

def readTrainingLog(path: str) -> Dict[str, np.ndarray]:
    """Columns of a newline-delimited JSON training log."""
    rows = []
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))

    if not rows:
        return {}

    return {k: np.asarray([r[k] for r in rows]) for k in rows[0]}
