import sys
import os
sys.path.append(os.getcwd() + '/src')

import random
import argparse
import subprocess
from functools import partial
from multiprocessing.pool import Pool
from typing import Dict, List

import experiment.ExperimentModel as Experiment
from experiment.tools import resultsPath

parser = argparse.ArgumentParser()
parser.add_argument('--runs', type=int, required=True)
parser.add_argument('-e', type=str, nargs='+', required=True)
parser.add_argument('--corpus', type=str, required=True)
parser.add_argument('--cpus', type=int, default=8)
parser.add_argument('--entry', type=str, default='src/main.py')
parser.add_argument('--results', type=str, default='results')
parser.add_argument('--split', type=str, default='all')
parser.add_argument('--eval-split', type=str, default='train')

def count(pre, it):
    print(pre, 0, end='\r')
    for i, x in enumerate(it):
        print(pre, i + 1, end='\r')
        yield x

    print()

def checkpointPath(exp_path: str, idx: int, run: int, base: str) -> str:
    return resultsPath(exp_path, base=base, suffix=f'/{idx}-{run}.ckpt')

def runAll(pool: Pool, cmds: List[str]):
    random.shuffle(cmds)
    res = pool.imap_unordered(partial(subprocess.run, shell=True, stdout=subprocess.PIPE), cmds, chunksize=1)
    for i, _ in enumerate(res):
        sys.stderr.write(f'\r{i+1}/{len(cmds)}')
    sys.stderr.write('\n')

if __name__ == "__main__":
    cmdline = parser.parse_args()

    pool = Pool(cmdline.cpus)

    # pretraining runs must finish before the joint runs that start from them
    phases: Dict[str, List[str]] = {'pretrain': [], 'joint': [], 'evaluate': []}
    for path in cmdline.e:
        exp = Experiment.load(path)

        jobs = [(idx, run) for idx in range(exp.numPermutations()) for run in range(cmdline.runs)]
        for idx, run in count(path, jobs):
            out = checkpointPath(path, idx, run, cmdline.results)
            common = f'--silent --seed {run} --corpus {cmdline.corpus} --config {path} -i {idx} --split {cmdline.split} --out {out}'

            if exp.stage == 'pretrain':
                if not os.path.exists(out):
                    phases['pretrain'].append(f'python {cmdline.entry} pretrain {common}')
                continue

            init = checkpointPath(os.path.join(os.path.dirname(path), f'{exp.init}.json'), idx, run, cmdline.results)
            if not os.path.exists(out):
                phases['joint'].append(f'python {cmdline.entry} train {common} --init {init}')

            report = out.rsplit('.', 1)[0] + '.tsv'
            if not os.path.exists(report):
                phases['evaluate'].append(
                    f'python {cmdline.entry} evaluate --silent --ckpt {out} --corpus {cmdline.corpus} '
                    f'--split {cmdline.eval_split} --route img --report {report}'
                )

    for phase, cmds in phases.items():
        print(phase, len(cmds))
        runAll(pool, cmds)
