import os
import sys
sys.path.append(os.getcwd() + '/src')

import glob
import numpy as np

from analysis.results import EvalReport
from experiment.tools import iterateDomains, parseCmdLineArgs, resultsPath

# (better, worse) pairs whose mean training IoU should be ordered this way
EXPECTED = [
    ('BaselineJoint', 'DiscreteJoint'),
    ('BaselineJoint', 'ParallelJoint'),
]

if __name__ == "__main__":
    path, should_save, save_type = parseCmdLineArgs()

    for domain in iterateDomains(path):
        print('-' * 25)
        print(domain.name)

        means = {}
        for exp_path in domain.exp_paths:
            name = os.path.basename(exp_path).rsplit('.', 1)[0]
            reports = sorted(glob.glob(resultsPath(exp_path, suffix='/*.tsv')))
            if not reports:
                continue

            loaded = [EvalReport.read(r) for r in reports]
            iou = np.asarray([r.mean_iou for r in loaded])
            cd = np.asarray([r.mean_cd for r in loaded])
            vis = np.asarray([r.visibility_accuracy for r in loaded])
            means[name] = iou.mean()

            print(f'{name:>18}  seeds={len(loaded)}  iou={iou.mean():.4f}±{iou.std():.4f}  cd={cd.mean():.4f}±{cd.std():.4f}  vis={vis.mean():.3f}')

        for better, worse in EXPECTED:
            if better in means and worse in means:
                verdict = 'ok' if means[better] > means[worse] else 'REVERSED'
                print(f'{better} > {worse}: {verdict}')
