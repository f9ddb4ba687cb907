import os
import sys
sys.path.append(os.getcwd() + '/src')

import glob
import numpy as np
import matplotlib.pyplot as plt
from PyExpPlotting.matplot import save, setDefaultConference

from experiment.tools import iterateDomains, parseCmdLineArgs, readTrainingLog, resultsPath

# makes sure figures are the right size for a two-column layout
# also sets fonts to be right size when saving
setDefaultConference('jmlr')

COLORS = {
    'Pretrain': 'black',
    'Joint': 'blue',
}

# window of the moving average over per-step losses
WINDOW = 100

def smooth(y: np.ndarray, window: int) -> np.ndarray:
    if len(y) < window:
        return y
    kernel = np.ones(window) / window
    return np.convolve(y, kernel, mode='valid')

if __name__ == "__main__":
    path, should_save, save_type = parseCmdLineArgs()

    for domain in iterateDomains(path):
        f, ax = plt.subplots()
        for exp_path in domain.exp_paths:
            name = os.path.basename(exp_path).rsplit('.', 1)[0]
            logs = sorted(glob.glob(resultsPath(exp_path, suffix='/*.ndjson')))
            if not logs:
                print(f'no training logs for {exp_path}')
                continue

            for i, log_path in enumerate(logs):
                log = readTrainingLog(log_path)
                ys = smooth(log['loss'], WINDOW)
                xs = log['step'][len(log['step']) - len(ys):]
                ax.plot(xs, ys, label=name if i == 0 else None, color=COLORS.get(name, 'grey'), linewidth=0.5)

        ax.set_yscale('log')
        ax.set_xlabel('step')
        ax.set_ylabel('training loss')
        ax.legend()
        if should_save:
            save(
                save_path=f'{path}/plots',
                plot_name=f'{domain.name}'
            )
            plt.clf()
        else:
            plt.show()
            exit()
