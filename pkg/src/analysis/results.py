import json
import numpy as np

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List


@dataclass
class EvalRow:
    icon_id: str
    iou: float
    cd: float
    n_pred: int
    n_target: int
    # empty prediction or a lenient-decode repair
    flag: str = ''

    @property
    def count_match(self) -> bool:
        return self.n_pred == self.n_target


@dataclass
class EvalReport:
    route: str
    split: str
    resolution: int
    samples: int
    rows: List[EvalRow] = field(default_factory=list)
    fingerprint: Dict[str, Any] = field(default_factory=dict)

    @property
    def mean_iou(self) -> float:
        return float(np.mean([r.iou for r in self.rows])) if self.rows else 0.

    @property
    def mean_cd(self) -> float:
        return float(np.mean([r.cd for r in self.rows])) if self.rows else 0.

    @property
    def visibility_accuracy(self) -> float:
        return float(np.mean([r.count_match for r in self.rows])) if self.rows else 0.

    def summary(self) -> Dict[str, Any]:
        return {
            'route': self.route,
            'split': self.split,
            'resolution': self.resolution,
            'samples': self.samples,
            'icons': len(self.rows),
            'mean_iou': self.mean_iou,
            'mean_cd': self.mean_cd,
            'visibility_accuracy': self.visibility_accuracy,
            'flagged': sum(1 for r in self.rows if r.flag),
        }

    def to_tsv(self) -> str:
        lines = [f'{r.icon_id}\t{r.iou!r}\t{r.cd!r}' for r in self.rows]
        lines.append(f'mean\t{self.mean_iou!r}\t{self.mean_cd!r}')
        return '\n'.join(lines) + '\n'

    def write(self, path: str):
        """Writes the tab-separated report and a `.json` sidecar with the summary, flags and fingerprint."""
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_tsv())

        sidecar = {
            'summary': self.summary(),
            'fingerprint': self.fingerprint,
            'rows': [asdict(r) for r in self.rows],
        }
        with open(path + '.json', 'w', encoding='utf-8') as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)

    @classmethod
    def read(cls, path: str) -> 'EvalReport':
        with open(path + '.json', 'r', encoding='utf-8') as f:
            d = json.load(f)

        s = d['summary']
        return cls(
            route=s['route'],
            split=s['split'],
            resolution=s['resolution'],
            samples=s['samples'],
            rows=[EvalRow(**r) for r in d['rows']],
            fingerprint=d['fingerprint'],
        )
