import numpy as np
from typing import Hashable, Iterable, Iterator, List, Sequence, TypeVar

T = TypeVar('T', bound=Hashable)


def chunks(it: Sequence[T], size: int) -> Iterator[Sequence[T]]:
    for i in range(0, len(it), size):
        yield it[i:i + size]


def unique(it: Iterable[T]) -> List[T]:
    out: List[T] = []
    for x in it:
        if x not in out:
            out.append(x)
    return out


class EpochIterator:
    """Fixed-size batches drawn from a fresh seeded permutation every epoch; picklable for checkpoints."""
    def __init__(self, indices: Sequence[int], batch_size: int, seed: int):
        if len(indices) == 0:
            raise ValueError('cannot iterate over an empty index set')

        self.indices = np.asarray(indices, dtype=np.int64)
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)

        self.epoch = 0
        self._order = np.zeros(0, dtype=np.int64)
        self._pos = 0

    def next_batch(self) -> np.ndarray:
        out: List[np.ndarray] = []
        need = self.batch_size
        while need > 0:
            if self._pos >= len(self._order):
                self._order = self.rng.permutation(self.indices)
                self._pos = 0
                self.epoch += 1

            take = self._order[self._pos:self._pos + need]
            self._pos += len(take)
            need -= len(take)
            out.append(take)

        return np.concatenate(out)
