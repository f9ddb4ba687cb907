import os
import time
import pickle
import logging
from typing import Any, Callable, Dict, Optional, Sequence, Type, TypeVar, Protocol

logger = logging.getLogger(__name__)

SCHEMA = 1

T = TypeVar('T')
Builder = Callable[[], T]


class CheckpointMismatchError(Exception):
    ...


def read_checkpoint(path: str) -> Dict[str, Any]:
    with open(path, 'rb') as f:
        try:
            payload = pickle.load(f)
        except (pickle.UnpicklingError, EOFError) as e:
            raise CheckpointMismatchError(f'{path} is not a readable checkpoint: {e}') from e

    if not isinstance(payload, dict) or payload.get('schema') != SCHEMA:
        raise CheckpointMismatchError(f'{path} does not hold a schema {SCHEMA} checkpoint')

    return payload


def load_learner(path: str) -> Any:
    return read_checkpoint(path)['storage']['learner']


class Checkpoint:
    """
    Named key/value store pickled to a single file together with the run's config.
    Writes go to a temp file that atomically replaces the target.
    """
    def __init__(self, path: str, config: Any, save_every: float = -1) -> None:
        self._storage: Dict[str, Any] = {}
        self._path = path
        self._config = config

        self._last_save: Optional[float] = None
        self._save_every = save_every * 60

    @property
    def path(self) -> str:
        return self._path

    def __getitem__(self, name: str):
        return self._storage[name]

    def __setitem__(self, name: str, v: T) -> T:
        self._storage[name] = v
        return v

    def __contains__(self, name: str):
        return name in self._storage

    def build(self, name: str, builder: Builder[T]) -> T:
        if name in self._storage:
            return self._storage[name]

        self._storage[name] = builder()
        return self._storage[name]

    def initial_value(self, name: str, val: T) -> T:
        if name in self._storage:
            return self._storage[name]

        self._storage[name] = val
        return val

    def save(self, path: Optional[str] = None):
        path = path or self._path
        logger.info(f'Dumping checkpoint to {path}')

        payload = {
            'schema': SCHEMA,
            'stage': self._config.stage,
            'model_config': self._config.model.to_dict(),
            'train_config': self._config.to_dict(),
            'storage': self._storage,
        }

        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)

        tmp = path + '.tmp'
        with open(tmp, 'wb') as f:
            pickle.dump(payload, f)
        os.replace(tmp, path)

        logger.info('Finished dumping checkpoint')

    def maybe_save(self):
        if self._save_every < 0:
            return

        if self._last_save is None:
            self._last_save = time.time()

        if time.time() - self._last_save > self._save_every:
            self.save()
            self._last_save = time.time()

    def delete(self):
        if os.path.exists(self._path):
            os.remove(self._path)

    def load(self):
        payload = read_checkpoint(self._path)
        expected = self._config.model.to_dict()
        if payload['model_config'] != expected:
            raise CheckpointMismatchError(
                f'{self._path} was written for model {payload["model_config"]}, expected {expected}'
            )

        self._storage = payload['storage']

    def load_if_exists(self) -> bool:
        if not os.path.exists(self._path):
            return False

        logger.info(f'Found a checkpoint at {self._path}! Loading...')
        self.load()
        return True


class Checkpointable(Protocol):
    def __setstate__(self, state) -> None: ...
    def __getstate__(self) -> Dict[str, Any]: ...

C = TypeVar('C', bound=Type[Checkpointable])
def checkpointable(props: Sequence[str]):
    def _inner(c: C) -> C:
        o_getter = getattr(c, '__getstate__')
        o_setter = getattr(c, '__setstate__')

        def setter(self, state):
            if o_setter is not None:
                o_setter(self, state)

            for p in props:
                setattr(self, p, state[p])

        def getter(self):
            out = {}
            for p in props:
                out[p] = getattr(self, p)

            out2 = {}
            if o_getter is not None:
                out2 = o_getter(self)

            out2 |= out
            return out2

        c.__getstate__ = getter
        c.__setstate__ = setter

        return c

    return _inner
