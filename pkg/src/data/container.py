"""
Indexed binary record files.

Layout: 8 magic bytes, a little-endian u32 header length, a JSON header padded to a
64-byte boundary, then fixed-size records described by a numpy structured dtype.
The record count is implied by the file size so files can be appended record by record.
"""

import os
import json
import struct
import numpy as np

from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
from representations.tokenizer import TokenizedIcon, max_length

MAGIC = b'ICONREC\x00'
SCHEMA = 1
ALIGN = 64
ID_BYTES = 64

DTYPE_CODES = {
    'T': '<i2',
    'A': '<f4',
    'v': '|u1',
    'image': '|u1',
}


class ContainerFormatError(Exception):
    ...

class EmbeddingLookupError(KeyError):
    ...


@dataclass(frozen=True)
class CorpusSpec:
    n_paths: int = 8
    n_commands: int = 32
    image_size: int = 64
    channels: int = 1

    @property
    def max_len(self) -> int:
        return max_length(self.n_commands)

    def header(self) -> Dict[str, Any]:
        return {
            'kind': 'records',
            'n_paths': self.n_paths,
            'n_commands': self.n_commands,
            'max_len': self.max_len,
            'image_size': self.image_size,
            'channels': self.channels,
            'dtype_codes': DTYPE_CODES,
        }

    @classmethod
    def from_header(cls, header: Dict[str, Any]) -> 'CorpusSpec':
        spec = cls(header['n_paths'], header['n_commands'], header['image_size'], header['channels'])
        if spec.max_len != header['max_len']:
            raise ContainerFormatError(f'header max_len {header["max_len"]} does not match {spec.max_len}')
        return spec


@dataclass
class TrainRecord:
    icon_id: str
    image: np.ndarray
    tokens: TokenizedIcon


def record_dtype(spec: CorpusSpec) -> np.dtype:
    shape = (spec.n_paths, spec.max_len)
    return np.dtype([
        ('icon_id', f'S{ID_BYTES}'),
        ('T', DTYPE_CODES['T'], shape),
        ('A', DTYPE_CODES['A'], shape),
        ('v', DTYPE_CODES['v'], (spec.n_paths, )),
        ('image', DTYPE_CODES['image'], (spec.image_size, spec.image_size, spec.channels)),
    ])

def embedding_dtype(width: int) -> np.dtype:
    return np.dtype([
        ('icon_id', f'S{ID_BYTES}'),
        ('z', '<f4', (width, )),
    ])


def _encode_id(icon_id: str) -> bytes:
    raw = icon_id.encode('utf-8')
    if len(raw) > ID_BYTES:
        raise ContainerFormatError(f'icon id longer than {ID_BYTES} bytes: {icon_id!r}')
    return raw


# --------------------
# -- Generic layout --
# --------------------
def _header_bytes(header: Dict[str, Any]) -> bytes:
    body = json.dumps({'schema': SCHEMA, **header}, sort_keys=True).encode('utf-8')
    total = len(MAGIC) + 4 + len(body)
    body += b' ' * (-total % ALIGN)
    return MAGIC + struct.pack('<I', len(body)) + body


def read_header(path: str) -> Tuple[Dict[str, Any], int]:
    with open(path, 'rb') as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ContainerFormatError(f'{path} is not a record container')

        raw = f.read(4)
        if len(raw) != 4:
            raise ContainerFormatError(f'{path} has a truncated header')

        (size, ) = struct.unpack('<I', raw)
        body = f.read(size)
        if len(body) != size:
            raise ContainerFormatError(f'{path} has a truncated header')

    try:
        header = json.loads(body.decode('utf-8'))
    except ValueError as e:
        raise ContainerFormatError(f'{path} has a malformed header: {e}') from e

    if header.get('schema') != SCHEMA:
        raise ContainerFormatError(f'{path} has schema {header.get("schema")}, expected {SCHEMA}')

    return header, len(MAGIC) + 4 + size


def _map(path: str, dtype: np.dtype, offset: int) -> np.ndarray:
    size = os.path.getsize(path) - offset
    if size % dtype.itemsize:
        raise ContainerFormatError(f'{path} ends with a partial record')

    count = size // dtype.itemsize
    if count == 0:
        return np.zeros(0, dtype=dtype)

    return np.memmap(path, dtype=dtype, mode='r', offset=offset, shape=(count, ))


class _Writer:
    def __init__(self, path: str, header: Dict[str, Any], dtype: np.dtype):
        self.path = path
        self.dtype = dtype
        self.count = 0

        # records land in a temp file that replaces the target on close
        self._tmp = path + '.tmp'
        self._f = open(self._tmp, 'wb')
        self._f.write(_header_bytes(header))

    def _write(self, row: np.ndarray):
        self._f.write(row.tobytes())
        self.count += 1

    def close(self):
        if self._f.closed:
            return

        self._f.close()
        os.replace(self._tmp, self.path)

    def abort(self):
        self._f.close()
        if os.path.exists(self._tmp):
            os.remove(self._tmp)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()


# -------------
# -- Records --
# -------------
class RecordWriter(_Writer):
    def __init__(self, path: str, spec: CorpusSpec):
        super().__init__(path, spec.header(), record_dtype(spec))
        self.spec = spec

    def append(self, icon_id: str, tokens: TokenizedIcon, image: np.ndarray):
        row = np.zeros(1, dtype=self.dtype)
        row['icon_id'] = _encode_id(icon_id)
        row['T'] = tokens.T
        row['A'] = tokens.A
        row['v'] = tokens.v
        row['image'] = np.floor(np.clip(image, 0., 1.) * 255 + 0.5).reshape(row['image'].shape[1:])
        self._write(row)


class RecordReader:
    def __init__(self, path: str):
        header, offset = read_header(path)
        if header.get('kind') != 'records':
            raise ContainerFormatError(f'{path} holds {header.get("kind")}, not records')

        self.path = path
        self.header = header
        self.spec = CorpusSpec.from_header(header)
        self._data = _map(path, record_dtype(self.spec), offset)
        self._index: Optional[Dict[str, int]] = None

    def __len__(self):
        return self._data.shape[0]

    @property
    def ids(self) -> List[str]:
        return [b.decode('utf-8') for b in self._data['icon_id']]

    def index_of(self, icon_id: str) -> int:
        if self._index is None:
            self._index = {k: i for i, k in enumerate(self.ids)}
        return self._index[icon_id]

    def indices(self, icon_ids: Iterable[str]) -> np.ndarray:
        return np.asarray([self.index_of(k) for k in icon_ids], dtype=np.int64)

    def tokens(self, i: int) -> TokenizedIcon:
        row = self._data[i]
        return TokenizedIcon(
            T=row['T'].astype(np.int64),
            A=row['A'].astype(np.float64),
            v=row['v'].astype(np.int64),
        )

    def image(self, i: int) -> np.ndarray:
        return self._data[i]['image'].astype(np.float32) / 255.

    def record(self, i: int) -> TrainRecord:
        return TrainRecord(self._data[i]['icon_id'].decode('utf-8'), self.image(i), self.tokens(i))

    def batch(self, idxs: Sequence[int]) -> Dict[str, np.ndarray]:
        rows = self._data[np.asarray(idxs, dtype=np.int64)]
        return {
            'T': rows['T'].astype(np.int32),
            'A': rows['A'].astype(np.float32),
            'v': rows['v'].astype(np.int32),
            'image': rows['image'].astype(np.float32) / 255.,
        }


# ----------------------------
# -- Precomputed embeddings --
# ----------------------------
class EmbeddingWriter(_Writer):
    def __init__(self, path: str, width: int):
        super().__init__(path, {'kind': 'embeddings', 'width': width}, embedding_dtype(width))
        self.width = width

    def append(self, icon_id: str, z: np.ndarray):
        z = np.asarray(z, dtype=np.float32)
        if z.shape != (self.width, ):
            raise ContainerFormatError(f'expected a vector of width {self.width}, got {z.shape}')

        row = np.zeros(1, dtype=self.dtype)
        row['icon_id'] = _encode_id(icon_id)
        row['z'] = z
        self._write(row)


def write_embeddings(path: str, icon_ids: Sequence[str], vectors: np.ndarray):
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[0] != len(icon_ids):
        raise ContainerFormatError(f'expected one vector per id, got {vectors.shape} for {len(icon_ids)} ids')

    with EmbeddingWriter(path, vectors.shape[1]) as w:
        for icon_id, z in zip(icon_ids, vectors):
            w.append(icon_id, z)


class EmbeddingTable:
    def __init__(self, path: str):
        header, offset = read_header(path)
        if header.get('kind') != 'embeddings':
            raise ContainerFormatError(f'{path} holds {header.get("kind")}, not embeddings')

        self.path = path
        self.width: int = header['width']
        self._data = _map(path, embedding_dtype(self.width), offset)
        self._index = {b.decode('utf-8'): i for i, b in enumerate(self._data['icon_id'])}

    def __len__(self):
        return len(self._index)

    def __contains__(self, icon_id: str):
        return icon_id in self._index

    def lookup(self, icon_id: str) -> np.ndarray:
        i = self._index.get(icon_id)
        if i is None:
            raise EmbeddingLookupError(f'no precomputed embedding for {icon_id!r}')
        return np.asarray(self._data[i]['z'], dtype=np.float32)

    def lookup_many(self, icon_ids: Sequence[str]) -> np.ndarray:
        return np.stack([self.lookup(k) for k in icon_ids]) if len(icon_ids) else np.zeros((0, self.width), np.float32)
