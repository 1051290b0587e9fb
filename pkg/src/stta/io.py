"""File formats.

Binary containers start with ``b"TTSK"``, a u16 format version and a u16 kind
tag (0 dense, 1 TT, 2 sketch pack), then ``d`` as u16 and the mode sizes as
u64. All integers and payload floats are little-endian; arrays are row-major.

* dense: ``prod(dims)`` f64 values.
* TT: ``d - 1`` u64 ranks, then each core in order.
* sketch: left ranks, right ranks (u64 each), the DRM fingerprint as a u64
  byte length plus UTF-8 JSON, then every Psi followed by every Omega.

Sparse tensors use a text format: ``d n_1 ... n_d`` on the first line, then one
``i_1 ... i_d value`` line per entry with 1-based indices.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .formats import DenseTensor, SparseTensor, TTTensor, check_shape
from .sketch import SketchPack

MAGIC = b"TTSK"
VERSION = 1
KIND_DENSE, KIND_TT, KIND_SKETCH = 0, 1, 2

_F64 = np.dtype("<f8")


class FormatError(ValueError):
    pass


def _header(kind, dims):
    return MAGIC + struct.pack("<HHH", VERSION, kind, len(dims)) + struct.pack(f"<{len(dims)}Q", *dims)


def _u64s(values):
    return struct.pack(f"<{len(values)}Q", *values)


def _f64(a):
    return np.ascontiguousarray(a, dtype=_F64).tobytes()


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def u64s(self, count):
        return self.unpack(f"<{count}Q") if count else ()

    def array(self, shape):
        count = math.prod(shape)
        return np.frombuffer(self.take(8 * count), dtype=_F64).reshape(shape).astype(np.float64)

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(f"{self.path}: {len(self.data) - self.pos} trailing bytes")


def _read_header(data, path):
    rd = _Reader(data, path)
    if rd.take(4) != MAGIC:
        raise FormatError(f"{path}: not a TTSK container")
    version, kind, d = rd.unpack("<HHH")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    dims = rd.u64s(d)
    try:
        check_shape(dims)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return rd, kind, tuple(int(n) for n in dims)


def _write(path, payload):
    path = Path(path)
    try:
        path.write_bytes(payload)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read(path):
    path = Path(path)
    try:
        return path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


# -------------------------------------------------------------- encoders


def dense_to_bytes(t: DenseTensor) -> bytes:
    return _header(KIND_DENSE, t.shape) + _f64(t.values)


def tt_to_bytes(t: TTTensor) -> bytes:
    return _header(KIND_TT, t.shape) + _u64s(t.ranks) + b"".join(_f64(c) for c in t.cores)


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    return x


def _tupled(x):
    return tuple(_tupled(v) for v in x) if isinstance(x, list) else x


def sketch_to_bytes(pack: SketchPack) -> bytes:
    fp = json.dumps(_jsonable(pack.fingerprint)).encode()
    parts = [
        _header(KIND_SKETCH, pack.dims),
        _u64s(pack.left_ranks),
        _u64s(pack.right_ranks),
        struct.pack("<Q", len(fp)),
        fp,
    ]
    parts += [_f64(p) for p in pack.psi]
    parts += [_f64(o) for o in pack.omega]
    return b"".join(parts)


def _decode(data, path="<bytes>"):
    rd, kind, dims = _read_header(data, path)
    d = len(dims)
    if kind == KIND_DENSE:
        out = DenseTensor(rd.array(dims))
    elif kind == KIND_TT:
        r = (1,) + tuple(rd.u64s(d - 1)) + (1,)
        out = TTTensor([rd.array((r[mu], dims[mu], r[mu + 1])) for mu in range(d)])
    elif kind == KIND_SKETCH:
        left = tuple(rd.u64s(d - 1))
        right = tuple(rd.u64s(d - 1))
        (n,) = rd.unpack("<Q")
        fingerprint = _tupled(json.loads(rd.take(n).decode()))
        rl = (1,) + left
        rr = right + (1,)
        psi = [rd.array((rl[mu], dims[mu], rr[mu])) for mu in range(d)]
        omega = [rd.array((left[mu], right[mu])) for mu in range(d - 1)]
        out = SketchPack(tuple(psi), tuple(omega), dims, left, right, fingerprint)
    else:
        raise FormatError(f"{path}: unknown container kind {kind}")
    rd.done()
    return out


def from_bytes(data: bytes):
    return _decode(data)


# -------------------------------------------------------------- file API


def save_dense(t: DenseTensor, path):
    _write(path, dense_to_bytes(t))


def save_tt(t: TTTensor, path):
    _write(path, tt_to_bytes(t))


def save_sketch(pack: SketchPack, path):
    _write(path, sketch_to_bytes(pack))


def save_sparse(t: SparseTensor, path):
    lines = [" ".join(str(v) for v in (t.ndim,) + tuple(t.dims))]
    for idx, val in zip(t.indices, t.values):
        lines.append(" ".join(str(int(i) + 1) for i in idx) + f" {float(val)!r}")
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _parse_sparse(text, path):
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise FormatError(f"{path}: empty sparse file")
    try:
        d = int(rows[0][0])
        dims = tuple(int(v) for v in rows[0][1:])
        if len(dims) != d:
            raise FormatError(f"{path}: header declares {d} modes but lists {len(dims)}")
        entries = []
        for k, row in enumerate(rows[1:], start=2):
            if len(row) != d + 1:
                raise FormatError(f"{path}: line {k} has {len(row)} fields, expected {d + 1}")
            entries.append((tuple(int(v) for v in row[:d]), float(row[d])))
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: {exc}") from exc
    try:
        return SparseTensor.from_entries(dims, entries)
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def load(path):
    """Read any supported file; the kind is detected from the content."""
    data = _read(path)
    if data[:4] == MAGIC:
        return _decode(data, path)
    return _parse_sparse(data.decode(), path)


def save(obj, path):
    if isinstance(obj, DenseTensor):
        save_dense(obj, path)
    elif isinstance(obj, TTTensor):
        save_tt(obj, path)
    elif isinstance(obj, SparseTensor):
        save_sparse(obj, path)
    elif isinstance(obj, SketchPack):
        save_sketch(obj, path)
    else:
        raise TypeError(f"no file format for {type(obj).__name__}")
