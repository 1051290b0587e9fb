"""
Tensor representations used throughout the package.

Every tensor is indexed row-major with the first index varying slowest. The
public API and the file formats use 1-based multi-indices; arrays are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

#: Default upper bound on the number of entries ``to_dense`` will allocate.
MATERIALIZATION_CAP = 10**7

_INDEX_LIMIT = np.iinfo(np.int64).max


class MaterializationError(ValueError):
    """Raised when a dense array would exceed the materialization cap."""


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def check_shape(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(n) for n in dims)
    if len(dims) < 2:
        raise ValueError(f"need at least 2 modes, got shape {dims}")
    if any(n < 1 for n in dims):
        raise ValueError(f"mode sizes must be positive, got {dims}")
    if math.prod(dims) > _INDEX_LIMIT:
        raise ValueError(f"shape {dims} overflows the 64-bit index range")
    return dims


def check_ranks(ranks: Sequence[int], d: int) -> tuple[int, ...]:
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != d - 1:
        raise ValueError(f"expected {d - 1} ranks, got {len(ranks)}")
    if any(r < 1 for r in ranks):
        raise ValueError(f"ranks must be positive, got {ranks}")
    return ranks


def _check_cap(size: int, cap: int | None):
    cap = MATERIALIZATION_CAP if cap is None else cap
    if size > cap:
        raise MaterializationError(f"{size} entries exceed materialization cap {cap}")


@dataclass(frozen=True, eq=False)
class DenseTensor:
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        check_shape(values.shape)
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def __neg__(self):
        return DenseTensor(-self.values)

    def scale(self, alpha: float) -> "DenseTensor":
        return DenseTensor(alpha * self.values)


@dataclass(frozen=True, eq=False)
class TTTensor:
    """Tensor train with cores ``C[mu]`` of shape ``(r_{mu-1}, n_mu, r_mu)``."""

    cores: tuple

    def __post_init__(self):
        cores = tuple(_frozen(c) for c in self.cores)
        if len(cores) < 2:
            raise ValueError("a TT needs at least 2 cores")
        if any(c.ndim != 3 for c in cores):
            raise ValueError("TT cores must be order-3 arrays")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary TT ranks must be 1")
        for a, b in zip(cores[:-1], cores[1:]):
            if a.shape[2] != b.shape[0]:
                raise ValueError(f"rank mismatch between cores: {a.shape} and {b.shape}")
        check_shape([c.shape[1] for c in cores])
        object.__setattr__(self, "cores", cores)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores[:-1])

    def scale(self, alpha: float) -> "TTTensor":
        return TTTensor((alpha * self.cores[0],) + self.cores[1:])

    def __neg__(self):
        return self.scale(-1.0)


@dataclass(frozen=True, eq=False)
class SparseTensor:
    """COO tensor. ``indices`` is an ``(N, d)`` array of 0-based multi-indices."""

    dims: tuple
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dims = check_shape(self.dims)
        idx = np.array(self.indices, dtype=np.int64, copy=True).reshape(-1, len(dims))
        vals = _frozen(np.ravel(self.values))
        if idx.shape[0] != vals.shape[0]:
            raise ValueError("index and value counts differ")
        if idx.size and (idx.min() < 0 or np.any(idx >= np.array(dims))):
            raise IndexError("sparse index out of bounds")
        if idx.shape[0] > 1:
            uniq = np.unique(np.ravel_multi_index(idx.T, dims))
            if uniq.size != idx.shape[0]:
                raise ValueError("duplicate multi-indices in sparse tensor")
        idx.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_entries(cls, dims, entries):
        """Build from ``(multi_index, value)`` pairs with 1-based indices."""
        entries = list(entries)
        d = len(dims)
        idx = np.array([e[0] for e in entries], dtype=np.int64).reshape(-1, d) - 1
        vals = np.array([e[1] for e in entries], dtype=np.float64)
        return cls(tuple(dims), idx, vals)

    @property
    def shape(self):
        return self.dims

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def nnz(self):
        return self.values.shape[0]

    def scale(self, alpha):
        return SparseTensor(self.dims, self.indices, alpha * self.values)


@dataclass(frozen=True, eq=False)
class CPTensor:
    """Sum of ``N`` rank-one terms; factor ``mu`` has shape ``(N, n_mu)``."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(_frozen(f) for f in self.factors)
        if any(f.ndim != 2 for f in factors):
            raise ValueError("CP factors must be matrices")
        if len({f.shape[0] for f in factors}) != 1:
            raise ValueError("CP factors must share the term count")
        check_shape([f.shape[1] for f in factors])
        object.__setattr__(self, "factors", factors)

    @property
    def shape(self):
        return tuple(f.shape[1] for f in self.factors)

    @property
    def ndim(self):
        return len(self.factors)

    @property
    def n_terms(self):
        return self.factors[0].shape[0]

    def scale(self, alpha):
        return CPTensor((alpha * self.factors[0],) + self.factors[1:])


@dataclass(frozen=True, eq=False)
class TuckerTensor:
    """Core of shape ``(s_1, ..., s_d)`` times factors ``U_mu`` of shape ``(n_mu, s_mu)``."""

    core: np.ndarray
    factors: tuple

    def __post_init__(self):
        core = _frozen(self.core)
        factors = tuple(_frozen(f) for f in self.factors)
        if core.ndim != len(factors):
            raise ValueError("core order and factor count differ")
        for s, f in zip(core.shape, factors):
            if f.ndim != 2 or f.shape[1] != s:
                raise ValueError("factor column counts must match the core shape")
        check_shape([f.shape[0] for f in factors])
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "factors", factors)

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ndim(self):
        return len(self.factors)

    def scale(self, alpha):
        return TuckerTensor(alpha * self.core, self.factors)


@dataclass(frozen=True, eq=False)
class SumTensor:
    """Lazy ordered sum. Nested sums are flattened on construction."""

    members: tuple

    def __post_init__(self):
        flat = []
        for m in self.members:
            if isinstance(m, SumTensor):
                flat.extend(m.members)
            else:
                flat.append(m)
        if not flat:
            raise ValueError("empty sum")
        shapes = {tuple(m.shape) for m in flat}
        if len(shapes) != 1:
            raise ValueError(f"sum members disagree on shape: {sorted(shapes)}")
        object.__setattr__(self, "members", tuple(flat))

    @property
    def shape(self):
        return tuple(self.members[0].shape)

    @property
    def ndim(self):
        return len(self.shape)

    def scale(self, alpha):
        return SumTensor(tuple(m.scale(alpha) for m in self.members))


StructuredTensor = Union[DenseTensor, SparseTensor, TTTensor, CPTensor, TuckerTensor, SumTensor]


def unfold(t, mu: int) -> np.ndarray:
    """Matricization merging the first ``mu`` modes into rows."""
    values = t.values if isinstance(t, DenseTensor) else np.asarray(t)
    d = values.ndim
    if not 1 <= mu <= d - 1:
        raise ValueError(f"unfolding index {mu} outside 1..{d - 1}")
    return values.reshape(math.prod(values.shape[:mu]), -1)


def tt_entry(t: TTTensor, idx: Sequence[int]) -> float:
    """Entry at a 1-based multi-index via the matrix-product chain."""
    if len(idx) != t.ndim:
        raise IndexError(f"expected {t.ndim} indices, got {len(idx)}")
    v = np.ones((1,))
    for core, i in zip(t.cores, idx):
        if not 1 <= i <= core.shape[1]:
            raise IndexError(f"index {tuple(idx)} out of range for shape {t.shape}")
        v = v @ core[:, i - 1, :]
    return float(v[0])


def tt_full(cores, cap: int | None = None) -> np.ndarray:
    dims = [c.shape[1] for c in cores]
    _check_cap(math.prod(dims), cap)
    full = cores[0].reshape(cores[0].shape[1], -1)
    for core in cores[1:]:
        full = (full @ core.reshape(core.shape[0], -1)).reshape(-1, core.shape[2])
    return full.reshape(dims)


def to_dense(t, cap: int | None = None) -> DenseTensor:
    return DenseTensor(_dense_array(t, cap))


def _dense_array(t, cap=None) -> np.ndarray:
    _check_cap(math.prod(t.shape), cap)
    if isinstance(t, DenseTensor):
        return np.array(t.values)
    if isinstance(t, TTTensor):
        return tt_full(t.cores, cap)
    if isinstance(t, SparseTensor):
        out = np.zeros(t.dims)
        out[tuple(t.indices.T)] = t.values
        return out
    if isinstance(t, CPTensor):
        # accumulate the Khatri-Rao product one mode at a time
        acc = t.factors[0]
        for f in t.factors[1:]:
            acc = (acc[:, :, None] * f[:, None, :]).reshape(acc.shape[0], -1)
        return acc.sum(axis=0).reshape(t.shape)
    if isinstance(t, TuckerTensor):
        out = np.array(t.core)
        for mu, u in enumerate(t.factors):
            out = np.moveaxis(np.tensordot(u, out, axes=(1, mu)), 0, mu)
        return out
    if isinstance(t, SumTensor):
        out = _dense_array(t.members[0], cap)
        for m in t.members[1:]:
            out = out + _dense_array(m, cap)
        return out
    raise TypeError(f"unsupported tensor type {type(t).__name__}")


def tt_inner(a: TTTensor, b: TTTensor) -> float:
    """Sum of elementwise products of two TTs by a left-to-right contraction."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    env = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        env = np.einsum("ab,aic,bid->cd", env, ca, cb, optimize=True)
    return float(env[0, 0])


def tt_add(a: TTTensor, b: TTTensor) -> TTTensor:
    """Exact sum as a TT whose ranks are the sums of the input ranks."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    d = a.ndim
    cores = []
    for mu, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        if mu == 0:
            cores.append(np.concatenate([ca, cb], axis=2))
        elif mu == d - 1:
            cores.append(np.concatenate([ca, cb], axis=0))
        else:
            ra0, n, ra1 = ca.shape
            rb0, _, rb1 = cb.shape
            c = np.zeros((ra0 + rb0, n, ra1 + rb1))
            c[:ra0, :, :ra1] = ca
            c[ra0:, :, ra1:] = cb
            cores.append(c)
    return TTTensor(cores)


def tt_norm(t: TTTensor) -> float:
    """Frobenius norm via a QR sweep, stable when the TT holds a small difference."""
    r = np.ones((1, 1))
    for core in t.cores:
        m = np.tensordot(r, core, axes=(1, 0))
        m = m.reshape(-1, core.shape[2])
        _, r = np.linalg.qr(m, mode="reduced")
    return float(np.linalg.norm(r))


def norm(t, cap: int | None = None) -> float:
    if isinstance(t, TTTensor):
        return tt_norm(t)
    if isinstance(t, SumTensor) and all(isinstance(m, TTTensor) for m in t.members):
        return tt_norm(_sum_to_tt(t))
    return float(np.linalg.norm(_dense_array(t, cap)))


def _sum_to_tt(t: SumTensor) -> TTTensor:
    acc = t.members[0]
    for m in t.members[1:]:
        acc = tt_add(acc, m)
    return acc


def rel_error(t, approx: TTTensor, denominator: str = "input", cap: int | None = None) -> float:
    """Relative Frobenius error ``||t - approx|| / ||t||``.

    ``denominator="approx"`` divides by ``||approx||`` instead. TT inputs and
    sums of TTs never materialize; everything else goes through ``to_dense``.
    """
    if tuple(t.shape) != tuple(approx.shape):
        raise ValueError(f"shape mismatch {t.shape} vs {approx.shape}")
    if denominator not in ("input", "approx"):
        raise ValueError(f"unknown denominator {denominator!r}")
    tt_like = isinstance(t, TTTensor) or (
        isinstance(t, SumTensor) and all(isinstance(m, TTTensor) for m in t.members)
    )
    if tt_like:
        tt = t if isinstance(t, TTTensor) else _sum_to_tt(t)
        err = tt_norm(tt_add(tt, -approx))
        ref = tt_norm(tt) if denominator == "input" else tt_norm(approx)
    else:
        dense = _dense_array(t, cap)
        err = float(np.linalg.norm(dense - tt_full(approx.cores, cap)))
        ref = float(np.linalg.norm(dense)) if denominator == "input" else tt_norm(approx)
    if ref == 0.0:
        return 0.0 if err == 0.0 else math.inf
    return err / ref


def left_interface(cores, mu: int) -> np.ndarray:
    """``C_{<=mu}`` of shape ``(n_1...n_mu, r_mu)``; ``mu = 0`` gives ``[[1]]``."""
    out = np.ones((1, 1))
    for core in cores[:mu]:
        out = (out @ core.reshape(core.shape[0], -1)).reshape(-1, core.shape[2])
    return out


def right_interface(cores, mu: int) -> np.ndarray:
    """``C_{>mu}`` of shape ``(n_{mu+1}...n_d, r_mu)``; ``mu = d`` gives ``[[1]]``."""
    out = np.ones((1, 1))
    for core in reversed(cores[mu:]):
        r0, n, _ = core.shape
        out = np.einsum("akb,xb->kxa", core, out).reshape(n * out.shape[0], r0)
    return out


def interface_matrices(t: TTTensor, mu: int, cap: int | None = None):
    d = t.ndim
    if not 1 <= mu <= d - 1:
        raise ValueError(f"interface index {mu} outside 1..{d - 1}")
    _check_cap(math.prod(t.shape[:mu]) * t.ranks[mu - 1], cap)
    _check_cap(math.prod(t.shape[mu:]) * t.ranks[mu - 1], cap)
    return left_interface(t.cores, mu), right_interface(t.cores, mu)


def clip_ranks(dims, ranks) -> tuple[int, ...]:
    """Clip target ranks to ``min(r_mu, n_1...n_mu, n_{mu+1}...n_d)``.

    A scalar rank is broadcast over all ``d - 1`` bonds first.
    """
    dims = tuple(dims)
    d = len(dims)
    if np.isscalar(ranks):
        ranks = (int(ranks),) * (d - 1)
    ranks = check_ranks(ranks, d)
    return tuple(
        min(r, math.prod(dims[:mu]), math.prod(dims[mu:])) for mu, r in zip(range(1, d), ranks)
    )
