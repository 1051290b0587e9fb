"""
Dimension reduction matrices (DRMs).

Two families are provided:

* :class:`GaussianChain` -- rows are produced on demand by hashing the row's
  multi-index together with a mode-specific seed, so any process can generate
  any row without communication.
* :class:`TTChain` -- the interface matrices of a random tensor train. Left
  chains give ``Y_mu = B_{<=mu}``, right chains give ``X_mu = A_{>mu}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .formats import check_ranks, check_shape, left_interface, right_interface, MATERIALIZATION_CAP, MaterializationError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

#: Row stride used by chains so that appending columns never moves existing ones.
COLUMN_STRIDE = 1 << 32

_SIDE_TAG = {"left": 0, "right": 1}

_MANTISSA_MASK = np.uint64(0x000FFFFFFFFFFFFF)
_HALF_EXPONENT = np.uint64(0x3FE0000000000000)
_TOP3_CLEAR = np.uint64((1 << 61) - 1)
_TOP3_SET = np.uint64(1 << 61)


def splitmix64(x):
    """splitmix64 finalizer applied to ``x + golden``; works on ints and uint64 arrays."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, np.ndarray):
        z = (int(x) + GOLDEN) & MASK64
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)
    z = np.asarray(x, dtype=np.uint64) + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


# AS241 (PPND16) coefficients
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
      2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
      5.226495278852545925e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
      1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
      2.04426310338993978564e-15)


def _poly(coef, x):
    out = np.full_like(x, coef[-1])
    for c in coef[-2::-1]:
        out = out * x + c
    return out


def normal_inverse_cdf(p):
    """Inverse standard normal CDF (Wichura's AS241), vectorized over ``p``."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    if np.any(tail):
        pt = p[tail]
        r = np.sqrt(-np.log(np.minimum(pt, 1.0 - pt)))
        val = np.empty_like(r)
        near = r <= 5.0
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tail] = np.where(q[tail] < 0.0, -val, val)
    return out


def hash_to_unit(h):
    """Map hash words to ``[2^-52, 1 - 2^-52]`` through the mantissa of a forced-exponent double."""
    h = np.asarray(h, dtype=np.uint64)
    h = (h & _TOP3_CLEAR) | _TOP3_SET
    # same mantissa as the reinterpreted word, exponent pinned so the value lies in [0.5, 1)
    x = ((h & _MANTISSA_MASK) | _HALF_EXPONENT).view(np.float64)
    x = 2.0 * x - 1.0
    return np.clip(x, 2.0**-52, 1.0 - 2.0**-52)


def _linear_index(indices, dims):
    m = np.zeros(indices.shape[0], dtype=np.uint64)
    for j, n in enumerate(dims):
        m = np.uint64(n) * (m + indices[:, j].astype(np.uint64))
    return m


def _hashed_normals_from_base(m, dims_stride, r, seed, col_start):
    base = m * np.uint64(dims_stride) + np.uint64(splitmix64(int(seed)))
    cols = np.arange(col_start + 1, col_start + r + 1, dtype=np.uint64)
    h = splitmix64(base[:, None] + cols[None, :])
    return normal_inverse_cdf(hash_to_unit(h))


def hashed_gaussian_rows(indices, dims, r, seed, stride=None, col_start=0):
    """Rows of a hashed Gaussian DRM for an ``(N, k)`` array of 1-based multi-indices."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim == 1:
        indices = indices[None, :]
    dims = tuple(int(n) for n in dims)
    if indices.shape[1] != len(dims):
        raise ValueError("index length does not match dims")
    if indices.size and (indices.min() < 1 or np.any(indices > np.array(dims))):
        raise IndexError("DRM row index out of bounds")
    stride = r if stride is None else stride
    return _hashed_normals_from_base(_linear_index(indices, dims), stride, r, seed, col_start)


def hashed_gaussian_row(indices, dims, r, seed, stride=None):
    """One row of ``r`` Gaussian numbers for a 1-based multi-index.

    With ``stride=None`` the row base is ``m * r + hash(seed)``; chains pass a
    fixed stride so that widening a chain keeps the existing columns.
    """
    return hashed_gaussian_rows(np.asarray(indices)[None, :], dims, r, seed, stride)[0]


def _all_linear_indices(dims):
    m = np.zeros(1, dtype=np.uint64)
    for n in dims:
        i = np.arange(1, n + 1, dtype=np.uint64)
        m = (np.uint64(n) * (m[:, None] + i[None, :])).ravel()
    return m


def _check_side(side):
    if side not in _SIDE_TAG:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def mode_seed(master_seed: int, mu: int, side: str) -> int:
    return splitmix64((int(master_seed) & MASK64) ^ (2 * mu + _SIDE_TAG[side]))


def _check_materialize(rows, cols, cap):
    cap = MATERIALIZATION_CAP if cap is None else cap
    if rows * cols > cap:
        raise MaterializationError(f"DRM of {rows}x{cols} exceeds materialization cap {cap}")


@dataclass(frozen=True)
class GaussianChain:
    """Hashed Gaussian DRMs, one independent matrix per mode.

    Column ``j`` of the chain occupies hash slot ``col_start[mu-1] + j``, which
    makes column blocks of a wider chain reproducible by a narrower one.
    """

    side: str
    dims: tuple
    ranks: tuple
    seed: int
    stride: int = COLUMN_STRIDE
    col_start: tuple = None
    kind: str = field(default="gaussian", init=False)

    def __post_init__(self):
        _check_side(self.side)
        dims = check_shape(self.dims)
        object.__setattr__(self, "dims", dims)
        ranks = tuple(int(r) for r in self.ranks)
        if len(ranks) != len(dims) - 1 or any(r < 0 for r in ranks):
            raise ValueError(f"need {len(dims) - 1} nonnegative ranks, got {ranks}")
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "seed", int(self.seed) & MASK64)
        starts = (0,) * (len(dims) - 1) if self.col_start is None else tuple(int(s) for s in self.col_start)
        if len(starts) != len(dims) - 1:
            raise ValueError("col_start must have one entry per mode")
        object.__setattr__(self, "col_start", starts)

    @property
    def d(self):
        return len(self.dims)

    def rank(self, mu: int) -> int:
        if mu == 0 or mu == self.d:
            return 1
        return self.ranks[mu - 1]

    def mode_seed(self, mu: int) -> int:
        return mode_seed(self.seed, mu, self.side)

    def _boundary(self, mu):
        return (self.side == "left" and mu == 0) or (self.side == "right" and mu == self.d)

    def _mode_dims(self, mu):
        return self.dims[:mu] if self.side == "left" else self.dims[mu:]

    def matrix(self, mu: int, cap: int | None = None) -> np.ndarray:
        if self._boundary(mu):
            return np.ones((1, 1))
        dims = self._mode_dims(mu)
        r = self.rank(mu)
        _check_materialize(math.prod(dims), r, cap)
        m = _all_linear_indices(dims)
        return _hashed_normals_from_base(m, self.stride, r, self.mode_seed(mu), self.col_start[mu - 1])

    def rows(self, mu: int, indices) -> np.ndarray:
        """Rows addressed by full 0-based multi-indices ``(N, d)``; only the relevant part is used."""
        indices = np.asarray(indices, dtype=np.int64)
        if self._boundary(mu):
            return np.ones((indices.shape[0], 1))
        part = indices[:, :mu] if self.side == "left" else indices[:, mu:]
        m = _linear_index(part + 1, self._mode_dims(mu))
        return _hashed_normals_from_base(m, self.stride, self.rank(mu), self.mode_seed(mu), self.col_start[mu - 1])

    def column_block(self, start, count) -> "GaussianChain":
        """Chain made of columns ``start[mu] .. start[mu] + count[mu]`` of this one."""
        start = tuple(int(s) for s in start)
        count = tuple(int(c) for c in count)
        return GaussianChain(
            self.side, self.dims, count, self.seed, self.stride,
            tuple(c0 + s for c0, s in zip(self.col_start, start)),
        )

    def fingerprint(self):
        return ("gaussian", self.side, self.seed, self.stride, self.ranks, self.col_start)


@dataclass(frozen=True, eq=False)
class TTChain:
    """DRMs given by interface matrices of a TT.

    ``cores[mu - 1]`` is core ``mu``. A left chain needs cores ``1..k`` (``k``
    may be smaller than ``d - 1`` for partially built chains); a right chain
    stores ``None`` for core 1.
    """

    side: str
    dims: tuple
    cores: tuple
    seed: int | None = None
    kind: str = field(default="tt", init=False)

    def __post_init__(self):
        _check_side(self.side)
        dims = check_shape(self.dims)
        cores = tuple(None if c is None else np.asarray(c, dtype=np.float64) for c in self.cores)
        for c in cores:
            if c is not None:
                c.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "cores", cores)

    @property
    def d(self):
        return len(self.dims)

    @property
    def ranks(self):
        if self.side == "left":
            return tuple(c.shape[2] for c in self.cores if c is not None)
        return tuple(c.shape[0] for c in self.cores[1:])

    def rank(self, mu: int) -> int:
        if mu == 0 or mu == self.d:
            return 1
        if self.side == "left":
            return self.cores[mu - 1].shape[2]
        return self.cores[mu].shape[0]

    def left_cores(self, mu):
        return self.cores[:mu]

    def right_cores(self, mu):
        """Cores ``mu+1 .. d`` of a right chain."""
        return self.cores[mu:]

    def matrix(self, mu: int, cap: int | None = None) -> np.ndarray:
        if self.side == "left":
            _check_materialize(math.prod(self.dims[:mu]), self.rank(mu), cap)
            return left_interface(self.cores, mu)
        _check_materialize(math.prod(self.dims[mu:]), self.rank(mu), cap)
        return right_interface(self.cores, mu)

    def rows(self, mu: int, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if self.side == "left":
            if mu == 0:
                return np.ones((indices.shape[0], 1))
            return gather_left(self.cores[:mu], indices[:, :mu])[-1]
        if mu == self.d:
            return np.ones((indices.shape[0], 1))
        return gather_right(self.cores[mu:], indices[:, mu:])[0]

    def fingerprint(self):
        return ("tt", self.side, self.seed, self.ranks)


def _hashed_normals(seed: int, count: int) -> np.ndarray:
    ctr = np.arange(1, count + 1, dtype=np.uint64) + np.uint64(splitmix64(int(seed)))
    return normal_inverse_cdf(hash_to_unit(splitmix64(ctr)))


def tt_drm_new(dims, ranks, side, seed) -> TTChain:
    """Random TT DRM chain with the variance scaling that keeps ``E||X C^L||^2 = ||X||^2``.

    Left cores have entries of variance ``1 / r_mu``; right cores ``1 / r_{mu-1}``.
    """
    _check_side(side)
    dims = check_shape(dims)
    d = len(dims)
    ranks = check_ranks(ranks, d)
    full = (1,) + ranks + (1,)
    cores = [None] * d
    mus = range(1, d) if side == "left" else range(2, d + 1)
    for mu in mus:
        shape = (full[mu - 1], dims[mu - 1], full[mu])
        var = 1.0 / (full[mu] if side == "left" else full[mu - 1])
        z = _hashed_normals(mode_seed(seed, mu, side), math.prod(shape))
        cores[mu - 1] = np.sqrt(var) * z.reshape(shape)
    if side == "left":
        cores = cores[: d - 1]
    return TTChain(side, dims, tuple(cores), int(seed) & MASK64)


def gather_left(cores, indices):
    """Rows of ``C_{<=mu}`` for each mu, for 0-based multi-index prefixes ``(N, k)``."""
    indices = np.asarray(indices, dtype=np.int64)
    out = []
    v = np.ones((indices.shape[0], 1))
    for mu, core in enumerate(cores):
        v = np.einsum("ja,ajb->jb", v, core[:, indices[:, mu], :])
        out.append(v)
    return out


def gather_right(cores, indices):
    """Rows of ``C_{>mu}`` built from the right; ``cores`` are cores ``mu+1..d``."""
    indices = np.asarray(indices, dtype=np.int64)
    k = len(cores)
    out = [None] * k
    w = np.ones((indices.shape[0], 1))
    for j in range(k - 1, -1, -1):
        w = np.einsum("ajb,jb->ja", cores[j][:, indices[:, j], :], w)
        out[j] = w
    return out


def tt_drm_gather(cores, index_list):
    """Selected rows ``V_mu`` of the left interface matrices for 1-based multi-indices."""
    idx = np.asarray(index_list, dtype=np.int64)
    if idx.ndim == 1:
        idx = idx[None, :]
    dims = np.array([c.shape[1] for c in cores])
    if idx.shape[1] < len(cores):
        raise ValueError("multi-indices shorter than the number of cores")
    idx = idx[:, : len(cores)]
    if idx.size and (idx.min() < 1 or np.any(idx > dims)):
        raise IndexError("gather index out of bounds")
    return gather_left(cores, idx - 1)


def chain_extend(chain, extra_ranks) -> GaussianChain:
    """Widen a hashed Gaussian chain; the existing columns are reproduced bit for bit."""
    if not isinstance(chain, GaussianChain):
        raise TypeError("only hashed Gaussian chains can be extended")
    extra = tuple(int(r) for r in extra_ranks)
    if len(extra) != len(chain.ranks) or any(r < 0 for r in extra):
        raise ValueError("extra ranks must be nonnegative, one per mode")
    ranks = tuple(r + e for r, e in zip(chain.ranks, extra))
    return GaussianChain(chain.side, chain.dims, ranks, chain.seed, chain.stride, chain.col_start)


def is_prefix_extension(old, new) -> bool:
    return (
        isinstance(old, GaussianChain)
        and isinstance(new, GaussianChain)
        and old.side == new.side
        and old.dims == new.dims
        and old.seed == new.seed
        and old.stride == new.stride
        and old.col_start == new.col_start
        and all(a <= b for a, b in zip(old.ranks, new.ranks))
    )


def make_chain(kind, side, dims, ranks, seed):
    if kind == "gaussian":
        return GaussianChain(side, tuple(dims), tuple(ranks), seed)
    if kind == "tt":
        return tt_drm_new(dims, ranks, side, seed)
    raise ValueError(f"unknown DRM kind {kind!r}")
