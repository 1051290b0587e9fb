"""Comparison methods: matrix HMT and generalized Nystrom, TT-SVD, TT-HMT and OTTS."""

from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np

from .drm import TTChain, hashed_gaussian_rows, make_chain, mode_seed
from .formats import (
    DenseTensor,
    SumTensor,
    TTTensor,
    _dense_array,
    _sum_to_tt,
    clip_ranks,
)
from .linalg import EPS, lstsq_pinv, orth, right_lstsq_pinv, svd
from .sketch import sketch_modes


class MethodKind(enum.Enum):
    TT_SVD = "tt-svd"
    TT_HMT = "tt-hmt"
    STTA = "stta"
    OTTS = "otts"
    GN_MATRIX = "gn-matrix"
    HMT_MATRIX = "hmt-matrix"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown method {name!r}")


# ---------------------------------------------------------------- matrices


def gaussian_matrix(rows: int, cols: int, seed: int, side: str = "right") -> np.ndarray:
    """Hashed Gaussian ``rows x cols`` matrix, the one-mode analogue of a DRM."""
    idx = np.arange(1, rows + 1, dtype=np.int64)[:, None]
    return hashed_gaussian_rows(idx, (rows,), cols, mode_seed(seed, 1, side))


class HMTResult(NamedTuple):
    Q: np.ndarray
    QtA: np.ndarray

    @property
    def approximation(self):
        return self.Q @ self.QtA


def hmt_matrix(a, r: int, seed: int = 0) -> HMTResult:
    """Randomized range finder: ``Q = orth(A X)`` and ``Q^T A``."""
    a = np.asarray(a, dtype=np.float64)
    if not 1 <= r <= min(a.shape):
        raise ValueError(f"rank {r} outside 1..{min(a.shape)}")
    q = orth(a @ gaussian_matrix(a.shape[1], r, seed, "right"))
    return HMTResult(q, q.T @ a)


class GNResult(NamedTuple):
    AX: np.ndarray
    YtA: np.ndarray
    YtAX: np.ndarray
    approximation: np.ndarray


def gn_approx(a, x, y, rtol=None) -> GNResult:
    """``A X (Y^T A X)^+ Y^T A`` for explicit sketching matrices."""
    a = np.asarray(a, dtype=np.float64)
    ax = a @ x
    ya = y.T @ a
    yax = y.T @ ax
    return GNResult(ax, ya, yax, ax @ lstsq_pinv(yax, ya, rtol))


def gn_matrix(a, r: int, ell: int, seed: int = 0, rtol=None) -> GNResult:
    """Generalized Nystrom with ``r`` right and ``r + ell`` left sketch columns."""
    a = np.asarray(a, dtype=np.float64)
    m, n = a.shape
    if r < 1 or ell < 0 or r + ell > m or r > n:
        raise ValueError(f"invalid sketch sizes r={r}, ell={ell} for a {m}x{n} matrix")
    x = gaussian_matrix(n, r, seed, "right")
    y = gaussian_matrix(m, r + ell, seed, "left")
    return gn_approx(a, x, y, rtol)


# ------------------------------------------------------------------ TT-SVD


def _truncation_rank(s, rank, delta):
    k = len(s)
    if delta is not None:
        tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tail[j] = ||s[j:]||
        k = int(np.sum(tail > delta))
        k = max(k, 1)
    if rank is not None:
        k = min(k, rank)
    return max(min(k, len(s)), 1)


def _ranks_arg(dims, ranks):
    if ranks is None:
        return (None,) * (len(dims) - 1)
    return clip_ranks(dims, ranks)


def _tt_svd_dense(values, ranks, tol):
    dims = values.shape
    d = len(dims)
    delta = None if tol is None else tol * np.linalg.norm(values) / math.sqrt(d - 1)
    cores = []
    rprev = 1
    m = values.reshape(1, -1)
    for mu in range(d - 1):
        u, s, vt = svd(m.reshape(rprev * dims[mu], -1))
        k = _truncation_rank(s, ranks[mu], delta)
        cores.append(u[:, :k].reshape(rprev, dims[mu], k))
        m = s[:k, None] * vt[:k]
        rprev = k
    cores.append(m.reshape(rprev, dims[-1], 1))
    return TTTensor(cores)


def tt_round(t: TTTensor, ranks=None, tol=None) -> TTTensor:
    """Right-orthogonalize, then truncate left to right."""
    cores = [np.array(c) for c in t.cores]
    d = len(cores)
    for mu in range(d - 1, 0, -1):
        r0, n, r1 = cores[mu].shape
        q, rr = np.linalg.qr(cores[mu].reshape(r0, n * r1).T)
        cores[mu] = q.T.reshape(-1, n, r1)
        cores[mu - 1] = np.tensordot(cores[mu - 1], rr.T, axes=(2, 0))
    delta = None
    if tol is not None:
        delta = tol * np.linalg.norm(cores[0]) / math.sqrt(d - 1)
    for mu in range(d - 1):
        r0, n, r1 = cores[mu].shape
        u, s, vt = svd(cores[mu].reshape(r0 * n, r1))
        k = _truncation_rank(s, ranks[mu], delta)
        cores[mu] = u[:, :k].reshape(r0, n, k)
        cores[mu + 1] = np.tensordot(s[:k, None] * vt[:k], cores[mu + 1], axes=(1, 0))
    return TTTensor(cores)


def tt_svd(t, ranks=None, tol=None, cap=None) -> TTTensor:
    """Truncated-SVD sweep. TT input (and sums of TTs) are rounded without densifying.

    ``ranks`` may be a scalar or a tuple and is clipped to the unfolding sizes.
    ``tol`` switches to relative-accuracy truncation, splitting the budget
    evenly over the ``d - 1`` bonds; both may be combined.
    """
    ranks = _ranks_arg(tuple(t.shape), ranks)
    if isinstance(t, SumTensor) and all(isinstance(m, TTTensor) for m in t.members):
        t = _sum_to_tt(t)
    if isinstance(t, TTTensor):
        return tt_round(t, ranks, tol)
    values = t.values if isinstance(t, DenseTensor) else _dense_array(t, cap)
    return _tt_svd_dense(np.asarray(values), ranks, tol)


# ------------------------------------------------------ TT-HMT and OTTS


def _partial_left(dims, cores):
    return TTChain("left", dims, tuple(cores))


def tt_hmt(t, ranks, seed: int = 0, drm_kind: str = "gaussian", cap=None) -> TTTensor:
    """Sequential randomized range finding with the accumulated cores as left factor."""
    dims = tuple(t.shape)
    d = len(dims)
    ranks = clip_ranks(dims, ranks)
    right = make_chain(drm_kind, "right", dims, ranks, seed)
    cores = []
    for mu in range(1, d + 1):
        psi, _ = sketch_modes(t, _partial_left(dims, cores), right, [mu], [], cap)
        p = psi[mu]
        if mu < d:
            q = orth(p.reshape(-1, p.shape[2]))
            cores.append(q.reshape(p.shape[0], p.shape[1], q.shape[1]))
        else:
            cores.append(np.array(p))
    return TTTensor(cores)


def otts(t, left_ranks, right_ranks, seed: int = 0, drm_kind: str = "gaussian", rtol=EPS, cap=None) -> TTTensor:
    """Orthogonalized TT sketch. Output ranks are ``left_ranks``; cores 1..d-1 are left-orthogonal."""
    dims = tuple(t.shape)
    d = len(dims)
    left_ranks = tuple(int(r) for r in left_ranks)
    right_ranks = tuple(int(r) for r in right_ranks)
    if len(left_ranks) != d - 1 or len(right_ranks) != d - 1:
        raise ValueError(f"expected {d - 1} ranks per side")
    if any(l >= r for l, r in zip(left_ranks, right_ranks)):
        raise ValueError("OTTS needs r^L < r^R in every mode")
    y = make_chain(drm_kind, "left", dims, left_ranks, seed)
    x = make_chain(drm_kind, "right", dims, right_ranks, seed)
    _, omegas = sketch_modes(t, y, x, [], range(1, d), cap)
    cores = []
    for mu in range(1, d + 1):
        psi, _ = sketch_modes(t, _partial_left(dims, cores), x, [mu], [], cap)
        p = psi[mu]
        if mu < d:
            b = right_lstsq_pinv(omegas[mu], p.reshape(-1, p.shape[2]), rtol)
            q = orth(b)
            cores.append(q.reshape(p.shape[0], p.shape[1], q.shape[1]))
        else:
            cores.append(np.array(p))
    return TTTensor(cores)
