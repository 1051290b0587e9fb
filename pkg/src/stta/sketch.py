"""
Two-sided sketches ``Psi_mu`` and ``Omega_mu`` of structured tensors.

``Psi_mu = (Y_{mu-1}^T kron I) T^{<=mu} X_mu`` is stored as an order-3 array of
shape ``(r^L_{mu-1}, n_mu, r^R_mu)`` and ``Omega_mu = Y_mu^T T^{<=mu} X_mu`` as a
``(r^L_mu, r^R_mu)`` matrix, with ``Y_0 = X_d = 1``. Every kernel is linear in
the tensor, so sketches of summands can be added.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .drm import GaussianChain, TTChain, is_prefix_extension
from .formats import (
    CPTensor,
    DenseTensor,
    SparseTensor,
    SumTensor,
    TTTensor,
    TuckerTensor,
    MATERIALIZATION_CAP,
    MaterializationError,
    to_dense,
)


class FingerprintMismatch(ValueError):
    """Sketches taken with different DRMs cannot be combined."""


@dataclass(frozen=True, eq=False)
class SketchPack:
    psi: tuple
    omega: tuple
    dims: tuple
    left_ranks: tuple
    right_ranks: tuple
    fingerprint: tuple

    def __post_init__(self):
        d = len(self.dims)
        if len(self.psi) != d or len(self.omega) != d - 1:
            raise ValueError("a sketch needs d Psi and d-1 Omega blocks")
        left = (1,) + tuple(self.left_ranks)
        right = tuple(self.right_ranks) + (1,)
        for mu, p in enumerate(self.psi):
            if p.shape != (left[mu], self.dims[mu], right[mu]):
                raise ValueError(f"Psi_{mu + 1} has shape {p.shape}")
        for mu, o in enumerate(self.omega):
            if o.shape != (left[mu + 1], right[mu]):
                raise ValueError(f"Omega_{mu + 1} has shape {o.shape}")

    @property
    def d(self):
        return len(self.dims)

    def scale(self, alpha):
        return SketchPack(
            tuple(alpha * p for p in self.psi), tuple(alpha * o for o in self.omega),
            self.dims, self.left_ranks, self.right_ranks, self.fingerprint,
        )

    def __add__(self, other):
        return sketch_sum([self, other])

    def entry_count(self):
        return sum(p.size for p in self.psi) + sum(o.size for o in self.omega)


def _check_chains(shape, left, right):
    if left.side != "left" or right.side != "right":
        raise ValueError("expected a left chain and a right chain")
    if tuple(left.dims) != tuple(shape) or tuple(right.dims) != tuple(shape):
        raise ValueError(f"chain shape does not match tensor shape {tuple(shape)}")


def _all_modes(d):
    return range(1, d + 1), range(1, d)


def _dense_kernel(values, left, right, psi_modes, omega_modes, cap=None):
    dims = values.shape
    psi, omega = {}, {}
    ycache = {}

    def y(mu):
        if mu not in ycache:
            ycache[mu] = left.matrix(mu, cap)
        return ycache[mu]

    for mu in sorted(set(psi_modes) | set(omega_modes)):
        x = right.matrix(mu, cap)
        z = values.reshape(-1, x.shape[0]) @ x
        if mu in psi_modes:
            yp = y(mu - 1)
            psi[mu] = np.tensordot(yp, z.reshape(yp.shape[0], dims[mu - 1], -1), axes=(0, 0))
        if mu in omega_modes:
            omega[mu] = y(mu).T @ z
    return psi, omega


def _sparse_kernel(t, left, right, psi_modes, omega_modes):
    idx = t.indices
    psi, omega = {}, {}
    for mu in sorted(set(psi_modes) | set(omega_modes)):
        xr = right.rows(mu, idx) * t.values[:, None]
        if mu in psi_modes:
            yp = left.rows(mu - 1, idx)
            acc = np.zeros((t.dims[mu - 1], yp.shape[1], xr.shape[1]))
            np.add.at(acc, idx[:, mu - 1], yp[:, :, None] * xr[:, None, :])
            psi[mu] = acc.transpose(1, 0, 2).copy()
        if mu in omega_modes:
            omega[mu] = left.rows(mu, idx).T @ xr
    return psi, omega


def _needed(psi_modes, omega_modes):
    lmax = max([m - 1 for m in psi_modes] + list(omega_modes) + [0])
    rmin = min(list(psi_modes) + list(omega_modes))
    return lmax, rmin


def _tt_kernel(t, left, right, psi_modes, omega_modes):
    d = t.ndim
    c = t.cores
    lmax, rmin = _needed(psi_modes, omega_modes)
    lenv = [np.ones((1, 1))]
    for mu in range(1, lmax + 1):
        lenv.append(np.einsum("ab,akc,bkd->cd", lenv[-1], left.cores[mu - 1], c[mu - 1], optimize=True))
    renv = {d: np.ones((1, 1))}
    for mu in range(d - 1, rmin - 1, -1):
        renv[mu] = np.einsum("akc,bkd,cd->ab", c[mu], right.cores[mu], renv[mu + 1], optimize=True)
    psi = {mu: np.einsum("ab,bkc,cd->akd", lenv[mu - 1], c[mu - 1], renv[mu], optimize=True) for mu in psi_modes}
    omega = {mu: lenv[mu] @ renv[mu] for mu in omega_modes}
    return psi, omega


def _cp_kernel(t, left, right, psi_modes, omega_modes):
    d = t.ndim
    v = t.factors
    n_terms = t.n_terms
    lmax, rmin = _needed(psi_modes, omega_modes)
    lenv = [np.ones((1, n_terms))]
    for mu in range(1, lmax + 1):
        lenv.append(np.einsum("aj,akc,jk->cj", lenv[-1], left.cores[mu - 1], v[mu - 1], optimize=True))
    renv = {d: np.ones((n_terms, 1))}
    for mu in range(d - 1, rmin - 1, -1):
        renv[mu] = np.einsum("jk,ckd,jd->jc", v[mu], right.cores[mu], renv[mu + 1], optimize=True)
    psi = {mu: np.einsum("aj,jk,jc->akc", lenv[mu - 1], v[mu - 1], renv[mu], optimize=True) for mu in psi_modes}
    omega = {mu: lenv[mu] @ renv[mu] for mu in omega_modes}
    return psi, omega


def _tucker_kernel(t, left, right, psi_modes, omega_modes, cap=None):
    d = t.ndim
    core = t.core
    s = core.shape
    cap = MATERIALIZATION_CAP if cap is None else cap
    if core.size > cap:
        raise MaterializationError(f"Tucker core of {core.size} entries exceeds cap {cap}")
    u = t.factors
    lmax, rmin = _needed(psi_modes, omega_modes)
    # W_mu = Y_mu^T (U_1 kron ... kron U_mu), shape (r^L_mu, s_1...s_mu)
    wenv = [np.ones((1, 1))]
    for mu in range(1, lmax + 1):
        w = np.einsum("akc,ap,kq->cpq", left.cores[mu - 1], wenv[-1], u[mu - 1], optimize=True)
        wenv.append(w.reshape(w.shape[0], -1))
    # Z_mu = (U_{mu+1} kron ... kron U_d)^T X_mu, shape (s_{mu+1}...s_d, r^R_mu)
    zenv = {d: np.ones((1, 1))}
    for mu in range(d - 1, rmin - 1, -1):
        z = np.einsum("kp,ckb,qb->pqc", u[mu], right.cores[mu], zenv[mu + 1], optimize=True)
        zenv[mu] = z.reshape(-1, z.shape[2])
    psi, omega = {}, {}
    for mu in psi_modes:
        g = core.reshape(math.prod(s[: mu - 1]), s[mu - 1], -1)
        tmp = np.einsum("ap,psq,qc->asc", wenv[mu - 1], g, zenv[mu], optimize=True)
        psi[mu] = np.einsum("ks,asc->akc", u[mu - 1], tmp, optimize=True)
    for mu in omega_modes:
        g = core.reshape(math.prod(s[:mu]), -1)
        omega[mu] = wenv[mu] @ g @ zenv[mu]
    return psi, omega


def _both_tt(left, right):
    return isinstance(_unwrap(left), TTChain) and isinstance(_unwrap(right), TTChain)


class _MatrixCache:
    """Chain proxy that keeps materialized DRM matrices while one sum is sketched."""

    def __init__(self, chain):
        self.chain = chain
        self._mats = {}

    def __getattr__(self, name):
        return getattr(self.chain, name)

    def matrix(self, mu, cap=None):
        if mu not in self._mats:
            self._mats[mu] = self.chain.matrix(mu, cap)
        return self._mats[mu]


def _unwrap(chain):
    return chain.chain if isinstance(chain, _MatrixCache) else chain


def sketch_modes(t, left, right, psi_modes=None, omega_modes=None, cap=None):
    """Selected sketches of ``t`` as ``(psi, omega)`` dictionaries keyed by 1-based mode.

    Low-rank formats use their structured kernel when both chains are TT
    chains; with hashed Gaussian chains they are materialized first.
    """
    d = len(t.shape)
    if psi_modes is None and omega_modes is None:
        psi_modes, omega_modes = _all_modes(d)
    psi_modes = list(psi_modes or [])
    omega_modes = list(omega_modes or [])
    if any(not 1 <= m <= d for m in psi_modes) or any(not 1 <= m <= d - 1 for m in omega_modes):
        raise ValueError("sketch mode out of range")
    _check_chains(t.shape, left, right)
    if not psi_modes and not omega_modes:
        return {}, {}
    if isinstance(t, SumTensor):
        cl, cr = _MatrixCache(_unwrap(left)), _MatrixCache(_unwrap(right))
        parts = [sketch_modes(m, cl, cr, psi_modes, omega_modes, cap) for m in t.members]
        psi = {mu: _ordered_sum([p[0][mu] for p in parts]) for mu in psi_modes}
        omega = {mu: _ordered_sum([p[1][mu] for p in parts]) for mu in omega_modes}
        return psi, omega
    if isinstance(t, DenseTensor):
        return _dense_kernel(t.values, left, right, psi_modes, omega_modes, cap)
    if isinstance(t, SparseTensor):
        return _sparse_kernel(t, left, right, psi_modes, omega_modes)
    if isinstance(t, (TTTensor, CPTensor, TuckerTensor)):
        if not _both_tt(left, right):
            return _dense_kernel(to_dense(t, cap).values, left, right, psi_modes, omega_modes, cap)
        if isinstance(t, TTTensor):
            return _tt_kernel(t, left, right, psi_modes, omega_modes)
        if isinstance(t, CPTensor):
            return _cp_kernel(t, left, right, psi_modes, omega_modes)
        return _tucker_kernel(t, left, right, psi_modes, omega_modes, cap)
    raise TypeError(f"cannot sketch {type(t).__name__}")


def _ordered_sum(arrays):
    out = np.array(arrays[0], copy=True)
    for a in arrays[1:]:
        out = out + a
    return out


def _pack(t_shape, left, right, psi, omega):
    d = len(t_shape)
    return SketchPack(
        tuple(psi[mu] for mu in range(1, d + 1)),
        tuple(omega[mu] for mu in range(1, d)),
        tuple(t_shape),
        tuple(left.rank(mu) for mu in range(1, d)),
        tuple(right.rank(mu) for mu in range(1, d)),
        (left.fingerprint(), right.fingerprint()),
    )


def sketch(t, left, right, workers: int | None = None, cap=None) -> SketchPack:
    """Full sketch of any supported tensor.

    Members of a :class:`SumTensor` are sketched independently (on ``workers``
    threads if given) and reduced in their stored order.
    """
    if isinstance(t, SumTensor):
        _check_chains(t.shape, left, right)
        left, right = _MatrixCache(_unwrap(left)), _MatrixCache(_unwrap(right))
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda m: sketch(m, left, right, cap=cap), t.members))
        else:
            parts = [sketch(m, left, right, cap=cap) for m in t.members]
        return sketch_sum(parts)
    psi, omega = sketch_modes(t, left, right, cap=cap)
    return _pack(t.shape, left, right, psi, omega)


def sketch_dense(t: DenseTensor, left, right, cap=None) -> SketchPack:
    if not isinstance(t, DenseTensor):
        raise TypeError("sketch_dense expects a DenseTensor")
    return sketch(t, left, right, cap=cap)


def sketch_sparse(t: SparseTensor, left, right) -> SketchPack:
    if not isinstance(t, SparseTensor):
        raise TypeError("sketch_sparse expects a SparseTensor")
    return sketch(t, left, right)


def _require_tt_chains(left, right):
    if not _both_tt(left, right):
        raise TypeError("this kernel needs TT chains on both sides")


def sketch_tt(t: TTTensor, left: TTChain, right: TTChain) -> SketchPack:
    if not isinstance(t, TTTensor):
        raise TypeError("sketch_tt expects a TTTensor")
    _require_tt_chains(left, right)
    return sketch(t, left, right)


def sketch_cp(t: CPTensor, left: TTChain, right: TTChain) -> SketchPack:
    if not isinstance(t, CPTensor):
        raise TypeError("sketch_cp expects a CPTensor")
    _require_tt_chains(left, right)
    return sketch(t, left, right)


def sketch_tucker(t: TuckerTensor, left: TTChain, right: TTChain, cap=None) -> SketchPack:
    if not isinstance(t, TuckerTensor):
        raise TypeError("sketch_tucker expects a TuckerTensor")
    _require_tt_chains(left, right)
    return sketch(t, left, right, cap=cap)


def sketch_sum(parts) -> SketchPack:
    """Elementwise sum of sketches taken with identical DRMs, reduced in list order."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to sum")
    first = parts[0]
    for p in parts[1:]:
        if p.dims != first.dims or p.left_ranks != first.left_ranks or p.right_ranks != first.right_ranks:
            raise FingerprintMismatch("sketch shapes or ranks differ")
        if p.fingerprint != first.fingerprint:
            raise FingerprintMismatch("sketches were taken with different DRMs")
    return SketchPack(
        tuple(_ordered_sum([p.psi[mu] for p in parts]) for mu in range(first.d)),
        tuple(_ordered_sum([p.omega[mu] for p in parts]) for mu in range(first.d - 1)),
        first.dims, first.left_ranks, first.right_ranks, first.fingerprint,
    )


def bilinear_flops(nnz, left_ranks, right_ranks):
    """Multiply-adds of the entrywise bilinear contractions behind a sketch of ``nnz`` entries."""
    d = len(left_ranks) + 1
    lr = (1,) + tuple(left_ranks)
    rr = tuple(right_ranks) + (1,)
    total = 0
    for mu in range(1, d + 1):
        total += nnz * lr[mu - 1] * rr[mu - 1]
        if mu < d:
            total += nnz * lr[mu] * rr[mu - 1]
    return total


def extension_flops(nnz, old_left, old_right, new_left, new_right):
    """Cost of the three new blocks under the :func:`bilinear_flops` model."""
    full = bilinear_flops(nnz, new_left, new_right)
    return full - bilinear_flops(nnz, old_left, old_right)


def sketch_block_extend(old: SketchPack, t, old_chains, extended_chains, cap=None) -> SketchPack:
    """Sketch with widened chains, reusing ``old`` as the top-left blocks.

    Only the blocks pairing new left columns or new right columns are computed.
    """
    old_left, old_right = old_chains
    new_left, new_right = extended_chains
    if not (is_prefix_extension(old_left, new_left) and is_prefix_extension(old_right, new_right)):
        raise ValueError("extended chains are not prefix-stable extensions of the old ones")
    if old.fingerprint != (old_left.fingerprint(), old_right.fingerprint()):
        raise FingerprintMismatch("old sketch was not taken with the given chains")
    d = old.d
    if new_left.ranks == old_left.ranks and new_right.ranks == old_right.ranks:
        return old
    extra_l = tuple(b - a for a, b in zip(old_left.ranks, new_left.ranks))
    extra_r = tuple(b - a for a, b in zip(old_right.ranks, new_right.ranks))
    y2 = new_left.column_block(old_left.ranks, extra_l)
    x2 = new_right.column_block(old_right.ranks, extra_r)
    all_modes = range(1, d)
    # (Y1, X2) blocks; Psi_d has no new right columns
    p12, o12 = sketch_modes(t, old_left, x2, range(1, d), all_modes, cap)
    # (Y2, X1) blocks; Psi_1 has no new left rows
    p21, o21 = sketch_modes(t, y2, old_right, range(2, d + 1), all_modes, cap)
    p22, o22 = sketch_modes(t, y2, x2, range(2, d), all_modes, cap)
    psi = []
    for mu in range(1, d + 1):
        top = old.psi[mu - 1]
        if mu < d:
            top = np.concatenate([top, p12[mu]], axis=2)
        if mu > 1:
            bottom = p21[mu]
            if mu < d:
                bottom = np.concatenate([bottom, p22[mu]], axis=2)
            top = np.concatenate([top, bottom], axis=0)
        psi.append(top)
    omega = []
    for mu in range(1, d):
        omega.append(np.block([[old.omega[mu - 1], o12[mu]], [o21[mu], o22[mu]]]))
    return SketchPack(
        tuple(psi), tuple(omega), old.dims, new_left.ranks, new_right.ranks,
        (new_left.fingerprint(), new_right.fingerprint()),
    )
