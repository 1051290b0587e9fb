"""Test-tensor constructors for the benchmark experiments."""

from __future__ import annotations

import numpy as np

from ..formats import (
    CPTensor,
    DenseTensor,
    SparseTensor,
    SumTensor,
    TTTensor,
    check_shape,
    clip_ranks,
)
from ..linalg import svd


def _grids(dims):
    return np.meshgrid(*[np.arange(1, n + 1, dtype=np.float64) for n in dims], indexing="ij")


def gen_hilbert(d: int, n: int) -> DenseTensor:
    """Entries ``1 / (i_1 + ... + i_d - d + 1)`` with 1-based indices."""
    dims = check_shape((n,) * d)
    return DenseTensor(1.0 / (sum(_grids(dims)) - d + 1))


def gen_sqrt_sum(d: int, n: int, a: float = 0.2, b: float = 2.0) -> DenseTensor:
    """Entries ``sqrt(sum_j ((n - i_j) a + (i_j - 1) b) / (n - 1))``."""
    if n < 2:
        raise ValueError("sqrt-sum tensor needs n >= 2")
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    dims = check_shape((n,) * d)
    total = sum(((n - i) * a + (i - 1) * b) / (n - 1) for i in _grids(dims))
    return DenseTensor(np.sqrt(total))


def sigma_profile(r: int, sigma_max: float, sigma_min: float) -> np.ndarray:
    """``r`` values decaying geometrically from ``sigma_max`` to ``sigma_min``."""
    if r == 1:
        return np.array([float(sigma_max)])
    return np.geomspace(sigma_max, sigma_min, r)


def _random_orthonormal(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def gen_decaying_tt(
    d: int,
    n: int,
    r: int,
    sigma_max: float = 1.0,
    sigma_min: float = 1e-10,
    seed: int = 0,
    sweeps: int = 6,
    clip: bool = False,
) -> TTTensor:
    """Random TT whose unfoldings have (approximately) geometric singular values.

    Cores start as random orthonormal frames. Alternating sweeps then move the
    orthogonality center across each bond and replace the bond's singular
    values by the target profile. Every bond target is rescaled to the
    Frobenius norm of the first one so that the sweeps are consistent.

    ``r > n`` is rejected unless ``clip`` is set, in which case each bond rank
    becomes ``min(r, n^mu, n^(d-mu))``.
    """
    dims = check_shape((n,) * d)
    if r < 1:
        raise ValueError("rank must be positive")
    if r > n and not clip:
        raise ValueError(f"rank {r} exceeds mode size {n}; pass clip=True to clip border ranks")
    ranks = clip_ranks(dims, r)
    rng = np.random.default_rng(seed)
    full = (1,) + ranks + (1,)
    targets = [sigma_profile(k, sigma_max, sigma_min) for k in ranks]
    ref = np.linalg.norm(targets[0])
    targets = [s * (ref / np.linalg.norm(s)) for s in targets]

    cores = []
    for mu in range(d):
        r0, r1 = full[mu], full[mu + 1]
        if r0 * n >= r1:
            c = _random_orthonormal(rng, r0 * n, r1).reshape(r0, n, r1)
        else:
            c = _random_orthonormal(rng, n * r1, r0).T.reshape(r0, n, r1)
        cores.append(c)

    def right_orthogonalize():
        for mu in range(d - 1, 0, -1):
            r0, _, r1 = cores[mu].shape
            q, rr = np.linalg.qr(cores[mu].reshape(r0, -1).T)
            cores[mu] = q.T.reshape(-1, n, r1)
            cores[mu - 1] = np.tensordot(cores[mu - 1], rr.T, axes=(2, 0))

    right_orthogonalize()
    for sweep in range(sweeps):
        forward = sweep % 2 == 0
        bonds = range(d - 1) if forward else range(d - 2, -1, -1)
        for mu in bonds:
            if forward:
                r0, _, r1 = cores[mu].shape
                u, _, vt = svd(cores[mu].reshape(r0 * n, r1))
                cores[mu] = u.reshape(r0, n, -1)
                cores[mu + 1] = np.tensordot(targets[mu][:, None] * vt, cores[mu + 1], axes=(1, 0))
            else:
                r0, _, r1 = cores[mu + 1].shape
                u, _, vt = svd(cores[mu + 1].reshape(r0, n * r1))
                cores[mu + 1] = vt.reshape(-1, n, r1)
                cores[mu] = np.tensordot(cores[mu], u * targets[mu][None, :], axes=(2, 0))
    return TTTensor(cores)


def _random_tt(rng, dims, ranks, std):
    full = (1,) + tuple(ranks) + (1,)
    return [std * rng.standard_normal((full[mu], n, full[mu + 1])) for mu, n in enumerate(dims)]


def gen_tt_plus_sparse(seed: int = 0, d: int = 5, n: int = 10, r: int = 5, nnz: int = 100,
                       std_hi: float = 1e-3, std_lo: float = 1e-20) -> SumTensor:
    """Rank-``r`` TT with ``N(0, 1/r^2)`` cores plus a sparse tensor.

    Sparse values are normal with standard deviations log-uniform in
    ``[std_lo, std_hi]``; positions are distinct and uniform.
    """
    rng = np.random.default_rng(seed)
    dims = check_shape((n,) * d)
    tt = TTTensor(_random_tt(rng, dims, clip_ranks(dims, r), 1.0 / r))
    total = int(np.prod(dims))
    if nnz > total:
        raise ValueError("more nonzeros than entries")
    flat = rng.choice(total, size=nnz, replace=False)
    idx = np.stack(np.unravel_index(flat, dims), axis=1)
    std = 10.0 ** rng.uniform(np.log10(std_lo), np.log10(std_hi), size=nnz)
    sp = SparseTensor(dims, idx, std * rng.standard_normal(nnz))
    return SumTensor((tt, sp))


def gen_sum_of_tt(seed: int = 0, count: int = 20, decay: float = 10.0, d: int = 5, n: int = 10,
                  r: int = 3) -> SumTensor:
    """``sum_i decay^-i T_i`` with rank-``r`` TTs whose cores are ``N(0, 1/(r^2 n))``."""
    rng = np.random.default_rng(seed)
    dims = check_shape((n,) * d)
    ranks = clip_ranks(dims, r)
    std = 1.0 / (r * np.sqrt(n))
    members = []
    for i in range(count):
        cores = _random_tt(rng, dims, ranks, std)
        cores[0] = cores[0] * float(decay) ** (-i)
        members.append(TTTensor(cores))
    return SumTensor(tuple(members))


def gen_random_cp(seed: int = 0, n_terms: int = 100, d: int = 5, n: int = 10, power: float = 5.0) -> CPTensor:
    """``sum_i i^-power v_1i x ... x v_di`` with unit-norm Gaussian factor rows."""
    rng = np.random.default_rng(seed)
    dims = check_shape((n,) * d)
    factors = []
    for nm in dims:
        v = rng.standard_normal((n_terms, nm))
        factors.append(v / np.linalg.norm(v, axis=1, keepdims=True))
    factors[0] = factors[0] * (np.arange(1, n_terms + 1, dtype=np.float64) ** -power)[:, None]
    return CPTensor(tuple(factors))
