"""Independent reference computations used by the tests.

Everything here is written with explicit loops or textbook formulas and avoids
the package's own reshaping and contraction code.
"""

import itertools
import math

import numpy as np

MASK = (1 << 64) - 1


def splitmix64_ref(x):
    z = (x + 0x9E3779B97F4A7C15) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def linear(idx, dims):
    """Row-major position of a 0-based multi-index (first index slowest)."""
    pos = 0
    for i, n in zip(idx, dims):
        pos = pos * n + i
    return pos


def brute_unfold(values, mu):
    dims = values.shape
    rows = math.prod(dims[:mu])
    cols = math.prod(dims[mu:])
    out = np.zeros((rows, cols))
    for idx in itertools.product(*[range(n) for n in dims]):
        out[linear(idx[:mu], dims[:mu]), linear(idx[mu:], dims[mu:])] = values[idx]
    return out


def tt_dense(cores):
    """Entry loop over the matrix-product formula."""
    dims = [c.shape[1] for c in cores]
    out = np.zeros(dims)
    for idx in itertools.product(*[range(n) for n in dims]):
        v = np.ones((1, 1))
        for c, i in zip(cores, idx):
            v = v @ c[:, i, :]
        out[idx] = v[0, 0]
    return out


def brute_sketch(values, ys, xs):
    """Psi and Omega by accumulating every tensor entry separately.

    ``ys[mu]`` is Y_mu for mu = 0..d-1 (``ys[0] = [[1]]``), ``xs[mu]`` is X_mu
    for mu = 1..d (``xs[d] = [[1]]``; ``xs[0]`` unused).
    """
    dims = values.shape
    d = len(dims)
    psi = [np.zeros((ys[mu].shape[1], dims[mu], xs[mu + 1].shape[1])) for mu in range(d)]
    omega = [np.zeros((ys[mu].shape[1], xs[mu].shape[1])) for mu in range(1, d)]
    for idx in itertools.product(*[range(n) for n in dims]):
        v = values[idx]
        if v == 0.0:
            continue
        for mu in range(1, d + 1):
            yrow = ys[mu - 1][linear(idx[: mu - 1], dims[: mu - 1])]
            xrow = xs[mu][linear(idx[mu:], dims[mu:])]
            psi[mu - 1][:, idx[mu - 1], :] += v * np.outer(yrow, xrow)
            if mu < d:
                yrow2 = ys[mu][linear(idx[:mu], dims[:mu])]
                omega[mu - 1] += v * np.outer(yrow2, xrow)
    return psi, omega


def chain_mats(left, right, d):
    ys = [left.matrix(mu) for mu in range(d)]
    xs = [None] + [right.matrix(mu) for mu in range(1, d + 1)]
    return ys, xs


def gn(a, x, y):
    ax = a @ x
    return ax @ np.linalg.pinv(y.T @ ax) @ (y.T @ a)


def oblique_projector(tmu, x, y):
    """P = T X (Y^T T X)^+ Y^T."""
    tx = tmu @ x
    return tx @ np.linalg.pinv(y.T @ tx) @ y.T


def stta_projectors(values, ys, xs):
    """Explicit P_1..P_{d-1} from the unfoldings and DRM matrices."""
    d = values.ndim
    return [oblique_projector(brute_unfold(values, mu), xs[mu], ys[mu]) for mu in range(1, d)]


def lift(p, dims, mu, upto):
    """P_mu (acting on modes 1..mu) tensored with the identity on modes mu+1..upto."""
    return np.kron(p, np.eye(math.prod(dims[mu:upto])))


def proj_form(values, projs):
    """(P_1 x I)...(P_{d-2} x I) P_{d-1} T^{<=d-1}."""
    dims = values.shape
    d = len(dims)
    out = projs[d - 2] @ brute_unfold(values, d - 1)
    for mu in range(d - 2, 0, -1):
        out = lift(projs[mu - 1], dims, mu, d - 1) @ out
    return out


def hilbert_entry(idx1):
    d = len(idx1)
    return 1.0 / (sum(idx1) - d + 1)


def hashed_row_ref(indices1, dims, r, seed, stride=None, col_start=0):
    """Hashed Gaussian row with Python integers, struct reinterpretation and scipy's ndtri."""
    import struct

    from scipy.special import ndtri

    stride = r if stride is None else stride
    m = 0
    for i, n in zip(indices1, dims):
        m = (n * (m + i)) & MASK
    m = (m * stride + splitmix64_ref(seed)) & MASK
    out = []
    for j in range(col_start + 1, col_start + r + 1):
        h = splitmix64_ref((m + j) & MASK)
        h = (h & ((1 << 61) - 1)) | (1 << 61)
        x = struct.unpack("<d", struct.pack("<Q", (h & ((1 << 52) - 1)) | 0x3FE0000000000000))[0]
        x = min(max(2.0 * x - 1.0, 2.0**-52), 1.0 - 2.0**-52)
        out.append(float(ndtri(x)))
    return np.array(out)
