"""Dense matrix kernels: economy QR, SVD and truncated-pseudoinverse solves."""

from typing import NamedTuple

import numpy as np

EPS = np.finfo(np.float64).eps


class SVDResult(NamedTuple):
    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray


class SVDConvergenceError(np.linalg.LinAlgError):
    pass


def qr_economy(a):
    """Reduced QR, ``Q`` of shape ``(m, min(m, n))``."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("qr_economy expects a matrix")
    return np.linalg.qr(a, mode="reduced")


def orth(a):
    return qr_economy(a)[0]


def svd(a) -> SVDResult:
    """Thin SVD. Falls back to the QR-iteration driver if divide-and-conquer fails."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("svd expects a matrix")
    if a.size == 0:
        k = min(a.shape)
        return SVDResult(np.zeros((a.shape[0], k)), np.zeros(k), np.zeros((k, a.shape[1])))
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise SVDConvergenceError(str(exc)) from exc
    return SVDResult(u, s, vt)


def _truncated_pinv_factors(a, rtol):
    if rtol is None:
        rtol = EPS
    if rtol < 0:
        raise ValueError("rtol must be nonnegative")
    u, s, vt = svd(a)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0], s[:0], vt[:0]
    keep = s > rtol * s[0]
    return u[:, keep], s[keep], vt[keep]


def lstsq_pinv(a, b, rtol=None):
    """Minimum-norm solution ``A^+ B``; singular values below ``rtol * s_max`` are dropped."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row mismatch {a.shape} vs {b.shape}")
    u, s, vt = _truncated_pinv_factors(a, rtol)
    x = vt.T @ ((u.T @ b) / s[:, None])
    return x[:, 0] if vector else x


def right_lstsq_pinv(a, b, rtol=None):
    """``B A^+``, the solution of ``min ||X A - B||_F`` with the same cutoff rule."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column mismatch {a.shape} vs {b.shape}")
    u, s, vt = _truncated_pinv_factors(a, rtol)
    return ((b @ vt.T) / s[None, :]) @ u.T


def pinv(a, rtol=None):
    u, s, vt = _truncated_pinv_factors(np.asarray(a, dtype=np.float64), rtol)
    return (vt.T / s[None, :]) @ u.T
