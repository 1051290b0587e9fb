"""Assembly of a TT from a sketch pack, and the one-shot STTA driver."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .drm import make_chain
from .formats import TTTensor, check_ranks
from .linalg import EPS, lstsq_pinv, right_lstsq_pinv
from .sketch import sketch

RIGHT_SMALLER = "right-smaller"
LEFT_SMALLER = "left-smaller"


def orientation(left_ranks, right_ranks) -> str:
    """Which side carries the output rank; mixed directions are rejected."""
    if len(left_ranks) != len(right_ranks):
        raise ValueError("left and right rank tuples differ in length")
    if all(r < l for l, r in zip(left_ranks, right_ranks)):
        return RIGHT_SMALLER
    if all(l < r for l, r in zip(left_ranks, right_ranks)):
        return LEFT_SMALLER
    raise ValueError(
        f"ranks {tuple(left_ranks)} / {tuple(right_ranks)} must satisfy r^R < r^L "
        "for every mode or r^L < r^R for every mode"
    )


@dataclass(frozen=True)
class SttaConfig:
    left_ranks: tuple
    right_ranks: tuple
    seed: int = 0
    drm_kind: str = "gaussian"
    lstsq_rtol: float = EPS

    def __post_init__(self):
        object.__setattr__(self, "left_ranks", tuple(int(r) for r in self.left_ranks))
        object.__setattr__(self, "right_ranks", tuple(int(r) for r in self.right_ranks))
        if self.drm_kind not in ("gaussian", "tt"):
            raise ValueError(f"unknown DRM kind {self.drm_kind!r}")
        side = orientation(self.left_ranks, self.right_ranks)
        small, big = (
            (self.right_ranks, self.left_ranks) if side == RIGHT_SMALLER else (self.left_ranks, self.right_ranks)
        )
        if any(s >= b - 1 for s, b in zip(small, big)):
            warnings.warn("oversampling below 2 in some mode; error bounds do not apply", stacklevel=3)

    @classmethod
    def with_oversampling(cls, ranks, factor=2, extra=0, **kwargs):
        """Right ranks ``ranks`` and left ranks ``factor * r + extra``."""
        ranks = tuple(int(r) for r in ranks)
        left = tuple(factor * r + extra for r in ranks)
        return cls(left, ranks, **kwargs)

    @property
    def orientation(self) -> str:
        return orientation(self.left_ranks, self.right_ranks)

    @property
    def output_ranks(self):
        return tuple(min(l, r) for l, r in zip(self.left_ranks, self.right_ranks))

    def chains(self, dims):
        d = len(dims)
        check_ranks(self.left_ranks, d)
        check_ranks(self.right_ranks, d)
        left = make_chain(self.drm_kind, "left", dims, self.left_ranks, self.seed)
        right = make_chain(self.drm_kind, "right", dims, self.right_ranks, self.seed)
        return left, right


def assemble(pack, config: SttaConfig | None = None, rtol: float | None = None) -> TTTensor:
    """Build TT cores from ``pack``.

    The orientation follows from the pack ranks (``config`` is only consulted
    for the solver cutoff). With ``r^R < r^L`` the cores are
    ``C_mu = Omega_{mu-1}^+ Psi_mu`` contracted on the leading index; otherwise
    ``C_mu = Psi_mu Omega_mu^+`` contracted on the trailing index.
    """
    if rtol is None:
        rtol = config.lstsq_rtol if config is not None else EPS
    side = orientation(pack.left_ranks, pack.right_ranks)
    if config is not None and (
        tuple(config.left_ranks) != tuple(pack.left_ranks) or tuple(config.right_ranks) != tuple(pack.right_ranks)
    ):
        raise ValueError("sketch ranks do not match the configuration")
    d = pack.d
    cores = []
    if side == RIGHT_SMALLER:
        cores.append(np.array(pack.psi[0]))
        for mu in range(1, d):
            p = pack.psi[mu]
            b = lstsq_pinv(pack.omega[mu - 1], p.reshape(p.shape[0], -1), rtol)
            cores.append(b.reshape(b.shape[0], p.shape[1], p.shape[2]))
    else:
        for mu in range(d - 1):
            p = pack.psi[mu]
            b = right_lstsq_pinv(pack.omega[mu], p.reshape(-1, p.shape[2]), rtol)
            cores.append(b.reshape(p.shape[0], p.shape[1], b.shape[1]))
        cores.append(np.array(pack.psi[d - 1]))
    return TTTensor(cores)


def stta_sketch(t, config: SttaConfig, workers=None, cap=None):
    left, right = config.chains(tuple(t.shape))
    return sketch(t, left, right, workers=workers, cap=cap)


def stta_approximate(t, config: SttaConfig, workers=None, cap=None) -> TTTensor:
    """Sketch ``t`` with the chains described by ``config`` and assemble."""
    return assemble(stta_sketch(t, config, workers, cap), config)
