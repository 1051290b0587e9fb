"""Streaming tensor-train approximation by two-sided randomized sketching."""

from .assemble import LEFT_SMALLER, RIGHT_SMALLER, SttaConfig, assemble, orientation, stta_approximate, stta_sketch
from .baselines import MethodKind, gn_approx, gn_matrix, hmt_matrix, otts, tt_hmt, tt_round, tt_svd
from .drm import (
    GaussianChain,
    TTChain,
    chain_extend,
    hashed_gaussian_row,
    hashed_gaussian_rows,
    make_chain,
    mode_seed,
    normal_inverse_cdf,
    splitmix64,
    tt_drm_gather,
    tt_drm_new,
)
from .formats import (
    CPTensor,
    DenseTensor,
    MaterializationError,
    SparseTensor,
    SumTensor,
    TTTensor,
    TuckerTensor,
    clip_ranks,
    interface_matrices,
    norm,
    rel_error,
    to_dense,
    tt_add,
    tt_entry,
    tt_inner,
    tt_norm,
    unfold,
)
from .linalg import SVDResult, lstsq_pinv, pinv, qr_economy, right_lstsq_pinv, svd
from .sketch import (
    FingerprintMismatch,
    SketchPack,
    sketch,
    sketch_block_extend,
    sketch_cp,
    sketch_dense,
    sketch_modes,
    sketch_sparse,
    sketch_sum,
    sketch_tt,
    sketch_tucker,
)

__version__ = "0.1.0"
