import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stta import CPTensor, DenseTensor, SparseTensor, TTTensor, TuckerTensor  # noqa: E402


def random_tt(rng, dims, ranks, scale=1.0):
    full = (1,) + tuple(ranks) + (1,)
    return TTTensor([scale * rng.standard_normal((full[i], n, full[i + 1])) for i, n in enumerate(dims)])


def random_sparse(rng, dims, nnz):
    total = int(np.prod(dims))
    flat = rng.choice(total, size=nnz, replace=False)
    idx = np.stack(np.unravel_index(flat, dims), axis=1)
    return SparseTensor(tuple(dims), idx, rng.standard_normal(nnz))


def random_cp(rng, dims, n_terms):
    return CPTensor(tuple(rng.standard_normal((n_terms, n)) for n in dims))


def random_tucker(rng, dims, core_dims):
    return TuckerTensor(rng.standard_normal(core_dims), tuple(rng.standard_normal((n, s)) for n, s in zip(dims, core_dims)))


def random_dense(rng, dims):
    return DenseTensor(rng.standard_normal(dims))


def rel(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    den = np.linalg.norm(b)
    return np.linalg.norm(a - b) / (den if den > 0 else 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
