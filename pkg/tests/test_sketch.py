import numpy as np
import pytest
from conftest import random_cp, random_dense, random_sparse, random_tt, random_tucker, rel

from oracles import brute_sketch, chain_mats
from stta import (
    CPTensor,
    DenseTensor,
    SparseTensor,
    SumTensor,
    TTTensor,
    TuckerTensor,
    sketch,
    sketch_block_extend,
    sketch_cp,
    sketch_dense,
    sketch_sparse,
    sketch_sum,
    sketch_tt,
    sketch_tucker,
    to_dense,
)
from stta.drm import GaussianChain, chain_extend, make_chain, tt_drm_new
from stta.sketch import FingerprintMismatch, SketchPack, bilinear_flops, extension_flops


def chains(kind, dims, left, right, seed=3):
    d = len(dims)
    lr = (left,) * (d - 1) if isinstance(left, int) else left
    rr = (right,) * (d - 1) if isinstance(right, int) else right
    return make_chain(kind, "left", dims, lr, seed), make_chain(kind, "right", dims, rr, seed + 1)


def pack_rel(a: SketchPack, b: SketchPack):
    num = sum(np.linalg.norm(x - y) ** 2 for x, y in zip(a.psi + a.omega, b.psi + b.omega))
    den = sum(np.linalg.norm(y) ** 2 for y in b.psi + b.omega)
    return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))


def assert_zero(pack):
    for a in pack.psi + pack.omega:
        assert not np.any(a)


class TestDense:
    @pytest.mark.parametrize("kind", ["gaussian", "tt"])
    def test_brute_force(self, rng, kind):
        t = random_dense(rng, (3, 3, 3, 3))
        left, right = chains(kind, t.shape, 4, 2)
        pack = sketch_dense(t, left, right)
        psi, omega = brute_sketch(t.values, *chain_mats(left, right, 4))
        for a, b in zip(pack.psi, psi):
            assert rel(a, b) <= 1e-12
        for a, b in zip(pack.omega, omega):
            assert rel(a, b) <= 1e-12

    def test_shapes(self, rng):
        t = random_dense(rng, (3, 4, 5))
        pack = sketch(t, *chains("gaussian", t.shape, (5, 6), (2, 3)))
        assert [p.shape for p in pack.psi] == [(1, 3, 2), (5, 4, 3), (6, 5, 1)]
        assert [o.shape for o in pack.omega] == [(5, 2), (6, 3)]

    def test_zero(self):
        t = DenseTensor(np.zeros((3, 3, 3)))
        assert_zero(sketch(t, *chains("gaussian", t.shape, 4, 2)))

    def test_scaling_exact(self, rng):
        t = random_dense(rng, (3, 3, 3))
        ch = chains("gaussian", t.shape, 4, 2)
        a = sketch(DenseTensor(2.0 * t.values), *ch)
        b = sketch(t, *ch).scale(2.0)
        for x, y in zip(a.psi + a.omega, b.psi + b.omega):
            np.testing.assert_array_equal(x, y)

    @pytest.mark.parametrize("kind", ["gaussian", "tt"])
    def test_linearity(self, rng, kind):
        t1, t2 = random_dense(rng, (3, 4, 3)), random_dense(rng, (3, 4, 3))
        ch = chains(kind, t1.shape, 4, 2)
        lhs = sketch(DenseTensor(1.5 * t1.values - 0.7 * t2.values), *ch)
        rhs = sketch(t1, *ch).scale(1.5) + sketch(t2, *ch).scale(-0.7)
        assert pack_rel(lhs, rhs) <= 1e-13

    def test_shape_mismatch(self, rng):
        t = random_dense(rng, (3, 3, 3))
        with pytest.raises(ValueError):
            sketch(t, *chains("gaussian", (3, 3, 4), 4, 2))
        left, right = chains("gaussian", t.shape, 4, 2)
        with pytest.raises(ValueError):
            sketch(t, right, left)

    def test_type_guard(self, rng):
        with pytest.raises(TypeError):
            sketch_dense(random_sparse(rng, (3, 3), 2), *chains("gaussian", (3, 3), 2, 1))


class TestSparse:
    @pytest.mark.parametrize("kind", ["gaussian", "tt"])
    def test_matches_dense(self, rng, kind):
        t = random_sparse(rng, (5, 5, 5, 5, 5), 100)
        ch = chains(kind, t.shape, 6, 3)
        assert pack_rel(sketch_sparse(t, *ch), sketch(to_dense(t), *ch)) <= 1e-12

    def test_single_entry_outer_product(self):
        dims = (3, 4, 2)
        t = SparseTensor.from_entries(dims, [((2, 3, 1), 2.5)])
        left, right = chains("gaussian", dims, 3, 2)
        pack = sketch(t, left, right)
        idx = np.array([[1, 2, 0]])
        for mu in range(1, 4):
            y = left.rows(mu - 1, idx)[0]
            x = right.rows(mu, idx)[0]
            expected = np.zeros(pack.psi[mu - 1].shape)
            expected[:, idx[0, mu - 1], :] = 2.5 * np.outer(y, x)
            np.testing.assert_allclose(pack.psi[mu - 1], expected, rtol=1e-15)
        for mu in range(1, 3):
            np.testing.assert_allclose(pack.omega[mu - 1], 2.5 * np.outer(left.rows(mu, idx)[0], right.rows(mu, idx)[0]),
                                       rtol=1e-15)

    def test_empty(self):
        t = SparseTensor.from_entries((3, 3, 3), [])
        assert_zero(sketch(t, *chains("tt", t.shape, 4, 2)))


class TestTT:
    def test_matches_dense(self, rng):
        t = random_tt(rng, (4, 4, 4, 4), (3, 3, 3))
        ch = chains("tt", t.shape, 5, 2)
        assert pack_rel(sketch_tt(t, *ch), sketch(to_dense(t), *ch)) <= 1e-11

    def test_rank_one_ones(self):
        dims = (2, 2)
        t = TTTensor([np.ones((1, 2, 1)), np.ones((1, 2, 1))])
        left, right = chains("tt", dims, 1, 1)
        pack = sketch_tt(t, left, right)
        y = left.cores[0][0, :, 0]
        x = right.cores[1][0, :, 0]
        assert pack.omega[0][0, 0] == pytest.approx(y.sum() * x.sum(), rel=1e-14)

    def test_multilinear_in_core(self, rng):
        t = random_tt(rng, (3, 4, 3), (2, 2))
        ch = chains("tt", t.shape, 4, 2)
        doubled = TTTensor([t.cores[0], 2.0 * t.cores[1], t.cores[2]])
        assert pack_rel(sketch(doubled, *ch), sketch(t, *ch).scale(2.0)) <= 1e-14

    def test_gaussian_chains_fall_back(self, rng):
        t = random_tt(rng, (3, 4, 3), (2, 2))
        ch = chains("gaussian", t.shape, 4, 2)
        assert pack_rel(sketch(t, *ch), sketch(to_dense(t), *ch)) <= 1e-12
        with pytest.raises(TypeError):
            sketch_tt(t, *ch)


class TestCP:
    def test_matches_dense(self, rng):
        t = random_cp(rng, (4, 4, 4, 4), 7)
        ch = chains("tt", t.shape, 5, 2)
        assert pack_rel(sketch_cp(t, *ch), sketch(to_dense(t), *ch)) <= 1e-11

    def test_single_term_matches_sparse_path(self, rng):
        t = random_cp(rng, (3, 4, 3), 1)
        ch = chains("tt", t.shape, 4, 2)
        sp = to_dense(t).values
        idx = np.argwhere(np.ones(sp.shape, bool))
        sparse = SparseTensor(sp.shape, idx, sp.ravel())
        assert pack_rel(sketch(t, *ch), sketch(sparse, *ch)) <= 1e-12

    def test_additive_over_terms(self, rng):
        t = random_cp(rng, (3, 3, 3), 4)
        ch = chains("tt", t.shape, 4, 2)
        parts = [sketch(CPTensor(tuple(f[k : k + 1] for f in t.factors)), *ch) for k in range(4)]
        assert pack_rel(sketch(t, *ch), sketch_sum(parts)) <= 1e-13


class TestTucker:
    def test_matches_dense(self, rng):
        t = random_tucker(rng, (4, 5, 4, 3), (2, 3, 2, 2))
        ch = chains("tt", t.shape, 5, 2)
        assert pack_rel(sketch_tucker(t, *ch), sketch(to_dense(t), *ch)) <= 1e-11

    def test_identity_factors(self, rng):
        core = rng.standard_normal((3, 3, 3))
        t = TuckerTensor(core, tuple(np.eye(3) for _ in range(3)))
        ch = chains("tt", (3, 3, 3), 4, 2)
        assert pack_rel(sketch(t, *ch), sketch(DenseTensor(core), *ch)) <= 1e-12

    def test_diagonal_core_matches_cp(self, rng):
        dims, s = (4, 3, 5), 3
        core = np.zeros((s, s, s))
        w = rng.standard_normal(s)
        core[np.arange(s), np.arange(s), np.arange(s)] = w
        factors = tuple(rng.standard_normal((n, s)) for n in dims)
        tucker = TuckerTensor(core, factors)
        cp = CPTensor((w[:, None] * factors[0].T,) + tuple(f.T for f in factors[1:]))
        ch = chains("tt", dims, 4, 2)
        assert pack_rel(sketch_tucker(tucker, *ch), sketch_cp(cp, *ch)) <= 1e-11

    def test_zero_core(self, rng):
        t = TuckerTensor(np.zeros((2, 2, 2)), tuple(rng.standard_normal((3, 2)) for _ in range(3)))
        assert_zero(sketch(t, *chains("tt", t.shape, 4, 2)))


class TestSum:
    @pytest.mark.parametrize("kind", ["gaussian", "tt"])
    def test_sum_of_sketches(self, rng, kind):
        t1, t2 = random_dense(rng, (3, 3, 3, 3)), random_tt(rng, (3, 3, 3, 3), (2, 2, 2))
        ch = chains(kind, t1.shape, 4, 2)
        lhs = sketch(t1, *ch) + sketch(t2, *ch)
        rhs = sketch(DenseTensor(t1.values + to_dense(t2).values), *ch)
        assert pack_rel(lhs, rhs) <= 1e-13
        assert pack_rel(sketch(SumTensor((t1, t2)), *ch), rhs) <= 1e-13

    def test_one_part_identity(self, rng):
        p = sketch(random_dense(rng, (3, 3)), *chains("gaussian", (3, 3), 3, 1))
        q = sketch_sum([p])
        for a, b in zip(p.psi + p.omega, q.psi + q.omega):
            np.testing.assert_array_equal(a, b)

    def test_permutation_rounding_only(self, rng):
        ch = chains("gaussian", (3, 3, 3), 4, 2)
        parts = [sketch(random_dense(rng, (3, 3, 3)), *ch) for _ in range(6)]
        assert pack_rel(sketch_sum(parts), sketch_sum(parts[::-1])) <= 1e-14

    def test_fingerprint_mismatch(self, rng):
        t = random_dense(rng, (3, 3, 3))
        a = sketch(t, *chains("gaussian", t.shape, 4, 2, seed=1))
        b = sketch(t, *chains("gaussian", t.shape, 4, 2, seed=7))
        with pytest.raises(FingerprintMismatch):
            a + b
        c = sketch(t, *chains("tt", t.shape, 4, 2, seed=1))
        with pytest.raises(FingerprintMismatch):
            a + c

    def test_workers_bitwise(self, rng):
        t = SumTensor(tuple(random_tt(rng, (3, 4, 3), (2, 2)) for _ in range(8)))
        ch = chains("gaussian", t.shape, 4, 2)
        a, b = sketch(t, *ch), sketch(t, *ch, workers=4)
        for x, y in zip(a.psi + a.omega, b.psi + b.omega):
            np.testing.assert_array_equal(x, y)


class TestBlockExtend:
    def test_zero_extension(self, rng):
        t = random_dense(rng, (3, 3, 3, 3))
        left, right = chains("gaussian", t.shape, 2, 1)
        old = sketch(t, left, right)
        new = sketch_block_extend(old, t, (left, right), (chain_extend(left, (0,) * 3), chain_extend(right, (0,) * 3)))
        assert new is old

    @pytest.mark.parametrize("make", [lambda rng: random_dense(rng, (3, 3, 3, 3)),
                                      lambda rng: random_sparse(rng, (3, 3, 3, 3), 20),
                                      lambda rng: random_tt(rng, (3, 3, 3, 3), (2, 2, 2))])
    def test_matches_direct(self, rng, make):
        t = make(rng)
        left, right = chains("gaussian", t.shape, 2, 2)
        old = sketch(t, left, right)
        nl, nr = chain_extend(left, (2, 2, 2)), chain_extend(right, (2, 2, 2))
        ext = sketch_block_extend(old, t, (left, right), (nl, nr))
        direct = sketch(t, nl, nr)
        assert ext.left_ranks == (4, 4, 4) and ext.right_ranks == (4, 4, 4)
        assert pack_rel(ext, direct) <= 1e-13
        assert ext.fingerprint == direct.fingerprint
        for mu in range(4):
            o = old.psi[mu]
            np.testing.assert_array_equal(ext.psi[mu][: o.shape[0], :, : o.shape[2]], o)
        for mu in range(3):
            o = old.omega[mu]
            np.testing.assert_array_equal(ext.omega[mu][: o.shape[0], : o.shape[1]], o)

    def test_one_sided(self, rng):
        t = random_dense(rng, (3, 3, 3))
        left, right = chains("gaussian", t.shape, 3, 1)
        nl = chain_extend(left, (2, 1))
        ext = sketch_block_extend(sketch(t, left, right), t, (left, right), (nl, right))
        assert pack_rel(ext, sketch(t, nl, right)) <= 1e-13

    def test_flop_count(self):
        nnz = 81
        assert 0 < extension_flops(nnz, (2,) * 3, (2,) * 3, (4,) * 3, (4,) * 3) < bilinear_flops(nnz, (4,) * 3, (4,) * 3)

    def test_rejects_non_prefix(self, rng):
        t = random_dense(rng, (3, 3, 3))
        left, right = chains("gaussian", t.shape, 2, 1)
        old = sketch(t, left, right)
        other = GaussianChain("left", t.shape, (4, 4), 99)
        with pytest.raises(ValueError):
            sketch_block_extend(old, t, (left, right), (other, right))
        tl = tt_drm_new(t.shape, (2, 2), "left", 0)
        with pytest.raises(ValueError):
            sketch_block_extend(old, t, (left, right), (tl, right))


class TestSketchPack:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            SketchPack((np.zeros((1, 3, 2)),), (), (3, 3), (4,), (2,), ())

    def test_entry_count(self, rng):
        pack = sketch(random_dense(rng, (3, 4)), *chains("gaussian", (3, 4), 3, 2))
        assert pack.entry_count() == 1 * 3 * 2 + 3 * 4 * 1 + 3 * 2
