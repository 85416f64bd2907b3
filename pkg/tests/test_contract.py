import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poissonchaos.contract import (
    contraction_table,
    gamma_norm_sq,
    gamma_operator,
    prop41_residuals,
    star,
)
from poissonchaos.errors import (
    InvalidContractionIndices,
    InvalidOrder,
    OrderTooSmall,
    SizeMismatch,
    WeightLengthMismatch,
)
from poissonchaos.experiments import pair_partition_kernel
from poissonchaos.kernels import (
    GeneralKernel,
    WeightVector,
    build_symmetric,
    embed,
    inner_product,
    l2_norm,
    symmetrize,
)

from oracles import contraction_norm_sq_closed, dense_general, random_kernel, random_weights, star_dense
from strategies import kernels, weights_for


def _running(c=0.5):
    return embed(build_symmetric(2, 2, [((1, 2), c)]))


# --- star -------------------------------------------------------------------

def test_star_integrate_one():
    c = 0.7
    s = star(_running(c), _running(c), 1, 1, WeightVector.ones(2))
    assert s.coeffs == pytest.approx({(1, 1): c * c, (2, 2): c * c})
    assert inner_product(s, s) == pytest.approx(2 * c ** 4)


def test_star_identify_two_integrate_one():
    c, lam = 0.7, (2.0, 5.0)
    s = star(_running(c), _running(c), 2, 1, WeightVector(lam))
    assert s.coeffs == pytest.approx({(1,): c * c / math.sqrt(2.0), (2,): c * c / math.sqrt(5.0)})
    assert inner_product(s, s) == pytest.approx(c ** 4 * (1 / 2.0 + 1 / 5.0))


def test_star_tensor_product():
    g = embed(build_symmetric(2, 4, [((1, 2), 0.5), ((3, 4), -1.0), ((1, 4), 2.0)]))
    s = star(g, g, 0, 0, WeightVector.ones(4))
    assert s.k == 4
    assert inner_product(s, s) == pytest.approx(inner_product(g, g) ** 2, rel=1e-14)


def test_star_validation():
    g = _running()
    with pytest.raises(InvalidContractionIndices):
        star(g, g, 1, 2, WeightVector.ones(2))
    with pytest.raises(InvalidContractionIndices):
        star(g, g, 3, 0, WeightVector.ones(2))
    with pytest.raises(SizeMismatch):
        star(g, embed(build_symmetric(2, 3, [((1, 2), 1.0)])), 1, 1, WeightVector.ones(3))
    with pytest.raises(WeightLengthMismatch):
        star(g, g, 1, 1, WeightVector.ones(1))


def test_star_matches_dense_einsum(rnd):
    for _ in range(60):
        p, q = rnd.randint(1, 3), rnd.randint(1, 3)
        N = rnd.randint(max(p, q), 5)
        w = random_weights(rnd, N)
        # unsymmetric general kernels exercise the coordinate ordering
        h1 = GeneralKernel.from_dict(p, N, {tuple(rnd.randint(1, N) for _ in range(p)): rnd.uniform(-1, 1)
                                            for _ in range(6)})
        h2 = GeneralKernel.from_dict(q, N, {tuple(rnd.randint(1, N) for _ in range(q)): rnd.uniform(-1, 1)
                                            for _ in range(6)})
        for r in range(min(p, q) + 1):
            for l in range(r + 1):
                got = star(h1, h2, r, l, w)
                want = star_dense(h1, h2, r, l, w.lam)
                if got.k == 0:
                    assert got.value == pytest.approx(float(want), rel=1e-12, abs=1e-14)
                else:
                    np.testing.assert_allclose(dense_general(got), want, rtol=1e-12, atol=1e-14)


def test_plain_contraction_matches_closed_form(rnd):
    for _ in range(40):
        q = rnd.randint(2, 4)
        N = rnd.randint(q, 6)
        f = random_kernel(rnd, q, N)
        w = random_weights(rnd, N)
        g = embed(f)
        for p in range(1, q):
            s = star(g, g, p, p, w)
            assert inner_product(s, s) == pytest.approx(contraction_norm_sq_closed(f, p), rel=1e-10, abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(kernels(qs=(2, 3)), st.data())
def test_plain_contraction_ignores_intensities(f, data):
    g = embed(f)
    w1 = data.draw(weights_for(f.N))
    w2 = data.draw(weights_for(f.N))
    for r in range(1, f.q + 1):
        a, b = star(g, g, r, r, w1), star(g, g, r, r, w2)
        assert inner_product(a, a) == pytest.approx(inner_product(b, b), rel=1e-12, abs=1e-15)


# --- gamma ------------------------------------------------------------------

def test_gamma_scalar_times_scalar():
    a, b = GeneralKernel.scalar(2.0, 3), GeneralKernel.scalar(-1.5, 3)
    assert gamma_operator(a, b, 0, WeightVector.ones(3)).value == -3.0


def test_gamma_scalar_times_kernel():
    h = embed(build_symmetric(2, 3, [((1, 3), 0.5)]))
    out = gamma_operator(GeneralKernel.scalar(2.0, 3), h, 2, WeightVector.ones(3))
    assert out.coeffs == pytest.approx({t: 2.0 * c for t, c in h.coeffs.items()})


def test_gamma_order_zero_is_inner_product():
    f1 = build_symmetric(2, 4, [((1, 2), 0.5), ((2, 3), 1.5), ((1, 4), -1.0)])
    f2 = build_symmetric(2, 4, [((1, 2), 2.0), ((2, 3), -0.25), ((3, 4), 3.0)])
    g1, g2 = embed(f1), embed(f2)
    out = gamma_operator(g1, g2, 0, WeightVector((1.0, 2.0, 3.0, 4.0)))
    assert out.value == pytest.approx(2 * inner_product(g1, g2), rel=1e-14)


def test_gamma_top_order_is_symmetrized_tensor_product():
    g1 = embed(build_symmetric(1, 3, [((1,), 0.5), ((2,), 1.0)]))
    g2 = embed(build_symmetric(2, 3, [((1, 3), 2.0)]))
    w = WeightVector.ones(3)
    got = gamma_operator(g1, g2, 3, w)
    want = symmetrize(star(g1, g2, 0, 0, w))
    assert got.coeffs == pytest.approx(want.coeffs)


def test_gamma_order_range():
    g = _running()
    with pytest.raises(InvalidOrder):
        gamma_operator(g, g, 5, WeightVector.ones(2))
    g1 = embed(build_symmetric(1, 2, [((1,), 1.0)]))
    with pytest.raises(InvalidOrder):
        gamma_operator(g1, g, 0, WeightVector.ones(2))


def test_gamma_matches_dense_sum(rnd):
    for _ in range(30):
        p, q = rnd.randint(1, 3), rnd.randint(1, 3)
        N = rnd.randint(max(p, q), 4)
        w = random_weights(rnd, N)
        g1 = embed(random_kernel(rnd, p, N, 4))
        g2 = embed(random_kernel(rnd, q, N, 4))
        for k in range(abs(p - q), p + q + 1):
            want = np.zeros((N,) * k) if k else 0.0
            for r in range(min(p, q) + 1):
                l = p + q - r - k
                if 0 <= l <= r:
                    wt = math.factorial(r) * math.comb(p, r) * math.comb(q, r) * math.comb(r, l)
                    want = want + wt * star_dense(g1, g2, r, l, w.lam)
            if k:
                perms = list(itertools.permutations(range(k)))
                want = sum(np.transpose(want, pm) for pm in perms) / len(perms)
            got = gamma_operator(g1, g2, k, w)
            if k == 0:
                assert got.value == pytest.approx(float(want), rel=1e-12, abs=1e-14)
            else:
                np.testing.assert_allclose(dense_general(got), want, rtol=1e-11, atol=1e-13)
            assert gamma_norm_sq(g1, g2, k, w) == pytest.approx(float(np.sum(np.square(want))), rel=1e-11,
                                                                abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(kernels(qs=(1, 2, 3), max_N=5, max_support=5), st.data())
def test_gamma_output_symmetric_and_norm_consistent(f, data):
    w = data.draw(weights_for(f.N))
    g = embed(f)
    for k in range(0, 2 * f.q + 1):
        G = gamma_operator(g, g, k, w)
        assert symmetrize(G).coeffs == pytest.approx(G.coeffs, rel=1e-12, abs=1e-14)
        assert gamma_norm_sq(g, g, k, w) == pytest.approx(inner_product(G, G), rel=1e-10, abs=1e-14)


# --- tables and the inequality suite -----------------------------------------

def test_table_running_example():
    t = contraction_table(build_symmetric(2, 2, [((1, 2), 0.5)]), WeightVector.ones(2))
    assert t.rows[(1, 1)] == pytest.approx(math.sqrt(2 * 0.5 ** 4), rel=1e-14)
    assert t.rows[(2, 2)] == pytest.approx(0.5)
    assert set(t.rows) == {(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)}
    assert t.contraction_max() == t.rows[(1, 1)]


def test_table_order_one_statistic():
    f = build_symmetric(1, 4, [((i,), 0.5) for i in range(1, 5)])
    t = contraction_table(f, WeightVector((2.0,) * 4))
    # four terms of (1/2)^4 / 2
    assert t.cond3a == pytest.approx(0.125, rel=1e-15)
    assert t.contraction_max() == t.cond3a


def test_table_empty_kernel():
    t = contraction_table(build_symmetric(3, 4, []), WeightVector.ones(4))
    assert all(v == 0.0 for v in t.rows.values()) and t.integral4 == 0.0


def test_prop41_needs_order_two():
    with pytest.raises(OrderTooSmall):
        prop41_residuals(build_symmetric(1, 2, [((1,), 1.0)]), WeightVector.ones(2))


def test_prop41_residual_names():
    names = [r.name for r in prop41_residuals(build_symmetric(3, 4, [((1, 2, 3), 1.0)]), WeightVector.ones(4))]
    assert names == ["a", "a'", "b1[l=1]", "b1[l=2]", "b2[r=1,l=1]", "b2[r=2,l=1]", "b2[r=2,l=2]"]


@settings(max_examples=80, deadline=None)
@given(kernels(qs=(2, 3), max_N=7), st.data())
def test_prop41_slack_nonnegative(f, data):
    w = data.draw(weights_for(f.N))
    for res in prop41_residuals(f, w):
        assert res.slack >= -1e-10, res


@pytest.mark.parametrize("lam", [1.0, 2.0, 0.7])
def test_prop41_b1_tight_for_disjoint_pairs(lam):
    f = pair_partition_kernel(5)
    res = {r.name: r for r in prop41_residuals(f, WeightVector((lam,) * f.N))}
    assert abs(res["b1[l=1]"].slack) <= 1e-10


def test_prop41_b1_tight_single_entry_running_example():
    res = {r.name: r for r in prop41_residuals(build_symmetric(2, 2, [((1, 2), 0.5)]), WeightVector((2.0, 2.0)))}
    assert abs(res["b1[l=1]"].slack) <= 1e-10


def test_prop41_b1_not_tight_with_overlaps():
    f = build_symmetric(2, 3, [((1, 2), 1.0), ((1, 3), 1.0)])
    res = {r.name: r for r in prop41_residuals(f, WeightVector.ones(3))}
    assert res["b1[l=1]"].slack > 0.1


def test_contraction_norm_nonneg_and_lnorm_consistent(rnd):
    f = random_kernel(rnd, 3, 6)
    w = random_weights(rnd, 6)
    t = contraction_table(f, w)
    g = embed(f)
    for (r, l), v in t.rows.items():
        if (r, l) != (3, 3):
            assert v == pytest.approx(l2_norm(star(g, g, r, l, w)))
        assert v >= 0.0
