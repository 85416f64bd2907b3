"""Hypothesis strategies for kernels and weights."""

import itertools

from hypothesis import strategies as st

from poissonchaos.kernels import GeneralKernel, WeightVector, build_symmetric


@st.composite
def kernels(draw, qs=(1, 2, 3), max_N=6, max_support=8):
    q = draw(st.sampled_from(qs))
    N = draw(st.integers(q, max_N))
    tuples = list(itertools.combinations(range(1, N + 1), q))
    chosen = draw(st.lists(st.sampled_from(tuples), min_size=0, max_size=max_support, unique=True))
    vals = draw(st.lists(st.floats(-2, 2).filter(lambda v: abs(v) > 1e-3), min_size=len(chosen),
                         max_size=len(chosen)))
    return build_symmetric(q, N, list(zip(chosen, vals)))


@st.composite
def weights_for(draw, N, lo=0.5, hi=4.0):
    return WeightVector(tuple(draw(st.lists(st.floats(lo, hi), min_size=N, max_size=N))))


@st.composite
def general_kernels(draw, max_k=3, max_N=4):
    k = draw(st.integers(1, max_k))
    N = draw(st.integers(1, max_N))
    idx = st.tuples(*[st.integers(1, N)] * k)
    d = draw(st.dictionaries(idx, st.floats(-2, 2), max_size=6))
    return GeneralKernel.from_dict(k, N, d)
