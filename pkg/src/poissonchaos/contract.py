"""Star contractions, the product-formula operator and contraction-norm tables."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import (
    InvalidContractionIndices,
    InvalidOrder,
    OrderTooSmall,
    SizeMismatch,
    WeightLengthMismatch,
)
from .kernels import (
    GeneralKernel,
    SymmetricKernel,
    WeightVector,
    embed,
    inner_product,
    l2_norm,
    p_integral,
    symmetrize,
    symmetrized_norm_sq,
)


def _check_weights(N: int, w: WeightVector) -> None:
    if N > len(w):
        raise WeightLengthMismatch(f"kernel size {N} exceeds weight length {len(w)}")


def _star_terms(h1: GeneralKernel, h2: GeneralKernel, r: int, l: int, w: WeightVector, weight: float,
                acc: dict) -> None:
    # Join on the first r coordinates of both kernels. Integrated coordinates
    # (the first l) contribute <g_a, g_b> = delta_ab; the remaining r - l
    # identified ones contribute g_a * g_b = delta_ab * lambda_a**-0.5 * g_a.
    buckets: dict[tuple, list] = defaultdict(list)
    for t2, c2 in h2.coeffs.items():
        buckets[t2[:r]].append((t2[r:], c2))
    for t1, c1 in h1.coeffs.items():
        partners = buckets.get(t1[:r])
        if not partners:
            continue
        gamma = t1[l:r]
        scale = weight * c1
        for i in gamma:
            scale /= math.sqrt(w.at(i))
        head = gamma + t1[r:]
        for tail, c2 in partners:
            acc[head + tail].append(scale * c2)


def _validate_star(h1: GeneralKernel, h2: GeneralKernel, r: int, l: int, w: WeightVector) -> None:
    if h1.N != h2.N:
        raise SizeMismatch(f"kernel sizes differ: {h1.N} vs {h2.N}")
    _check_weights(h1.N, w)
    if not (0 <= l <= r <= min(h1.k, h2.k)):
        raise InvalidContractionIndices(
            f"need 0 <= l <= r <= min(p, q); got r={r}, l={l}, p={h1.k}, q={h2.k}")


def star(h1: GeneralKernel, h2: GeneralKernel, r: int, l: int, w: WeightVector) -> GeneralKernel:
    """Identify ``r`` leading coordinates of ``h1`` and ``h2`` and integrate out ``l`` of them.

    The output coordinates are ordered (identified-but-kept, rest of h1, rest of h2),
    giving order ``p + q - r - l``. ``r == l`` involves no intensities at all.
    """
    _validate_star(h1, h2, r, l, w)
    acc: dict[tuple, list] = defaultdict(list)
    _star_terms(h1, h2, r, l, w, 1.0, acc)
    return GeneralKernel.from_dict(h1.k + h2.k - r - l, h1.N, {t: math.fsum(v) for t, v in acc.items()})


def _gamma_raw(h1: GeneralKernel, h2: GeneralKernel, k: int, w: WeightVector) -> GeneralKernel:
    p, q = h1.k, h2.k
    if h1.N != h2.N:
        raise SizeMismatch(f"kernel sizes differ: {h1.N} vs {h2.N}")
    _check_weights(h1.N, w)
    if not abs(q - p) <= k <= p + q:
        raise InvalidOrder(f"k={k} outside [{abs(q - p)}, {p + q}]")
    acc: dict[tuple, list] = defaultdict(list)
    for r in range(min(p, q) + 1):
        l = p + q - r - k
        if 0 <= l <= r:
            weight = math.factorial(r) * math.comb(p, r) * math.comb(q, r) * math.comb(r, l)
            _star_terms(h1, h2, r, l, w, float(weight), acc)
    return GeneralKernel.from_dict(k, h1.N, {t: math.fsum(v) for t, v in acc.items()})


def gamma_operator(h1: GeneralKernel, h2: GeneralKernel, k: int, w: WeightVector) -> GeneralKernel:
    """Order-``k`` chaos coefficient of the product of two multiple integrals.

    Sums ``r! C(p,r) C(q,r) C(r,l)`` times the symmetrized ``star(h1, h2, r, l)``
    over all ``(r, l)`` with ``p + q - r - l == k``. With ``p == q`` and
    ``k == 0`` this collapses to the scalar ``p! <h1, h2>``.
    """
    return symmetrize(_gamma_raw(h1, h2, k, w))


def gamma_norm_sq(h1: GeneralKernel, h2: GeneralKernel, k: int, w: WeightVector) -> float:
    """``l2_norm(gamma_operator(h1, h2, k, w))**2`` computed orbit-wise."""
    return symmetrized_norm_sq(_gamma_raw(h1, h2, k, w))


@dataclass(frozen=True)
class ContractionTable:
    q: int
    rows: dict[tuple[int, int], float] = field(default_factory=dict)
    integral4: float = 0.0
    cond3a: float | None = None

    def contraction_max(self) -> float:
        """Largest of the plain contraction norms ``||g *_r^r g||``, ``r < q``.

        For ``q == 1`` there are none and the (3a) statistic is returned instead.
        """
        if self.q == 1:
            return self.cond3a or 0.0
        return max(self.rows[(r, r)] for r in range(1, self.q))


def contraction_table(f: SymmetricKernel, w: WeightVector) -> ContractionTable:
    _check_weights(f.N, w)
    g = embed(f)
    rows = {}
    for r in range(1, f.q + 1):
        for l in range(r + 1):
            if r == l == f.q:
                rows[(r, l)] = inner_product(g, g)
            else:
                rows[(r, l)] = l2_norm(star(g, g, r, l, w))
    cond3a = None
    if f.q == 1:
        cond3a = math.fsum(v ** 4 / w.at(t[0]) for t, v in f.items())
    return ContractionTable(f.q, rows, p_integral(g, 4, w), cond3a)


class Residual(NamedTuple):
    name: str
    lhs: float
    rhs: float
    slack: float


def prop41_residuals(f: SymmetricKernel, w: WeightVector) -> list[Residual]:
    """Evaluate the chain of inequalities bounding every contraction by plain ones.

    ``slack`` is oriented so that a holding inequality gives ``slack >= 0``.
    """
    q = f.q
    if q < 2:
        raise OrderTooSmall(f"needs q >= 2, got {q}")
    _check_weights(f.N, w)
    g = embed(f)
    alpha = w.alpha
    norm_sq = {}

    def nsq(r, l):
        if (r, l) not in norm_sq:
            s = star(g, g, r, l, w)
            norm_sq[(r, l)] = inner_product(s, s)
        return norm_sq[(r, l)]

    out = []
    int4 = p_integral(g, 4, w)
    lhs, rhs = nsq(q - 1, q - 1), alpha ** q * int4
    out.append(Residual("a", lhs, rhs, lhs - rhs))
    sum4 = math.factorial(q) * f.sum_power(4)
    rhs = alpha ** (-q) * sum4
    out.append(Residual("a'", int4, rhs, rhs - int4))
    for l in range(1, q):
        lhs, rhs = nsq(q, l), alpha ** (-(q - l)) * nsq(l, l)
        out.append(Residual(f"b1[l={l}]", lhs, rhs, rhs - lhs))
    for r in range(1, q):
        for l in range(1, r + 1):
            lhs, rhs = nsq(r, l), alpha ** (-(r - l)) * nsq(l, l)
            out.append(Residual(f"b2[r={r},l={l}]", lhs, rhs, rhs - lhs))
    return out
