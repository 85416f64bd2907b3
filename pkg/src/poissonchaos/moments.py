"""Exact moments of homogeneous sums.

Three routes to ``E[Q^4]``:

* :func:`moment_bruteforce` expands ``Q^m`` over all m-fold support tuples
  and factorizes each expectation by independence. It is the ground truth
  and is budget-guarded.
* :func:`moment4_sparse` is the same expansion restricted to index patterns
  whose expectation can be nonzero (every index hit at least twice). It
  scales to the kernel families used by the experiments.
* :func:`fourth_moment_structured` uses the chaos decomposition of ``Q^2``
  and holds for the normalized Poisson sequence only.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

from .contract import ContractionTable, contraction_table, gamma_norm_sq, star
from .errors import (
    BudgetExceeded,
    IndexOutOfRange,
    MissingCustomMoment,
    OrderTooLarge,
    SizeMismatch,
    ValidationError,
)
from .kernels import SymmetricKernel, WeightVector, embed, inner_product

KINDS = ("gaussian", "rademacher", "poisson", "custom", "mixed")
MAX_PROVIDER_K = 8
MAX_POISSON_K = 16
BRUTEFORCE_BUDGET = 10_000_000


@lru_cache(maxsize=None)
def poisson_central_poly(k: int) -> tuple[int, ...]:
    """Integer coefficients (constant term first) of ``E[(P(lam) - lam)^k]`` in ``lam``.

    Uses ``T_{k+1} = lam * sum_{j<k} C(k, j) T_j`` with ``T_0 = 1``, ``T_1 = 0``.
    """
    if k < 0:
        raise ValidationError(f"moment order must be nonnegative, got {k}")
    if k > MAX_POISSON_K:
        raise OrderTooLarge(f"Poisson central moments are capped at k={MAX_POISSON_K}, got {k}")
    if k == 0:
        return (1,)
    if k == 1:
        return (0,)
    m = k - 1
    acc = [0] * (k // 2 + 1)
    for j in range(m):
        for d, c in enumerate(poisson_central_poly(j)):
            acc[d] += math.comb(m, j) * c
    # multiply by lam
    out = [0] + acc
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return tuple(out)


def poisson_central_moment(k: int, lam: float) -> float:
    """``E[(P(lam) - lam)^k]`` for ``0 <= k <= 16``."""
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    val = 0.0
    for c in reversed(poisson_central_poly(k)):
        val = val * lam + c
    return val


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


@dataclass(frozen=True)
class MomentProvider:
    """Central moments of the normalized (centered, unit-variance) coordinates.

    ``poisson`` carries one intensity per index; ``custom`` carries a table
    ``{k: m_k}``; ``mixed`` carries one provider per index.
    """

    kind: str
    lam: tuple[float, ...] | None = None
    table: Mapping[int, float] | None = None
    components: tuple["MomentProvider", ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown provider kind {self.kind!r}; expected one of {KINDS}")

    @classmethod
    def gaussian(cls) -> "MomentProvider":
        return cls("gaussian")

    @classmethod
    def rademacher(cls) -> "MomentProvider":
        return cls("rademacher")

    @classmethod
    def poisson(cls, w: WeightVector | Sequence[float]) -> "MomentProvider":
        lam = w.lam if isinstance(w, WeightVector) else WeightVector(tuple(w)).lam
        return cls("poisson", lam=lam)

    @classmethod
    def custom(cls, moments: Mapping[int, float]) -> "MomentProvider":
        table = {int(k): float(v) for k, v in moments.items()}
        for k in table:
            if not 0 <= k <= MAX_PROVIDER_K:
                raise ValidationError(f"custom moment order {k} outside [0, {MAX_PROVIDER_K}]")
        for k, expected in ((0, 1.0), (1, 0.0), (2, 1.0)):
            if abs(table.setdefault(k, expected) - expected) > 1e-12:
                raise ValidationError(f"custom law must be centered with unit variance (m_{k} = {expected})")
        return cls("custom", table=dict(sorted(table.items())))

    @classmethod
    def mixed(cls, components: Sequence["MomentProvider"]) -> "MomentProvider":
        return cls("mixed", components=tuple(components))

    @property
    def label(self) -> str:
        return self.kind


def make_provider(kind: str, w: WeightVector | None = None) -> MomentProvider:
    """Built-in provider by name; ``poisson`` takes its intensities from ``w``."""
    if kind == "gaussian":
        return MomentProvider.gaussian()
    if kind == "rademacher":
        return MomentProvider.rademacher()
    if kind == "poisson":
        if w is None:
            raise ValidationError("the poisson provider needs a weight vector")
        return MomentProvider.poisson(w)
    raise ValidationError(f"no built-in provider named {kind!r}")


def central_moment(provider: MomentProvider, index: int, k: int) -> float:
    """k-th central moment of the normalized coordinate at 1-based ``index``."""
    if k < 0:
        raise ValidationError(f"moment order must be nonnegative, got {k}")
    kind = provider.kind
    if kind == "mixed":
        comps = provider.components or ()
        if not 1 <= index <= len(comps):
            raise IndexOutOfRange(f"index {index} outside the {len(comps)} mixed components")
        return central_moment(comps[index - 1], index, k)
    if kind == "poisson":
        lam = provider.lam or ()
        if not 1 <= index <= len(lam):
            raise IndexOutOfRange(f"index {index} outside the {len(lam)} Poisson intensities")
        x = lam[index - 1]
        return poisson_central_moment(k, x) / x ** (k / 2)
    if k > MAX_PROVIDER_K:
        raise OrderTooLarge(f"{kind} moments are capped at k={MAX_PROVIDER_K}, got {k}")
    if kind == "gaussian":
        return 0.0 if k % 2 else float(_double_factorial(k - 1))
    if kind == "rademacher":
        return 0.0 if k % 2 else 1.0
    table = provider.table or {}
    if k not in table:
        raise MissingCustomMoment(f"custom provider has no moment of order {k}")
    return table[k]


def variance_exact(f: SymmetricKernel) -> float:
    """``E[Q^2] = q! * sum over ordered tuples of f^2 = (q!)^2 * sum over increasing tuples``."""
    return math.factorial(f.q) ** 2 * f.sum_power(2)


def _scaled_items(f: SymmetricKernel) -> list[tuple[tuple[int, ...], float]]:
    # Q = q! * sum over increasing tuples
    c = float(math.factorial(f.q))
    return [(t, c * v) for t, v in f.items()]


class _MomentCache:
    """Memoized ``E[prod X_i^{c_i}]`` keyed by the sorted index multiset."""

    def __init__(self, provider: MomentProvider):
        self.provider = provider
        self.single: dict[tuple[int, int], float] = {}
        self.joint: dict[tuple[int, ...], float] = {}

    def moment(self, i: int, c: int) -> float:
        key = (i, c)
        if key not in self.single:
            self.single[key] = central_moment(self.provider, i, c)
        return self.single[key]

    def expect(self, indices: tuple[int, ...]) -> float:
        key = tuple(sorted(indices))
        val = self.joint.get(key)
        if val is None:
            val = 1.0
            for i, grp in itertools.groupby(key):
                val *= self.moment(i, sum(1 for _ in grp))
                if val == 0.0:
                    break
            self.joint[key] = val
        return val


def mixed_moment_bruteforce(kernels: Sequence[SymmetricKernel], provider: MomentProvider,
                            budget: int = BRUTEFORCE_BUDGET) -> float:
    """``E[Q_1 Q_2 ... Q_m]`` by full expansion over support tuples."""
    if not kernels:
        return 1.0
    sizes = [len(f) for f in kernels]
    if math.prod(sizes) > budget:
        raise BudgetExceeded(f"expansion of {' x '.join(map(str, sizes))} tuples exceeds budget {budget}")
    cache = _MomentCache(provider)
    terms = []
    for combo in itertools.product(*(_scaled_items(f) for f in kernels)):
        idx = tuple(i for t, _ in combo for i in t)
        e = cache.expect(idx)
        if e != 0.0:
            terms.append(math.prod(c for _, c in combo) * e)
    return math.fsum(terms)


def moment_bruteforce(f: SymmetricKernel, provider: MomentProvider, m: int,
                      budget: int = BRUTEFORCE_BUDGET) -> float:
    """``E[Q^m]`` by full expansion; the independent oracle for everything else."""
    if not 0 <= m <= 4:
        raise ValidationError(f"bruteforce moments support 0 <= m <= 4, got {m}")
    return mixed_moment_bruteforce([f] * m, provider, budget)


def _pair_keys(fa: SymmetricKernel, fb: SymmetricKernel) -> dict:
    # X^A X^B = X^(A xor B) * X_(A and B)^2: group pairs by that exponent pattern
    acc = defaultdict(list)
    items_b = [(frozenset(t), c) for t, c in _scaled_items(fb)]
    for ta, ca in _scaled_items(fa):
        sa = frozenset(ta)
        for sb, cb in items_b:
            acc[(sa ^ sb, sa & sb)].append(ca * cb)
    return {key: math.fsum(v) for key, v in acc.items()}


def moment4_sparse(fa: SymmetricKernel, fb: SymmetricKernel, fc: SymmetricKernel, fd: SymmetricKernel,
                   provider: MomentProvider) -> float:
    """``E[Q_a Q_b Q_c Q_d]`` visiting only index patterns covered at least twice.

    Writes ``Q_a Q_b`` and ``Q_c Q_d`` as sums over (odd set D, squared set I)
    and pairs a left pattern with a right one only when each odd set is
    covered by the other side: ``D' <= D | I`` and ``D <= D' | I'``.
    """
    left = _pair_keys(fa, fb)
    right = _pair_keys(fc, fd)
    by_odd = defaultdict(list)
    even_by_subset = defaultdict(list)
    for (D, I), wt in right.items():
        if D:
            by_odd[D].append((I, wt))
        else:
            for size in range(len(I) + 1):
                for sub in itertools.combinations(sorted(I), size):
                    even_by_subset[frozenset(sub)].append((I, wt))
    cache = _MomentCache(provider)

    def expect(D, I, D2, I2):
        counts = defaultdict(int)
        for i in D:
            counts[i] += 1
        for i in D2:
            counts[i] += 1
        for i in I:
            counts[i] += 2
        for i in I2:
            counts[i] += 2
        val = 1.0
        for i, c in counts.items():
            val *= cache.moment(i, c)
        return val

    terms = []
    for (D, I), wt in left.items():
        for I2, wt2 in even_by_subset.get(D, ()):
            terms.append(wt * wt2 * expect(D, I, (), I2))
        union = sorted(D | I)
        for size in range(1, len(union) + 1):
            for sub in itertools.combinations(union, size):
                D2 = frozenset(sub)
                for I2, wt2 in by_odd.get(D2, ()):
                    if D <= D2 | I2:
                        terms.append(wt * wt2 * expect(D, I, D2, I2))
    return math.fsum(terms)


def fourth_moment_structured(f: SymmetricKernel, w: WeightVector) -> float:
    """``E[Q^4]`` under the normalized Poisson law via ``sum_k k! ||G_k(g, g)||^2``.

    The k = 0 term is ``(q!)^2 ||g||^4``; the k = 2q term is expanded as
    ``2 (q!)^2 ||g||^4 + sum_p (q!)^4 / (p! (q-p)!)^2 ||g *_p^p g||^2``.
    """
    q = f.q
    g = embed(f)
    qf = math.factorial(q)
    norm_sq = inner_product(g, g)
    terms = [qf ** 2 * norm_sq ** 2, 2 * qf ** 2 * norm_sq ** 2]
    for k in range(1, 2 * q):
        terms.append(math.factorial(k) * gamma_norm_sq(g, g, k, w))
    for p in range(1, q):
        s = star(g, g, p, p, w)
        terms.append(qf ** 4 / (math.factorial(p) * math.factorial(q - p)) ** 2 * inner_product(s, s))
    return math.fsum(terms)


def product_second_moment(f1: SymmetricKernel, f2: SymmetricKernel, w: WeightVector) -> list[tuple[int, float]]:
    """Per-order contributions ``(k, k! ||G_k^{p,q}(g1, g2)||^2)`` to ``E[(Q_p Q_q)^2]``.

    The chaos components of a product are orthogonal, so the contributions
    sum to the second moment of the product under the Poisson law.
    """
    if f1.N != f2.N:
        raise SizeMismatch(f"kernel sizes differ: {f1.N} vs {f2.N}")
    g1, g2 = embed(f1), embed(f2)
    p, q = f1.q, f2.q
    return [(k, math.factorial(k) * gamma_norm_sq(g1, g2, k, w)) for k in range(abs(q - p), p + q + 1)]


def cross_covariance(f1: SymmetricKernel, f2: SymmetricKernel) -> float:
    if f1.N != f2.N:
        raise SizeMismatch(f"kernel sizes differ: {f1.N} vs {f2.N}")
    if f1.q != f2.q:
        return 0.0
    return math.factorial(f1.q) * inner_product(embed(f1), embed(f2))


@dataclass(frozen=True)
class DiagnosticsReport:
    q: int
    N: int
    provider: str
    var_exact: float
    m4_exact: float
    gap: float
    method: str
    cond3a: float | None = None
    contraction_table: ContractionTable | None = None
    m4_bruteforce: float | None = None


def fourth_moment(f: SymmetricKernel, provider: MomentProvider, w: WeightVector | None = None,
                  budget: int = 200_000) -> tuple[float, str, float | None]:
    """``(m4, method, m4_bruteforce)`` choosing the cheapest exact route.

    Poisson providers use the structured formula, cross-checked by
    bruteforce when ``len(f)**4 <= budget`` (method ``both``). Other laws use
    bruteforce within the budget and the sparse expansion beyond it.
    """
    fits = len(f) ** 4 <= budget
    if provider.kind == "poisson":
        if w is None:
            w = WeightVector(provider.lam)
        m4 = fourth_moment_structured(f, w)
        if fits:
            return m4, "both", moment_bruteforce(f, provider, 4)
        return m4, "structured", None
    if fits:
        m4 = moment_bruteforce(f, provider, 4)
        return m4, "bruteforce", m4
    return moment4_sparse(f, f, f, f, provider), "sparse", None


def diagnose(f: SymmetricKernel, w: WeightVector, provider: MomentProvider,
             budget: int = 200_000) -> DiagnosticsReport:
    """Exact second/fourth moments and contraction statistics of one kernel.

    Makes no convergence claim: a single kernel cannot witness a limit.
    """
    var = variance_exact(f)
    m4, method, m4_bf = fourth_moment(f, provider, w, budget)
    table = contraction_table(f, w)
    return DiagnosticsReport(
        q=f.q, N=f.N, provider=provider.label, var_exact=var, m4_exact=m4,
        gap=m4 - 3.0 * var ** 2, method=method, cond3a=table.cond3a,
        contraction_table=table, m4_bruteforce=m4_bf if method == "both" else None,
    )
