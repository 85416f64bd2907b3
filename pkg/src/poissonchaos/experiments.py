"""Kernel-sequence families and the universality harness.

The harness never declares a limit. Along a finite grid it reports exact
diagnostics, Monte Carlo distances, and flags saying whether the decision
quantities shrink monotonically and end below configurable thresholds.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .contract import contraction_table, star
from .errors import DimensionMismatch, OrderTooSmall, SizeMismatch, ValidationError
from .kernels import SymmetricKernel, WeightVector, build_symmetric, embed, inner_product
from .moments import (
    KINDS,
    cross_covariance,
    fourth_moment,
    fourth_moment_structured,
    make_provider,
    variance_exact,
)
from .montecarlo import RngSpec, simulate


@dataclass(frozen=True)
class KernelFamily:
    """A sequence ``n -> (kernel, weights)`` with declared limit variance ``sigma2``."""

    name: str
    q: int
    generator: Callable[[int], tuple[SymmetricKernel, WeightVector]]
    sigma2: float = 1.0
    note: str = ""

    def __call__(self, n: int) -> tuple[SymmetricKernel, WeightVector]:
        return self.generator(n)


def _weights(N: int, lam) -> WeightVector:
    if callable(lam):
        return WeightVector(tuple(float(lam(i)) for i in range(1, N + 1)))
    return WeightVector((float(lam),) * N)


def counterexample_kernel(q: int, N: int) -> SymmetricKernel:
    """``1 / (q! sqrt(N - q + 1))`` on the tuples ``{1, ..., q-1, s}``, ``q <= s <= N``.

    The sum is ``X_1 ... X_{q-1} * sum_s X_s / sqrt(N - q + 1)``.
    """
    if q < 2:
        raise OrderTooSmall(f"the counterexample needs q >= 2, got {q}")
    if N < q:
        raise ValidationError(f"need N >= q, got N={N}, q={q}")
    val = 1.0 / (math.factorial(q) * math.sqrt(N - q + 1))
    head = tuple(range(1, q))
    return build_symmetric(q, N, [(head + (s,), val) for s in range(q, N + 1)])


def counterexample_family(q: int = 2, lam: float | Callable[[int], float] = 1.0) -> KernelFamily:
    """Sign sums that are asymptotically normal, while the Gaussian version stays ``G_1 ... G_q``."""
    if q < 2:
        raise OrderTooSmall(f"the counterexample needs q >= 2, got {q}")

    def gen(n):
        N = n + q
        return counterexample_kernel(q, N), _weights(N, lam)

    return KernelFamily("counterexample", q, gen, 1.0, "N = n + q; Gaussian law is G_1...G_q for all n")


def pair_partition_kernel(n: int) -> SymmetricKernel:
    val = 1.0 / (2.0 * math.sqrt(n))
    return build_symmetric(2, 2 * n, [((2 * i - 1, 2 * i), val) for i in range(1, n + 1)])


def pair_partition_family() -> KernelFamily:
    """Disjoint pairs ``f(2i-1, 2i) = 1 / (2 sqrt(n))``; ``||g *_1^1 g||^2 = 1 / (8n)``."""

    def gen(n):
        return pair_partition_kernel(n), WeightVector.ones(2 * n)

    return KernelFamily("pair-partition", 2, gen, 1.0, "N = 2n; unit weights")


def q1_escape_family() -> KernelFamily:
    """Order one, all mass on the last index, whose intensity grows: ``f_n(n) = 1``, ``lambda_i = i``."""

    def gen(n):
        f = build_symmetric(1, n, [((n,), 1.0)])
        return f, WeightVector(tuple(float(i) for i in range(1, n + 1)))

    return KernelFamily("q1-escape", 1, gen, 1.0, "N = n; lambda_i = i; (3a) statistic is 1/n")


FAMILIES = {
    "counterexample": counterexample_family,
    "pair-partition": pair_partition_family,
    "q1-escape": q1_escape_family,
}


def get_family(name: str, q: int = 2) -> KernelFamily:
    if name not in FAMILIES:
        raise ValidationError(f"unknown family {name!r}; expected one of {sorted(FAMILIES)}")
    if name == "counterexample":
        return counterexample_family(q)
    return FAMILIES[name]()


@dataclass(frozen=True)
class Thresholds:
    gap: float = 0.05
    contraction: float = 0.05
    w1: float = 0.05


@dataclass(frozen=True)
class UniversalityRow:
    n: int
    provider: str
    N: int
    var_exact: float
    m4_exact: float
    gap: float
    contraction_max: float
    cond3a: float | None
    method: str
    w1: float
    ks: float
    m4_empirical: float
    se_m4: float


@dataclass(frozen=True)
class TrendSummary:
    provider: str
    gap_decreasing: bool
    contraction_decreasing: bool
    w1_decreasing: bool
    final_gap_below: bool
    final_contraction_below: bool
    final_w1_below: bool


@dataclass(frozen=True)
class UniversalityReport:
    family: str
    rows: list[UniversalityRow] = field(default_factory=list)
    trends: dict[str, TrendSummary] = field(default_factory=dict)


def _strictly_decreasing(xs: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _job_rng(rng: RngSpec, n: int, kind: str) -> RngSpec:
    state = np.random.SeedSequence([rng.seed, n, KINDS.index(kind)]).generate_state(1, np.uint64)[0]
    return RngSpec(int(state), rng.streams)


def universality_run(family: KernelFamily, providers: Sequence[str], n_grid: Sequence[int], n_samples: int,
                     rng: RngSpec, thresholds: Thresholds = Thresholds(), threads: int = 1) -> UniversalityReport:
    """Exact diagnostics and Monte Carlo distances for every ``(n, provider)`` pair.

    Each job gets its own seed derived from ``(seed, n, provider)``, so the
    report does not depend on ``threads``. Gaps are compared in absolute
    value since sign laws approach the limit from below.
    """
    grid = list(n_grid)
    if not grid:
        raise ValidationError("n_grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("n_grid must be strictly increasing")
    for kind in providers:
        if kind not in ("gaussian", "rademacher", "poisson"):
            raise ValidationError(f"no built-in provider named {kind!r}")

    tables = {}
    kernels = {}
    for n in grid:
        f, w = family(n)
        kernels[n] = (f, w)
        tables[n] = contraction_table(f, w)

    def job(args):
        n, kind = args
        f, w = kernels[n]
        provider = make_provider(kind, w)
        var = variance_exact(f)
        m4, method, _ = fourth_moment(f, provider, w)
        sim = simulate(f, w, kind, n_samples, _job_rng(rng, n, kind), sigma2=family.sigma2)
        table = tables[n]
        return UniversalityRow(n, kind, f.N, var, m4, m4 - 3.0 * var ** 2, table.contraction_max(),
                               table.cond3a, method, sim.w1, sim.ks, sim.m4_empirical, sim.se_m4)

    jobs = [(n, kind) for n in grid for kind in providers]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(job, jobs))
    else:
        rows = [job(j) for j in jobs]

    trends = {}
    for kind in providers:
        mine = [r for r in rows if r.provider == kind]
        gaps = [abs(r.gap) for r in mine]
        cons = [r.contraction_max for r in mine]
        w1s = [r.w1 for r in mine]
        trends[kind] = TrendSummary(
            kind, _strictly_decreasing(gaps), _strictly_decreasing(cons), _strictly_decreasing(w1s),
            gaps[-1] < thresholds.gap, cons[-1] < thresholds.contraction, w1s[-1] < thresholds.w1,
        )
    return UniversalityReport(family.name, rows, trends)


@dataclass(frozen=True)
class CovarianceResidual:
    i: int
    j: int
    exact: float
    target: float
    residual: float


@dataclass(frozen=True)
class ComponentDiagnostics:
    j: int
    q: int
    statistic: float
    m4_exact: float
    gap: float


@dataclass(frozen=True)
class VectorReport:
    pairs: list[CovarianceResidual]
    components: list[ComponentDiagnostics]


def vector_diagnose(fs: Sequence[SymmetricKernel], w: WeightVector, C) -> VectorReport:
    """Joint diagnostics for a vector of Poisson homogeneous sums against covariance ``C``.

    Per component the statistic is the largest ``||g *_r^r g||`` for order at
    least two and ``sum_i f(i)^4 / lambda_i`` for order one; the fourth-moment
    gap is taken against ``3 C(j, j)^2``. Indices in the report are 1-based.
    """
    d = len(fs)
    C = np.asarray(C, dtype=float)
    if C.shape != (d, d):
        raise DimensionMismatch(f"covariance shape {C.shape} does not match {d} kernels")
    if d and not np.allclose(C, C.T, rtol=0, atol=1e-12):
        raise ValidationError("covariance matrix must be symmetric")
    if d and np.min(np.linalg.eigvalsh(C)) < -1e-10:
        raise ValidationError("covariance matrix must be positive semidefinite")
    if len({f.N for f in fs}) > 1:
        raise SizeMismatch("all kernels must share N")

    pairs = []
    for i in range(d):
        for j in range(i, d):
            cov = cross_covariance(fs[i], fs[j])
            pairs.append(CovarianceResidual(i + 1, j + 1, cov, float(C[i, j]), cov - float(C[i, j])))
    comps = []
    for j, f in enumerate(fs):
        if f.q == 1:
            stat = math.fsum(v ** 4 / w.at(t[0]) for t, v in f.items())
        else:
            g = embed(f)
            stat = max(math.sqrt(inner_product(s, s)) for s in (star(g, g, r, r, w) for r in range(1, f.q)))
        m4 = fourth_moment_structured(f, w)
        comps.append(ComponentDiagnostics(j + 1, f.q, stat, m4, m4 - 3.0 * float(C[j, j]) ** 2))
    return VectorReport(pairs, comps)
