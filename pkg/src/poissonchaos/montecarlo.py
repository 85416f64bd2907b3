"""Seeded sampling, evaluation of homogeneous sums, and distances to a normal target."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import (
    DomainError,
    InsufficientSamples,
    NonpositiveVariance,
    UnsupportedSampler,
    ValidationError,
    WeightLengthMismatch,
    WidthMismatch,
)
from .kernels import SymmetricKernel, WeightVector
from .moments import variance_exact

SAMPLER_KINDS = ("gaussian", "rademacher", "poisson")
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class RngSpec:
    """Sample ``j`` is drawn from substream ``j % streams``.

    Substream ``s`` is seeded from ``(seed, s)`` through numpy's SeedSequence
    spawn keys, so the sample set depends only on ``(seed, streams, n)``.
    """

    seed: int
    streams: int = 8

    def __post_init__(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not isinstance(self.streams, int) or self.streams < 1:
            raise ValidationError(f"streams must be a positive integer, got {self.streams!r}")

    def generator(self, stream: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(stream,))))

    def rows(self, stream: int, n: int) -> int:
        return len(range(stream, n, self.streams))


def _column_kinds(provider, N: int) -> list[str]:
    if isinstance(provider, str):
        kind = provider
        comps = None
    else:
        kind = provider.kind
        comps = provider.components
    if kind == "mixed":
        if comps is None or len(comps) < N:
            raise ValidationError(f"mixed provider needs {N} components")
        kinds = []
        for c in comps[:N]:
            kinds.extend(_column_kinds(c, 1))
        return kinds
    if kind not in SAMPLER_KINDS:
        raise UnsupportedSampler(f"no sampler for provider kind {kind!r}")
    return [kind] * N


def _draw_block(gen: np.random.Generator, kinds: list[str], lam: np.ndarray, rows: int) -> np.ndarray:
    N = len(kinds)
    if len(set(kinds)) == 1:
        return _draw_columns(gen, kinds[0], lam, rows, N)
    block = np.empty((rows, N))
    for j, kind in enumerate(kinds):
        block[:, j] = _draw_columns(gen, kind, lam[j:j + 1], rows, 1)[:, 0]
    return block


def _draw_columns(gen, kind, lam, rows, width):
    if kind == "gaussian":
        return gen.standard_normal((rows, width))
    if kind == "rademacher":
        return 2.0 * gen.integers(0, 2, size=(rows, width)) - 1.0
    # normalized Poisson: (P(lam) - lam) / sqrt(lam)
    return (gen.poisson(lam, size=(rows, width)) - lam) / np.sqrt(lam)


def _lam_array(w: WeightVector | None, N: int, kinds: list[str]) -> np.ndarray:
    if "poisson" not in kinds:
        return np.ones(N)
    if w is None:
        raise ValidationError("poisson sampling needs a weight vector")
    if len(w) < N:
        raise WeightLengthMismatch(f"need {N} intensities, got {len(w)}")
    return np.asarray(w.lam[:N], dtype=float)


def _map_streams(fn, rng: RngSpec, threads: int):
    streams = range(rng.streams)
    if threads <= 1 or rng.streams == 1:
        return [fn(s) for s in streams]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, streams))


def sample_matrix(provider, w: WeightVector | None, N: int, n: int, rng: RngSpec,
                  threads: int = 1) -> np.ndarray:
    """``n x N`` matrix of independent normalized coordinate draws."""
    if n < 1:
        raise ValidationError(f"need at least one sample, got n={n}")
    kinds = _column_kinds(provider, N)
    lam = _lam_array(w, N, kinds)

    def block(s):
        return _draw_block(rng.generator(s), kinds, lam, rng.rows(s, n))

    out = np.empty((n, N))
    for s, b in enumerate(_map_streams(block, rng, threads)):
        out[s::rng.streams] = b
    return out


def eval_sums(f: SymmetricKernel, samples: np.ndarray) -> np.ndarray:
    """Row-wise ``q! * sum_t f(t) * prod_{i in t} X_i`` over increasing tuples."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise WidthMismatch("samples must be a 2-d array")
    if samples.shape[1] < f.N:
        raise WidthMismatch(f"sample width {samples.shape[1]} is below kernel size {f.N}")
    acc = np.zeros(samples.shape[0])
    for t, v in f.items():
        term = samples[:, t[0] - 1] * v
        for i in t[1:]:
            term *= samples[:, i - 1]
        acc += term
    return acc * math.factorial(f.q)


def normal_cdf(x):
    return special.ndtr(x)


def normal_quantile(u):
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0) | ~(arr < 1)):
        raise DomainError("normal quantile is defined on the open interval (0, 1)")
    out = special.ndtri(arr)
    return float(out) if np.ndim(u) == 0 else out


def _phi(z):
    return np.exp(-0.5 * z * z) * _INV_SQRT_2PI


def wasserstein1_normal(samples, sigma: float) -> float:
    """``int_0^1 |F_n^{-1}(u) - sigma * Phi^{-1}(u)| du`` in closed form.

    On each empirical quantile step the integrand is ``|x - sigma z(u)|``; an
    antiderivative of ``x - sigma z(u)`` is ``x u + sigma phi(z(u))``, so each
    step splits at ``u* = Phi(x / sigma)`` and integrates exactly.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    j = np.arange(n, dtype=float)
    a, b = j / n, (j + 1) / n
    with np.errstate(divide="ignore"):
        za, zb = special.ndtri(a), special.ndtri(b)
    zs = np.clip(x / sigma, za, zb)
    us = special.ndtr(zs)
    left = x * (us - a) + sigma * (_phi(zs) - _phi(za))
    right = -(x * (b - us) + sigma * (_phi(zb) - _phi(zs)))
    return float(math.fsum(np.maximum(left, 0.0)) + math.fsum(np.maximum(right, 0.0)))


def ks_normal(samples, sigma: float) -> float:
    """``sup_x |F_n(x) - Phi(x / sigma)|``, attained at the sample points."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    cdf = special.ndtr(x / sigma)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def distances(samples, sigma2: float) -> tuple[float, float]:
    """``(w1, ks)`` between the empirical law of ``samples`` and ``N(0, sigma2)``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {x.size}")
    if not sigma2 > 0:
        raise NonpositiveVariance(f"target variance must be positive, got {sigma2}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("samples contain non-finite values")
    sigma = math.sqrt(sigma2)
    return wasserstein1_normal(x, sigma), ks_normal(x, sigma)


@dataclass(frozen=True)
class SimulationReport:
    n_samples: int
    mean: float
    variance: float
    se_variance: float
    w1: float
    ks: float
    m4_empirical: float
    se_m4: float
    sigma2: float


def simulate_sums(f: SymmetricKernel, w: WeightVector | None, provider, n: int, rng: RngSpec,
                  threads: int = 1) -> np.ndarray:
    """Draw ``n`` realizations of the homogeneous sum, one substream block at a time.

    Only the coordinates touched by the kernel's support are drawn.
    """
    if n < 1:
        raise ValidationError(f"need at least one sample, got n={n}")
    kinds = _column_kinds(provider, f.N)
    lam = _lam_array(w, f.N, kinds)
    active = sorted({i for t in f.entries for i in t})
    if not active:
        return np.zeros(n)
    pos = {i: k for k, i in enumerate(active, start=1)}
    compact = SymmetricKernel(f.q, len(active), {tuple(pos[i] for i in t): v for t, v in f.items()})
    kinds = [kinds[i - 1] for i in active]
    lam = lam[[i - 1 for i in active]]

    def block(s):
        return eval_sums(compact, _draw_block(rng.generator(s), kinds, lam, rng.rows(s, n)))

    out = np.empty(n)
    for s, b in enumerate(_map_streams(block, rng, threads)):
        out[s::rng.streams] = b
    return out


def simulate(f: SymmetricKernel, w: WeightVector | None, provider, n: int, rng: RngSpec,
             sigma2: float | None = None, threads: int = 1) -> SimulationReport:
    """Sample the sum ``n`` times and compare it with ``N(0, sigma2)``.

    ``sigma2`` defaults to the exact variance of the sum.
    """
    if sigma2 is None:
        sigma2 = variance_exact(f)
    Q = simulate_sums(f, w, provider, n, rng, threads)
    w1, ks = distances(Q, sigma2)
    mean = float(np.mean(Q))
    dev2 = (Q - mean) ** 2
    q4 = Q ** 4
    if n > 1:
        variance = float(np.sum(dev2) / (n - 1))
        se_var = float(np.std(dev2, ddof=1) / math.sqrt(n))
        se_m4 = float(np.std(q4, ddof=1) / math.sqrt(n))
    else:
        variance = se_var = se_m4 = math.nan
    return SimulationReport(n, mean, variance, se_var, w1, ks, float(np.mean(q4)), se_m4, float(sigma2))

