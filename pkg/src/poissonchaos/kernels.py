"""Sparse discrete kernels under the weighted counting measure.

A coordinate index ``i`` stands for the normalized indicator
``g_i = 1_{A_i} / sqrt(lambda_i)`` of a set of measure ``lambda_i``; the sets
are disjoint, so the tensors ``g_{i1} x ... x g_{ik}`` form an orthonormal
family and pointwise products obey ``g_i * g_j = delta_ij * lambda_i**-0.5 * g_i``.

Indices are 1-based throughout, in storage as well as in I/O.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (
    DuplicateEntry,
    IndexOutOfRange,
    OrderMismatch,
    OrderTooLarge,
    RepeatedIndex,
    ValidationError,
    WeightLengthMismatch,
)

MAX_ORDER = 6
# contractions of two order-6 kernels produce up to order 12
MAX_GENERAL_ORDER = 2 * MAX_ORDER
MAX_SIZE = 10_000
ZERO_TOL = 1e-15

Index = tuple[int, ...]


@dataclass(frozen=True)
class WeightVector:
    """Poisson intensities ``lambda_1..lambda_N``."""

    lam: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lam)
        if not lam:
            raise ValidationError("weight vector must be nonempty")
        if len(lam) > MAX_SIZE:
            raise ValidationError(f"weight vector longer than {MAX_SIZE}")
        for i, x in enumerate(lam, start=1):
            if not (x > 0 and math.isfinite(x)):
                raise ValidationError(f"lambda[{i}] = {x!r} is not a positive real")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def ones(cls, n: int) -> "WeightVector":
        return cls((1.0,) * n)

    @property
    def alpha(self) -> float:
        return min(self.lam)

    def __len__(self) -> int:
        return len(self.lam)

    def at(self, i: int) -> float:
        """Intensity of the 1-based index ``i``."""
        return self.lam[i - 1]


def _check_size(N: int) -> None:
    if not isinstance(N, int) or N < 1:
        raise ValidationError(f"size N must be a positive integer, got {N!r}")
    if N > MAX_SIZE:
        raise ValidationError(f"size N={N} exceeds the cap {MAX_SIZE}")


def _check_index(idx: Iterable[int], N: int) -> Index:
    out = []
    for i in idx:
        if isinstance(i, bool) or not isinstance(i, int):
            raise ValidationError(f"index component {i!r} is not an integer")
        if not 1 <= i <= N:
            raise IndexOutOfRange(f"index {i} outside [1, {N}]")
        out.append(i)
    return tuple(out)


@dataclass(frozen=True)
class SymmetricKernel:
    """Symmetric function on ``[N]^q`` vanishing on diagonals.

    Only strictly increasing tuples are stored; every permutation of a stored
    tuple shares its value. Build instances with :func:`build_symmetric`.
    """

    q: int
    N: int
    entries: Mapping[Index, float] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.q, int) or self.q < 1:
            raise ValidationError(f"order q must be a positive integer, got {self.q!r}")
        if self.q > MAX_ORDER:
            raise OrderTooLarge(f"order q={self.q} exceeds the cap {MAX_ORDER}")
        _check_size(self.N)
        for t in self.entries:
            if len(t) != self.q or any(a >= b for a, b in zip(t, t[1:])):
                raise ValidationError(f"stored tuple {t} is not strictly increasing of length {self.q}")
            _check_index(t, self.N)

    def __call__(self, *idx: int) -> float:
        if len(idx) != self.q:
            raise OrderMismatch(f"expected {self.q} indices, got {len(idx)}")
        key = tuple(sorted(idx))
        if any(a == b for a, b in zip(key, key[1:])):
            return 0.0
        return self.entries.get(key, 0.0)

    def __len__(self) -> int:
        return len(self.entries)

    def items(self):
        return self.entries.items()

    def sum_power(self, p: int) -> float:
        """Sum of ``f**p`` over increasing tuples."""
        return math.fsum(v ** p for v in self.entries.values())


def build_symmetric(q: int, N: int, raw_entries: Iterable[tuple[Iterable[int], float]]) -> SymmetricKernel:
    """Validate and canonicalize ``(tuple, value)`` pairs into a kernel.

    Raises RepeatedIndex for a tuple touching a diagonal, DuplicateEntry when
    two tuples are permutations of each other, and IndexOutOfRange.
    """
    _check_size(N)
    if isinstance(q, int) and q > MAX_ORDER:
        raise OrderTooLarge(f"order q={q} exceeds the cap {MAX_ORDER}")
    entries: dict[Index, float] = {}
    seen: set[Index] = set()
    for idx, val in raw_entries:
        t = _check_index(idx, N)
        if len(t) != q:
            raise ValidationError(f"tuple {t} has {len(t)} components, expected {q}")
        key = tuple(sorted(t))
        if any(a == b for a, b in zip(key, key[1:])):
            raise RepeatedIndex(f"tuple {t} has a repeated index")
        if key in seen:
            raise DuplicateEntry(f"tuple {t} duplicates an earlier entry {key}")
        seen.add(key)
        val = float(val)
        if not math.isfinite(val):
            raise ValidationError(f"value at {t} is not finite")
        if abs(val) >= ZERO_TOL:
            entries[key] = val
    return SymmetricKernel(q, N, dict(sorted(entries.items())))


@dataclass(frozen=True)
class GeneralKernel:
    """Coefficient expansion ``sum c(t) g_{t1} x ... x g_{tk}`` over ordered k-tuples.

    Order 0 is a scalar stored under the empty tuple.
    """

    k: int
    N: int
    coeffs: Mapping[Index, float] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 0:
            raise ValidationError(f"order k must be a nonnegative integer, got {self.k!r}")
        if self.k > MAX_GENERAL_ORDER:
            raise OrderTooLarge(f"order k={self.k} exceeds the cap {MAX_GENERAL_ORDER}")
        _check_size(self.N)

    @classmethod
    def from_dict(cls, k: int, N: int, coeffs: Mapping[Index, float]) -> "GeneralKernel":
        """Drop near-zero coefficients and fix a deterministic key order."""
        kept = {t: float(c) for t, c in coeffs.items() if abs(c) >= ZERO_TOL}
        for t in kept:
            if len(t) != k:
                raise ValidationError(f"tuple {t} does not have order {k}")
            _check_index(t, N)
        return cls(k, N, dict(sorted(kept.items())))

    @classmethod
    def scalar(cls, value: float, N: int) -> "GeneralKernel":
        return cls.from_dict(0, N, {(): value})

    @property
    def value(self) -> float:
        """The scalar of an order-0 kernel."""
        if self.k != 0:
            raise OrderMismatch("only order-0 kernels have a scalar value")
        return self.coeffs.get((), 0.0)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, idx: Index) -> float:
        return self.coeffs.get(tuple(idx), 0.0)


def embed(f: SymmetricKernel) -> GeneralKernel:
    """Expand every increasing tuple into all of its q! orderings."""
    coeffs = {}
    for t, v in f.items():
        for perm in itertools.permutations(t):
            coeffs[perm] = v
    return GeneralKernel.from_dict(f.q, f.N, coeffs)


def orbit_size(t: Index) -> int:
    """Number of distinct rearrangements of ``t``."""
    n = math.factorial(len(t))
    for m in _multiplicities(t):
        n //= math.factorial(m)
    return n


def _multiplicities(t: Index):
    counts: dict[int, int] = defaultdict(int)
    for i in t:
        counts[i] += 1
    return counts.values()


def _orbit_sums(h: GeneralKernel) -> dict[Index, list[float]]:
    groups: dict[Index, list[float]] = defaultdict(list)
    for t, c in h.coeffs.items():
        groups[tuple(sorted(t))].append(c)
    return groups


def symmetrize(h: GeneralKernel) -> GeneralKernel:
    """Average coefficients over all k! coordinate permutations.

    Each distinct rearrangement of a tuple receives the orbit sum divided by
    the orbit size, which is the k!-average with repetitions collapsed.
    """
    if h.k > MAX_ORDER:
        raise OrderTooLarge(f"symmetrize is capped at order {MAX_ORDER}, got {h.k}")
    out = {}
    for key, cs in _orbit_sums(h).items():
        perms = set(itertools.permutations(key))
        avg = math.fsum(cs) / len(perms)
        for p in perms:
            out[p] = avg
    return GeneralKernel.from_dict(h.k, h.N, out)


def symmetrized_norm_sq(h: GeneralKernel) -> float:
    """``l2_norm(symmetrize(h))**2`` without materializing the orbits."""
    return math.fsum(math.fsum(cs) ** 2 / orbit_size(key) for key, cs in _orbit_sums(h).items())


def l2_norm(h: GeneralKernel) -> float:
    return math.sqrt(math.fsum(c * c for c in h.coeffs.values()))


def inner_product(h1: GeneralKernel, h2: GeneralKernel) -> float:
    if h1.k != h2.k:
        raise OrderMismatch(f"orders differ: {h1.k} vs {h2.k}")
    small, large = (h1, h2) if len(h1) <= len(h2) else (h2, h1)
    return math.fsum(c * large.coeffs[t] for t, c in small.coeffs.items() if t in large.coeffs)


def p_integral(h: GeneralKernel, p: int, w: WeightVector) -> float:
    """Integral of ``h**p`` against the product measure.

    The disjoint supports kill every cross term, leaving
    ``sum_t c(t)**p * prod_j lambda_{t_j}**(1 - p/2)``.
    """
    if not isinstance(p, int) or p < 1:
        raise ValidationError(f"power p must be a positive integer, got {p!r}")
    if h.N > len(w):
        raise WeightLengthMismatch(f"kernel size {h.N} exceeds weight length {len(w)}")
    if h.k == 0:
        return h.value ** p
    e = 1.0 - p / 2.0
    terms = []
    for t, c in h.coeffs.items():
        scale = 1.0
        for i in t:
            scale *= w.at(i) ** e
        terms.append(c ** p * scale)
    return math.fsum(terms)
