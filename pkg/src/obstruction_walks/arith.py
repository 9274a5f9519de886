"""Integer arithmetic: prime tables, factorization, Legendre and Hilbert symbols."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import CapacityError, ObstructionError, ValidationError

MEMORY_CEILING = 2 * 10**8
SPF_CEILING = 2 * 10**7
POLLARD_BUDGET = 10**7

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


class FactorizationBudgetError(ObstructionError):
    exit_code = 3


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """All primes up to ``limit`` plus a smallest-prime-factor array.

    ``spf[n]`` is the least prime factor of ``n`` for ``2 <= n <= spf_bound``;
    ``spf[0]`` and ``spf[1]`` are 0.
    """

    limit: int
    primes: np.ndarray = field(repr=False)
    spf: np.ndarray = field(repr=False)

    @property
    def spf_bound(self) -> int:
        return len(self.spf) - 1

    def __len__(self):
        return len(self.primes)

    def smallest_factor(self, n: int) -> int:
        n = abs(int(n))
        if n < 2:
            raise ValidationError(f"smallest_factor undefined for {n}")
        if n <= self.spf_bound:
            return int(self.spf[n])
        for p in self.primes:
            p = int(p)
            if p * p > n:
                return n
            if n % p == 0:
                return p
        if self.limit**2 >= n:
            return n
        return min(pollard_factor_all(n))

    def is_prime(self, n: int) -> bool:
        n = int(n)
        if n < 2:
            return False
        if n <= self.limit:
            i = np.searchsorted(self.primes, n)
            return i < len(self.primes) and int(self.primes[i]) == n
        return is_probable_prime(n)

    def pi(self, x: float) -> int:
        """Number of primes <= x (x <= limit)."""
        if x > self.limit:
            raise CapacityError(f"pi({x}) beyond table limit {self.limit}")
        return int(np.searchsorted(self.primes, math.floor(x), side="right"))

    def index(self, p: int) -> int:
        return int(np.searchsorted(self.primes, p))


def _sieve_bool(limit: int) -> np.ndarray:
    is_p = np.ones(limit + 1, dtype=bool)
    is_p[:2] = False
    is_p[4::2] = False
    for i in range(3, math.isqrt(limit) + 1, 2):
        if is_p[i]:
            is_p[i * i :: 2 * i] = False
    return is_p


def _spf_table(bound: int) -> np.ndarray:
    spf = np.zeros(bound + 1, dtype=np.int32)
    spf[2::2] = 2
    for i in range(3, bound + 1, 2):
        if i * i > bound:
            break
        if spf[i] == 0:
            block = spf[i * i :: 2 * i]
            block[block == 0] = i
    rest = spf == 0
    rest[:2] = False
    spf[rest] = np.nonzero(rest)[0]
    return spf


def sieve_primes(limit: int, spf_bound: int | None = None,
                 ceiling: int = MEMORY_CEILING) -> PrimeTable:
    """Sieve of Eratosthenes up to ``limit``.

    The smallest-factor array covers ``min(limit, spf_bound)`` where
    ``spf_bound`` defaults to ``SPF_CEILING``.
    """
    limit = int(limit)
    if limit < 2:
        raise ValidationError("sieve limit must be >= 2")
    if limit > ceiling:
        raise CapacityError(f"sieve limit {limit} exceeds memory ceiling {ceiling}")
    primes = np.flatnonzero(_sieve_bool(limit)).astype(np.int64)
    bound = min(limit, SPF_CEILING if spf_bound is None else int(spf_bound))
    return PrimeTable(limit=limit, primes=primes, spf=_spf_table(max(bound, 2)))


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin with the first 13 prime bases.

    Deterministic for n < 3.3e24, which covers every value this package
    produces from 64-bit coordinates; beyond that the error probability is
    below 4**-13.
    """
    n = int(n)
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def legendre_symbol(a: int, p: int) -> int:
    if p < 3 or p % 2 == 0 or not is_probable_prime(p):
        raise ValidationError(f"legendre_symbol needs an odd prime, got {p}")
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def valuation(n: int, p: int) -> int:
    if n == 0:
        raise ValidationError("valuation of 0")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def hilbert_symbol_neg_one(c: int, p: int) -> int:
    """The Hilbert symbol (-1, c)_p, i.e. whether x^2 + y^2 = c z^2 has a
    nontrivial Q_p-point."""
    c = int(c)
    if c == 0:
        raise ValidationError("Hilbert symbol needs c != 0")
    if p == 2:
        while c % 2 == 0:
            c //= 2
        return -1 if c % 4 == 3 else 1
    if p % 4 == 1:
        return 1
    return -1 if valuation(c, p) % 2 else 1


@dataclass(frozen=True)
class Factorization:
    value: int
    sign: int
    factors: tuple[tuple[int, int], ...]

    def product(self) -> int:
        out = self.sign
        for p, e in self.factors:
            out *= p**e
        return out

    @property
    def primes(self) -> list[int]:
        return [p for p, _ in self.factors]


def _merge(primes: Iterable[int]) -> tuple[tuple[int, int], ...]:
    counts: dict[int, int] = {}
    for p in primes:
        counts[p] = counts.get(p, 0) + 1
    return tuple(sorted(counts.items()))


def _brent(n: int, c: int, budget: int) -> int | None:
    """One run of Pollard-Brent with x -> x^2 + c, starting at x0 = 2."""
    y, r, q, g = 2, 1, 1, 1
    m = 128
    it = 0
    x = ys = y
    while g == 1:
        x = y
        for _ in range(r):
            y = (y * y + c) % n
        k = 0
        while k < r and g == 1:
            ys = y
            for _ in range(min(m, r - k)):
                y = (y * y + c) % n
                q = q * abs(x - y) % n
            g = math.gcd(q, n)
            k += m
        it += r
        if it > budget:
            return None
        r *= 2
    if g == n:
        while True:
            ys = (ys * ys + c) % n
            g = math.gcd(abs(x - ys), n)
            if g > 1:
                break
    return None if g == n else g


def pollard_factor_all(n: int, budget: int = POLLARD_BUDGET) -> list[int]:
    """Prime factors (with multiplicity) of n > 1 having no small factors."""
    if n == 1:
        return []
    if is_probable_prime(n):
        return [n]
    r = math.isqrt(n)
    if r * r == n:
        return pollard_factor_all(r, budget) * 2
    for c in (1, 3):
        d = _brent(n, c, budget)
        if d is not None:
            return sorted(pollard_factor_all(d, budget) + pollard_factor_all(n // d, budget))
    raise FactorizationBudgetError(f"could not split {n} within {budget} iterations")


def factorize(n: int, table: PrimeTable) -> Factorization:
    n = int(n)
    if n == 0:
        raise ValidationError("cannot factor 0")
    sign = -1 if n < 0 else 1
    m = abs(n)
    out: list[int] = []
    while m > 1 and m <= table.spf_bound:
        p = int(table.spf[m])
        out.append(p)
        m //= p
    if m > 1:
        for p in table.primes:
            p = int(p)
            if p * p > m:
                break
            while m % p == 0:
                out.append(p)
                m //= p
        if m > 1:
            if m <= table.limit**2:
                out.append(m)
            else:
                out.extend(pollard_factor_all(m))
    return Factorization(n, sign, _merge(out))


def mertens_sum(B: float, table: PrimeTable) -> float:
    """Sum of 1/p over primes p <= B."""
    if B > table.limit:
        raise CapacityError(f"mertens_sum({B}) needs a table up to {B}, have {table.limit}")
    k = table.pi(B)
    return float(np.sum(1.0 / table.primes[:k]))
