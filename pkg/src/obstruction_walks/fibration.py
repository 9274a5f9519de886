"""Conic bundles x0^2 + x1^2 = F(s,t) x2^2 with F a product of linear forms."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .arith import PrimeTable, factorize, hilbert_symbol_neg_one
from .errors import CapacityError, ConsistencyError, DegenerateFibreError, ValidationError

BRUTE_FORCE_CUTOFF = 10**4
OVERLAP_WINDOW = (10**3, 10**4)

_TERM = re.compile(r"([+-]?)\s*(\d*)\s*\*?\s*([st])")


@dataclass(frozen=True)
class ConicBundleFamily:
    """``forms`` holds (a, b) pairs for the linear forms a*s + b*t."""

    forms: tuple[tuple[int, int], ...]

    @property
    def degree(self) -> int:
        return len(self.forms)

    @property
    def delta(self) -> Fraction:
        return Fraction(self.degree, 2)

    @cached_property
    def disc(self) -> int:
        out = 2
        for i, (a, b) in enumerate(self.forms):
            for c, d in self.forms[i + 1 :]:
                out *= a * d - b * c
        return out

    @cached_property
    def bad_primes(self) -> tuple[int, ...]:
        n = abs(self.disc)
        out, p = [], 2
        while p * p <= n:
            if n % p == 0:
                out.append(p)
                while n % p == 0:
                    n //= p
            p += 1
        if n > 1:
            out.append(n)
        return tuple(out)

    def evaluate(self, s: int, t: int) -> int:
        out = 1
        for a, b in self.forms:
            out *= a * s + b * t
        return out

    def form_values(self, s: int, t: int) -> list[int]:
        return [a * s + b * t for a, b in self.forms]

    def max_form_value(self, B: int) -> int:
        """Bound for |a s + b t| over the height-B box."""
        return max(abs(a) + abs(b) for a, b in self.forms) * int(B)

    def spec(self) -> str:
        return ",".join(format_form(a, b) for a, b in self.forms)

    def __str__(self):
        return self.spec()


def format_form(a: int, b: int) -> str:
    parts = []
    for coef, var in ((a, "s"), (b, "t")):
        if coef == 0:
            continue
        sign = "-" if coef < 0 else ("+" if parts else "")
        mag = "" if abs(coef) == 1 else f"{abs(coef)}*"
        parts.append(f"{sign}{mag}{var}")
    return "".join(parts)


def parse_form(text: str) -> tuple[int, int]:
    compact = text.replace(" ", "")
    if not compact:
        raise ValidationError("empty linear form")
    coef = {"s": 0, "t": 0}
    pos = 0
    for m in _TERM.finditer(compact):
        if m.start() != pos:
            break
        sign, digits, var = m.groups()
        if pos > 0 and not sign:
            raise ValidationError(f"missing sign in {text!r}")
        value = int(digits) if digits else 1
        coef[var] += -value if sign == "-" else value
        pos = m.end()
    if pos != len(compact):
        raise ValidationError(f"cannot parse linear form {text!r}")
    return coef["s"], coef["t"]


def parse_family(text: str) -> ConicBundleFamily:
    """Parse e.g. ``"s,t,s+t,s-t"`` or ``"2*s+3*t"``."""
    return make_family([parse_form(part) for part in text.split(",")])


def make_family(forms) -> ConicBundleFamily:
    if isinstance(forms, str):
        return parse_family(forms)
    forms = tuple((int(a), int(b)) for a, b in forms)
    if not forms:
        raise ValidationError("a family needs at least one linear form")
    for a, b in forms:
        if math.gcd(a, b) != 1:
            raise ValidationError(f"form {format_form(a, b) or '0'} is not primitive")
    for i, (a, b) in enumerate(forms):
        for c, d in forms[i + 1 :]:
            if a * d - b * c == 0:
                raise ValidationError(
                    f"forms {format_form(a, b)} and {format_form(c, d)} are proportional")
    return ConicBundleFamily(forms)


def _nonsplit_count_brute(family: ConicBundleFamily, p: int) -> int:
    """Number of (s:t) in P^1(F_p) whose fibre is non-split, by enumeration."""
    ts = np.arange(p, dtype=np.int64)
    zero = np.zeros(p, dtype=bool)
    for a, b in family.forms:
        zero |= (a + b * ts) % p == 0  # points (1:t)
    n_zero = int(zero.sum()) + int(family.evaluate(0, 1) % p == 0)  # plus (0:1)
    if p == 2 or p % 4 == 3:
        return n_zero
    return 0


def sigma_p(family: ConicBundleFamily, p: int) -> Fraction:
    """Proportion of non-split fibres over F_p, by brute force over P^1(F_p).

    A fibre with F != 0 is a smooth conic and split. Over F = 0 the fibre is
    the line pair x0 = +-i x1, split iff -1 is a square mod p; for p = 2 it is
    a double line and counted non-split.
    """
    return Fraction(_nonsplit_count_brute(family, int(p)), int(p) + 1)


def _distinct_roots(family: ConicBundleFamily, p: int) -> int:
    roots = set()
    for a, b in family.forms:
        if b % p == 0:
            roots.add(None)  # (0:1)
        else:
            roots.add(-a * pow(b, -1, p) % p)
    return len(roots)


def sigma_p_closed_form(family: ConicBundleFamily, p: int) -> Fraction:
    """#distinct roots of F in P^1(F_p) over (p+1) when p = 3 mod 4, else 0.
    Valid for every odd prime."""
    if p % 4 != 3:
        return Fraction(0)
    return Fraction(_distinct_roots(family, p), p + 1)


@dataclass(frozen=True, eq=False)
class SigmaTable:
    """sigma_p for p <= limit, with prefix sums.

    ``S[i]`` is the sum of sigma_q over the first i+1 primes, ``sS`` and
    ``sSS`` the cumulative sums of sigma*S and sigma*S^2.
    """

    family: ConicBundleFamily
    limit: int
    primes: np.ndarray = field(repr=False)
    nonsplit: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    sS: np.ndarray = field(repr=False)
    sSS: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.primes)

    @property
    def delta(self) -> float:
        return float(self.family.delta)

    def index(self, p: int) -> int:
        i = int(np.searchsorted(self.primes, p))
        if i >= len(self.primes) or self.primes[i] != p:
            raise ValidationError(f"{p} is not a prime <= {self.limit}")
        return i

    def count_le(self, x: float) -> int:
        """Number of tabulated primes <= x."""
        return int(np.searchsorted(self.primes, math.floor(x), side="right"))

    def sigma_exact(self, p: int) -> Fraction:
        return Fraction(int(self.nonsplit[self.index(p)]), int(p) + 1)

    def sigma_at(self, p: int) -> float:
        return float(self.sigma[self.index(p)])

    def prefix_S(self, x: float) -> float:
        """Sum of sigma_p over p <= x."""
        self.require(x)
        k = self.count_le(x)
        return float(self.S[k - 1]) if k else 0.0

    def require(self, x: float) -> None:
        if x > self.limit:
            raise CapacityError(f"sigma table reaches {self.limit}, need {x:g}")

    def euler_product_ratio(self, T: float, cutoff: float = 2) -> float:
        """prod_{cutoff < p < T} (1 - sigma_p)^{-1} / (log T)^Delta."""
        self.require(T)
        lo = self.count_le(cutoff)
        hi = int(np.searchsorted(self.primes, T, side="left"))
        logsum = -np.sum(np.log1p(-self.sigma[lo:hi]))
        return float(np.exp(logsum - self.delta * math.log(math.log(T))))


def build_sigma_table(family: ConicBundleFamily, P_max: int, table: PrimeTable,
                      brute_force_cutoff: int = BRUTE_FORCE_CUTOFF) -> SigmaTable:
    P_max = int(P_max)
    if P_max > table.limit:
        raise CapacityError(f"sigma table up to {P_max} needs primes up to {P_max}")
    primes = table.primes[: table.pi(P_max)]
    nonsplit = np.zeros(len(primes), dtype=np.int64)
    n_brute = int(np.searchsorted(primes, brute_force_cutoff, side="right"))
    for i in range(n_brute):
        nonsplit[i] = _nonsplit_count_brute(family, int(primes[i]))

    rest = primes[n_brute:]
    nonsplit[n_brute:] = np.where(rest % 4 == 3, family.degree, 0)
    for q in family.bad_primes:
        if q > brute_force_cutoff and q <= P_max:
            nonsplit[np.searchsorted(primes, q)] = _nonsplit_count_brute(family, q)

    lo, hi = OVERLAP_WINDOW
    for i in range(int(np.searchsorted(primes, lo)), min(n_brute, len(primes))):
        p = int(primes[i])
        if p > hi:
            break
        if Fraction(int(nonsplit[i]), p + 1) != sigma_p_closed_form(family, p):
            raise ConsistencyError(f"brute-force and closed-form sigma_{p} disagree")

    sigma = nonsplit / (primes + 1.0)
    S = np.cumsum(sigma)
    sS = np.cumsum(sigma * S)
    sSS = np.cumsum(sigma * S * S)
    return SigmaTable(family, P_max, primes, nonsplit, sigma, S, sS, sSS)


def is_locally_soluble(family: ConicBundleFamily, x, p: int) -> bool:
    c = family.evaluate(x.s, x.t)
    if c == 0:
        raise DegenerateFibreError(f"fibre over {x} is singular")
    return hilbert_symbol_neg_one(c, p) == 1


def obstructing_prime_support(family: ConicBundleFamily, x, table: PrimeTable) -> list[int]:
    """Primes dividing 2 F(s, t); every obstructing prime is among them."""
    values = family.form_values(x.s, x.t)
    if 0 in values:
        raise DegenerateFibreError(f"fibre over {x} is singular")
    support = {2}
    for v in values:
        if abs(v) > 1:
            support.update(factorize(v, table).primes)
    return sorted(support)


def local_density(family: ConicBundleFamily, p: int, precision: int = 1 << 20) -> float:
    """Haar measure of the x in P^1(Q_p) whose fibre has no Q_p-point.

    This is the limiting frequency of p among the obstructing primes of a
    random point; it differs from sigma_p by O(1/p^2). For good p = 3 mod 4
    it is r p/(p+1)^2 with r the number of distinct roots mod p. Otherwise
    the two charts {(1:t)} and {(pu:1)} are enumerated modulo p^k with
    p^k <= precision; residues whose symbol is not determined at that
    precision (mass below d p^(2-k)) count one half.
    """
    p = int(p)
    if p % 4 == 1:
        return 0.0
    if p != 2 and family.disc % p:
        return _distinct_roots(family, p) * p / (p + 1) ** 2
    return local_density_enumerated(family, p, precision)


def local_density_enumerated(family: ConicBundleFamily, p: int, precision: int = 1 << 20) -> float:
    k = 1
    while p ** (k + 1) <= precision:
        k += 1
    k = max(3, k)
    mod = p**k

    def mass(s, t, weight):
        v = np.ones(len(s), dtype=np.int64)
        for a, b in family.forms:
            v = v * ((a * s + b * t) % mod) % mod
        val = np.zeros(len(v), dtype=np.int64)
        unit = v.copy()
        undetermined = v == 0
        unit[undetermined] = 1
        for _ in range(k):
            div = unit % p == 0
            if not div.any():
                break
            unit = np.where(div, unit // p, unit)
            val += div
        # the symbol needs v_p (odd p) or the odd part mod 4 (p = 2)
        need = 1 if p != 2 else 3
        undetermined |= val > k - need
        if p == 2:
            bad = unit % 4 == 3
        else:
            bad = val % 2 == 1
        bad &= ~undetermined
        return weight * (np.count_nonzero(bad) + 0.5 * np.count_nonzero(undetermined))

    t = np.arange(mod, dtype=np.int64)
    u = np.arange(mod // p, dtype=np.int64)
    chart1 = mass(np.ones(mod, dtype=np.int64), t, p / (p + 1) / mod)
    chart2 = mass(p * u, np.ones(len(u), dtype=np.int64), 1 / (p + 1) / (mod // p))
    return float(chart1 + chart2)


def local_density_table(sigma: SigmaTable) -> np.ndarray:
    """local_density for every prime of the table, aligned with it."""
    primes = sigma.primes
    out = sigma.sigma * primes / (primes + 1.0)
    for q in {2, *sigma.family.bad_primes}:
        if q <= sigma.limit:
            out[sigma.index(q)] = local_density(sigma.family, q)
    return out
