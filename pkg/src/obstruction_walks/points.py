"""Points of P^1(Q) with the max-norm height."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arith import PrimeTable
from .errors import CapacityError, ValidationError

# Enumeration holds ~1.2 B^2 Python objects; beyond this use sample_point.
ENUMERATION_CEILING = 4000
INT128_MAX = 2**127 - 1


@dataclass(frozen=True, order=True)
class RationalPoint:
    s: int
    t: int

    def __post_init__(self):
        if self.s == 0 and self.t == 0:
            raise ValidationError("(0:0) is not a point")
        if math.gcd(self.s, self.t) != 1:
            raise ValidationError(f"({self.s}:{self.t}) is not primitive")
        first = self.s if self.s != 0 else self.t
        if first < 0:
            raise ValidationError(f"({self.s}:{self.t}) is not normalized")

    @classmethod
    def from_pair(cls, s: int, t: int) -> "RationalPoint":
        s, t = int(s), int(t)
        g = math.gcd(s, t)
        if g == 0:
            raise ValidationError("(0:0) is not a point")
        s, t = s // g, t // g
        if s < 0 or (s == 0 and t < 0):
            s, t = -s, -t
        return cls(s, t)

    @classmethod
    def parse(cls, text: str) -> "RationalPoint":
        try:
            s, t = text.replace(":", "/").split("/")
            return cls.from_pair(int(s), int(t))
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"cannot parse point {text!r}; expected s/t") from None

    @property
    def height(self) -> int:
        return max(abs(self.s), abs(self.t))

    def __str__(self):
        return f"{self.s}/{self.t}"


def enumerate_coords(B: int, ceiling: int = ENUMERATION_CEILING) -> tuple[np.ndarray, np.ndarray]:
    """Normalized coordinates of every point of height <= B, ordered by
    height and then lexicographically."""
    B = int(B)
    if B < 1:
        raise ValidationError("height bound must be >= 1")
    if B > ceiling:
        raise CapacityError(f"enumerating height <= {B} exceeds ceiling {ceiling}; "
                            "use sample_point instead")
    # s >= 0, and t > 0 when s == 0
    s = np.repeat(np.arange(0, B + 1, dtype=np.int64), 2 * B + 1)
    t = np.tile(np.arange(-B, B + 1, dtype=np.int64), B + 1)
    keep = (np.gcd(s, t) == 1) & ((s > 0) | (t > 0))
    s, t = s[keep], t[keep]
    h = np.maximum(np.abs(s), np.abs(t))
    order = np.lexsort((t, s, h))
    return s[order], t[order]


def enumerate_points(B: int, ceiling: int = ENUMERATION_CEILING) -> list[RationalPoint]:
    s, t = enumerate_coords(B, ceiling)
    return [RationalPoint(int(a), int(b)) for a, b in zip(s, t)]


def sample_coords(B: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """n independent uniform draws from the height-<=B points, by rejection
    from the box [-B, B]^2."""
    B = int(B)
    if B < 1:
        raise ValidationError("height bound must be >= 1")
    out_s, out_t, have = [], [], 0
    while have < n:
        m = int((n - have) * 1.7) + 16
        s = rng.integers(-B, B + 1, size=m)
        t = rng.integers(-B, B + 1, size=m)
        ok = np.gcd(s, t) == 1
        s, t = s[ok], t[ok]
        flip = (s < 0) | ((s == 0) & (t < 0))
        s = np.where(flip, -s, s)
        t = np.where(flip, -t, t)
        out_s.append(s)
        out_t.append(t)
        have += len(s)
    return np.concatenate(out_s)[:n], np.concatenate(out_t)[:n]


def sample_point(B: int, rng: np.random.Generator) -> RationalPoint:
    s, t = sample_coords(B, 1, rng)
    return RationalPoint(int(s[0]), int(t[0]))


def primes_3_mod_4(N: int, table: PrimeTable) -> list[int]:
    q = [int(p) for p in table.primes if p % 4 == 3][:N]
    if len(q) < N:
        raise CapacityError(f"prime table too small for {N} primes = 3 mod 4")
    return q


def klapaklapa_point(N: int, table: PrimeTable) -> RationalPoint:
    """The point (1 : q_1 q_2 ... q_N) with q_i the primes = 3 mod 4."""
    if N < 1:
        raise ValidationError("N must be >= 1")
    prod = math.prod(primes_3_mod_4(N, table))
    if prod > INT128_MAX:
        raise CapacityError(f"product of the first {N} primes = 3 mod 4 exceeds 128 bits")
    return RationalPoint(1, prod)
