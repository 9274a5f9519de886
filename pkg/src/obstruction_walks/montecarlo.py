"""Stochastic references: the independent Bernoulli(sigma_p) model and
scaled simple random walks standing in for Brownian motion."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError
from .fibration import SigmaTable
from .stats import EmpiricalDistribution


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (master_seed, key...); the same key always
    gives the same stream regardless of scheduling."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


@dataclass(frozen=True)
class SyntheticProfile:
    obstructing: tuple[int, ...]
    seed: tuple = ()

    @property
    def omega(self) -> int:
        return len(self.obstructing)


class BernoulliSampler:
    """Draws sets of primes p <= B, each included independently with
    probability sigma_p.

    Primes are grouped in dyadic blocks. Inside a block with largest weight
    m, candidates are the successes of a Bernoulli(m) sequence (found via
    geometric gaps) and a candidate p is kept with probability sigma_p / m.
    The result is exactly the independent model, at a cost proportional to
    the expected number of candidates rather than to pi(B).

    ``weights`` (aligned with the table primes) replaces sigma_p, e.g. by
    the exact local densities.
    """

    def __init__(self, sigma: SigmaTable, B: float, weights: np.ndarray | None = None):
        sigma.require(B)
        n = sigma.count_le(B)
        w = sigma.sigma if weights is None else np.asarray(weights, dtype=float)
        nz = np.flatnonzero(w[:n] > 0)
        self.primes = sigma.primes[nz]
        self.weights = w[nz]
        self.blocks = []
        if len(nz):
            edges = np.searchsorted(self.primes, 2 ** np.arange(1, 64))
            edges = np.unique(np.concatenate([[0], edges, [len(nz)]]))
            for lo, hi in zip(edges[:-1], edges[1:]):
                if hi > lo:
                    self.blocks.append((int(lo), int(hi), float(self.weights[lo:hi].max())))

    def sample_many(self, n: int, rng: np.random.Generator) -> list[np.ndarray]:
        rows: list[list[np.ndarray]] = [[] for _ in range(n)]
        for lo, hi, m in self.blocks:
            size = hi - lo
            if m >= 1.0:
                pos = np.tile(np.arange(size), (n, 1))
                owner = np.repeat(np.arange(n), size)
                pos = pos.ravel()
            else:
                owner, pos = _bernoulli_positions(n, size, m, rng)
            if not len(pos):
                continue
            keep = rng.random(len(pos)) * m < self.weights[lo + pos]
            owner, pos = owner[keep], pos[keep]
            for o, q in zip(owner.tolist(), self.primes[lo + pos].tolist()):
                rows[o].append(q)
        return [np.asarray(r, dtype=np.int64) for r in rows]

    def sample(self, rng: np.random.Generator) -> SyntheticProfile:
        return SyntheticProfile(tuple(int(q) for q in self.sample_many(1, rng)[0]))


def _bernoulli_positions(n: int, size: int, m: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Success positions of n independent Bernoulli(m) sequences of length
    ``size``, as (row, position) pairs sorted by row then position."""
    mean = size * m
    k = int(mean + 8 * math.sqrt(mean) + 8)
    gaps = rng.geometric(m, size=(n, k))
    pos = np.cumsum(gaps, axis=1) - 1
    short = np.flatnonzero(pos[:, -1] < size)
    extra_owner, extra_pos = [], []
    for r in short:
        # rare: row needs more successes than were drawn
        cur = int(pos[r, -1])
        more = []
        while True:
            cur += int(rng.geometric(m))
            if cur >= size:
                break
            more.append(cur)
        extra_owner.extend([r] * len(more))
        extra_pos.extend(more)
    valid = pos < size
    owner = np.nonzero(valid)[0]
    flat = pos[valid]
    if extra_pos:
        owner = np.concatenate([owner, np.asarray(extra_owner, dtype=np.int64)])
        flat = np.concatenate([flat, np.asarray(extra_pos, dtype=np.int64)])
        order = np.lexsort((flat, owner))
        owner, flat = owner[order], flat[order]
    return owner, flat


def sample_bernoulli_profile(sigma: SigmaTable, B: float, rng) -> SyntheticProfile:
    return BernoulliSampler(sigma, B).sample(rng)


@dataclass(frozen=True)
class WalkPath:
    n_steps: int
    grid: np.ndarray
    values: np.ndarray


def _steps(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform +-1 steps as int8, one random bit each."""
    n_bits = int(np.prod(shape))
    raw = rng.integers(0, 256, size=(n_bits + 7) // 8, dtype=np.uint8)
    bits = np.unpackbits(raw)[:n_bits].reshape(shape).astype(np.int8)
    return 2 * bits - 1


def sample_walk(n_steps: int, m_grid: int, rng: np.random.Generator) -> WalkPath:
    """Simple +-1 walk with n steps, scaled by 1/sqrt(n), read on m_grid
    equally spaced times (including 0 and 1)."""
    if n_steps < 1 or m_grid < 2 or n_steps < m_grid - 1:
        raise ValidationError("need n_steps >= m_grid - 1 >= 1")
    walk = np.concatenate([[0], np.cumsum(_steps(rng, (n_steps,)), dtype=np.int64)])
    idx = np.round(np.linspace(0, n_steps, m_grid)).astype(np.int64)
    return WalkPath(n_steps, idx / n_steps, walk[idx] / math.sqrt(n_steps))


@dataclass
class WalkFunctionals:
    """Per-walk functionals of an ensemble of scaled simple walks on [0,1]."""

    max: np.ndarray
    absmax: np.ndarray
    l2: np.ndarray          # integral of W^2 over [0,1]
    occupation: np.ndarray  # fraction of steps with W > 0
    zero_time: np.ndarray   # fraction of steps with W = 0
    endpoint: np.ndarray

    _FIELDS = ("max", "absmax", "l2", "occupation", "zero_time", "endpoint")

    @classmethod
    def concat(cls, parts):
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in cls._FIELDS))


def _walk_chunk(args) -> WalkFunctionals:
    seed, index, n_walks, n_steps = args
    rng = stream(seed, 1, index)
    S = np.cumsum(_steps(rng, (n_walks, n_steps)), axis=1, dtype=np.int32)
    scale = math.sqrt(n_steps)
    mx = np.maximum(S.max(axis=1), 0)
    mn = np.minimum(S.min(axis=1), 0)
    sq = np.einsum("ij,ij->i", S.astype(np.float64), S.astype(np.float64))
    return WalkFunctionals(
        max=mx / scale,
        absmax=np.maximum(mx, -mn) / scale,
        l2=sq / float(n_steps) ** 2,
        occupation=(S > 0).sum(axis=1) / n_steps,
        zero_time=(S == 0).sum(axis=1) / n_steps,
        endpoint=S[:, -1] / scale,
    )


def walk_functionals(n_walks: int, n_steps: int, seed: int, chunk: int = 500,
                     threads: int = 1) -> WalkFunctionals:
    """Max, |max|, integral of W^2 and positive occupation for n_walks walks.

    Work is split in fixed chunks with their own streams, so the result does
    not depend on ``threads``.
    """
    jobs = [(seed, i, min(chunk, n_walks - i * chunk), n_steps)
            for i in range((n_walks + chunk - 1) // chunk)]
    return WalkFunctionals.concat(parallel_map(_walk_chunk, jobs, threads))


def walk_stay_probability(a: int, n_steps: int) -> float:
    """Exact P(max_k |S_k| < a) for the simple walk over n_steps steps
    (transfer matrix on the 2a - 1 interior states)."""
    if a < 1:
        raise ValidationError("need a >= 1")
    v = np.zeros(2 * a - 1)
    v[a - 1] = 1.0
    for _ in range(n_steps):
        w = np.zeros_like(v)
        w[1:] += 0.5 * v[:-1]
        w[:-1] += 0.5 * v[1:]
        v = w
    return float(v.sum())


def parallel_map(fn, jobs, threads: int = 1):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def mc_functional_distribution(functional: Callable, sampler: Callable, n_samples: int,
                               rng: np.random.Generator) -> EmpiricalDistribution:
    """ECDF of functional(sampler(rng)) over n_samples draws."""
    if n_samples < 100:
        raise ValidationError("need at least 100 samples")
    return EmpiricalDistribution.from_values([functional(sampler(rng)) for _ in range(n_samples)])
