"""Normalized obstruction paths and the functionals evaluated on them.

Everything here accepts any object with an ascending ``obstructing``
sequence of primes, so synthetic Bernoulli profiles work unchanged.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CapacityError, ValidationError
from .fibration import SigmaTable
from .obstruction import _segments, c_hat_value

DEFAULT_GRID = 256
_EPS = 1e-12
PRE_JUMP = 1e-9


@dataclass(frozen=True)
class PathSample:
    kind: str
    B: float
    grid: np.ndarray
    values: np.ndarray
    normalization: float  # Delta * log log B

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(self.grid, self.values):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


def loglog(x: float) -> float:
    return math.log(math.log(x))


def _check_B(B: float) -> float:
    if B < 3:
        raise ValidationError(f"B must be >= 3, got {B}")
    return loglog(B)


def _uniform_grid(m: int) -> np.ndarray:
    if m < 2:
        raise ValidationError("grid needs at least 2 points")
    return np.linspace(0.0, 1.0, m)


def _merge_grid(m: int, extra) -> np.ndarray:
    extra = np.asarray([t for t in extra if 0.0 <= t <= 1.0], dtype=float)
    return np.unique(np.concatenate([_uniform_grid(m), extra]))


def path_X(prof, sigma: SigmaTable, B: float, m: int = DEFAULT_GRID,
           extra=()) -> PathSample:
    """X_B(t) = (omega(x, exp(log^t B)) - t D) / sqrt(D), D = Delta log log B.

    The grid is the uniform m-point grid plus every jump abscissa and a
    point PRE_JUMP before it, where the path is (up to PRE_JUMP * sqrt(D))
    at its left limit, so max and min are read off the grid.
    """
    llB = _check_B(B)
    D = sigma.delta * llB
    obs = np.asarray(prof.obstructing, dtype=float)
    # p <= exp(log^t B)  <=>  log log p <= t log log B
    llp = np.log(np.log(obs)) if len(obs) else obs
    jumps = llp[llp > 0] / llB
    grid = _merge_grid(m, [*jumps, *(jumps - PRE_JUMP), *extra])
    counts = np.searchsorted(np.sort(llp), grid * llB + _EPS, side="right")
    values = (counts - grid * D) / math.sqrt(D)
    return PathSample("X", B, grid, values, D)


def path_Y(prof, sigma: SigmaTable, B: float, m: int = DEFAULT_GRID,
           extra=()) -> PathSample:
    """Truncated path: increments 1 - sigma_p / -sigma_p only for primes in
    (log B, B^psi(B)], psi(B) = (log log B)^(-1/4)."""
    llB = _check_B(B)
    D = sigma.delta * llB
    lo = math.log(B)
    hi = B ** (llB**-0.25)
    grid = _merge_grid(m, extra)
    if lo >= hi:
        return PathSample("Y", B, grid, np.zeros(len(grid)), D)
    sigma.require(hi)
    obs = [q for q in prof.obstructing if lo < q <= hi]
    grid = _merge_grid(m, [loglog(q) / llB for q in obs] + [loglog(hi) / llB, *extra])
    # threshold exp(log^t B), clipped to the window
    thresh = np.exp(np.log(B) ** grid)
    top = np.minimum(thresh, hi)
    S = sigma.S
    k_lo = sigma.count_le(lo)
    k_top = np.searchsorted(sigma.primes, np.floor(top * (1 + _EPS)), side="right")
    base = S[k_lo - 1] if k_lo else 0.0
    drift = np.where(k_top > k_lo, S[np.maximum(k_top - 1, 0)] - base, 0.0)
    obs_arr = np.asarray(obs, dtype=float)
    jumps = np.searchsorted(obs_arr, top * (1 + _EPS), side="right") if len(obs) else 0
    values = (jumps - drift) / math.sqrt(D)
    values = np.where(thresh > lo, values, 0.0)
    return PathSample("Y", B, grid, values, D)


def _z_value(prof_obs, sigma: SigmaTable, n_B: int, target: np.ndarray) -> np.ndarray:
    S = sigma.S[:n_B]
    i = np.searchsorted(S, target * (1 - _EPS), side="left")
    i = np.minimum(i, n_B - 1)
    p = sigma.primes[i]
    omega = np.searchsorted(np.asarray(prof_obs, dtype=np.int64), p, side="right")
    return omega - S[i]


def path_Z(prof, sigma: SigmaTable, B: float, m: int = DEFAULT_GRID,
           extra=()) -> PathSample:
    """The sigma-clock path: at clock time t it shows
    (omega(x, p) - S(p)) / sqrt(D) for the first prime p <= B with
    S(p) >= t D.

    Besides the uniform grid, the abscissae of every up-jump and of the
    bottom of every descending stretch are included, so max and min of the
    step path are attained on the grid.
    """
    llB = _check_B(B)
    sigma.require(B)
    D = sigma.delta * llB
    n_B = sigma.count_le(B)
    S = sigma.S
    cells = [*extra]
    for q in prof.obstructing:
        if q > B:
            break
        i = sigma.index(q)
        cells.append(S[i] / D)
        if i:
            cells.append((S[i] - sigma.sigma[i]) / D)
    cells.append(S[n_B - 1] / D)
    grid = _merge_grid(m, cells)
    values = _z_value(prof.obstructing, sigma, n_B, grid * D) / math.sqrt(D)
    return PathSample("Z", B, grid, values, D)


def sup_distance(a: PathSample, b: PathSample, builder_a, builder_b, prof, sigma) -> float:
    """sup over the union of both grids of |a - b|, each path evaluated
    exactly at every abscissa."""
    grid = np.union1d(a.grid, b.grid)
    a2 = builder_a(prof, sigma, a.B, 2, extra=grid)
    b2 = builder_b(prof, sigma, b.B, 2, extra=grid)
    return float(np.max(np.abs(a2.values - b2.values)))


def functional_max(path: PathSample) -> float:
    return float(np.max(path.values))


def functional_absmax(path: PathSample) -> float:
    return float(np.max(np.abs(path.values)))


def x_path_extremes(obstructing, delta: float, B: float) -> tuple[float, float]:
    """Max and min of the X path over t in [0, 1] without building a grid.

    Between jumps X decreases linearly, so the max is read at t = 0 and at
    every jump, the min just before every jump and at t = 1.
    """
    llB = _check_B(B)
    D = delta * llB
    obs = np.asarray(obstructing, dtype=float)
    obs = obs[obs <= B]
    llp = np.log(np.log(obs)) if len(obs) else obs
    c0 = int(np.count_nonzero(llp <= 0))
    jumps = llp[llp > 0]
    k = c0 + np.arange(1, len(jumps) + 1)
    top = max(c0, float(np.max(k - jumps * delta))) if len(jumps) else c0
    bottom = min(c0, len(obs) - D)
    if len(jumps):
        bottom = min(bottom, float(np.min(k - 1 - jumps * delta)))
    return top / math.sqrt(D), bottom / math.sqrt(D)


def walk_extremes(prof, sigma: SigmaTable, B: float) -> tuple[float, float]:
    """Max and min over primes p <= B of omega(x, p) - S(p), unnormalized.

    Within a stretch of constant omega the value only decreases, so the
    extremes are read at the first and last prime of every stretch.
    """
    n_B = sigma.count_le(B)
    S = sigma.S
    hi_v, lo_v = -math.inf, math.inf
    starts = [(0, 0)]
    for k, lo, hi in _segments(prof.obstructing, sigma, n_B):
        starts.append((k, lo))
    for j, (k, lo) in enumerate(starts):
        end = starts[j + 1][1] if j + 1 < len(starts) else n_B
        if end <= lo:
            continue
        hi_v = max(hi_v, k - S[lo])
        lo_v = min(lo_v, k - S[end - 1])
    return float(hi_v), float(lo_v)


def functional_l2(prof, sigma: SigmaTable, B: float, scale: float | None = None) -> float:
    """sum_{p<=B} sigma_p (omega(x,p) - S(p))^2 / (Delta log log B)^2.

    On a stretch where omega = k the sum is k^2 sum(s) - 2k sum(sS) + sum(sSS),
    read off the prefix tables.
    """
    llB = _check_B(B)
    sigma.require(B)
    D = sigma.delta * llB if scale is None else scale
    n_B = sigma.count_le(B)
    S, sS, sSS = sigma.S, sigma.sS, sigma.sSS

    def window(arr, lo, hi):
        return arr[hi - 1] - (arr[lo - 1] if lo else 0.0)

    bounds = [0] + [lo for _, lo, _ in _segments(prof.obstructing, sigma, n_B)] + [n_B]
    total = 0.0
    for k in range(len(bounds) - 1):
        lo, hi = bounds[k], bounds[k + 1]
        if hi <= lo:
            continue
        total += k * k * window(S, lo, hi) - 2 * k * window(sS, lo, hi) + window(sSS, lo, hi)
    return total / D**2


def functional_l2_naive(prof, sigma: SigmaTable, B: float, scale: float | None = None) -> float:
    """Per-prime reference for :func:`functional_l2`."""
    llB = _check_B(B)
    D = sigma.delta * llB if scale is None else scale
    n_B = sigma.count_le(B)
    omega = np.searchsorted(np.asarray(prof.obstructing, dtype=np.int64),
                            sigma.primes[:n_B], side="right")
    dev = omega - sigma.S[:n_B]
    return float(np.sum(sigma.sigma[:n_B] * dev * dev)) / D**2


def occupation_truncated(prof, sigma: SigmaTable, P: float) -> float:
    """Sum of sigma_p over p in C_f(x) with p <= P (unnormalized)."""
    return c_hat_value(prof, sigma, P)


def occupation_naive(prof, sigma: SigmaTable, P: float) -> float:
    n = sigma.count_le(P)
    omega = np.searchsorted(np.asarray(prof.obstructing, dtype=np.int64),
                            sigma.primes[:n], side="right")
    inside = omega > sigma.S[:n]
    return float(np.sum(sigma.sigma[:n][inside]))


def c_hat_complete(prof, sigma: SigmaTable) -> float:
    """The full (untruncated) sum of sigma_p over C_f(x).

    Needs every obstructing prime inside the table. Past the table limit P,
    omega(x, p) = omega(x) is constant and S increases by steps below
    d/(P+1), so the remaining members are the primes up to where S reaches
    omega, contributing omega - S(P) up to one step.
    """
    if prof.obstructing and prof.obstructing[-1] > sigma.limit:
        raise CapacityError(f"obstructing prime {prof.obstructing[-1]} beyond sigma table "
                            f"limit {sigma.limit}")
    P = sigma.limit
    tail = max(0.0, len(prof.obstructing) - float(sigma.S[-1]))
    return c_hat_value(prof, sigma, P) + tail


def functional_occupation(prof, sigma: SigmaTable, height: int | None = None) -> float | None:
    """C_f(x) hat / (Delta log log H(x)); None when H(x) < 16."""
    H = prof.point.height if height is None else height
    if H < 16:
        return None
    return c_hat_complete(prof, sigma) / (sigma.delta * loglog(H))


def _nonzero_index(sigma: SigmaTable) -> np.ndarray:
    cache = sigma.__dict__.get("_nz")
    if cache is None:
        cache = np.flatnonzero(sigma.sigma > 0)
        object.__setattr__(sigma, "_nz", cache)
    return cache


def k_tilde(prof, sigma: SigmaTable, B: float, t: float,
            K: Callable[[np.ndarray], np.ndarray]) -> float:
    """(1/D) sum_{p <= exp(log^t B)} sigma_p K((omega(x,p) - S(p)) / sqrt(D)).

    Evaluated prime by prime (primes with sigma_p = 0 contribute nothing),
    so K may be any vectorized bounded function.
    """
    llB = _check_B(B)
    D = sigma.delta * llB
    T = math.exp(math.log(B) ** t)
    sigma.require(T)
    nz = _nonzero_index(sigma)
    n = sigma.count_le(T)
    idx = nz[: np.searchsorted(nz, n)]
    omega = np.searchsorted(np.asarray(prof.obstructing, dtype=np.int64),
                            sigma.primes[idx], side="right")
    arg = (omega - sigma.S[idx]) / math.sqrt(D)
    return float(np.sum(sigma.sigma[idx] * K(arg))) / D
