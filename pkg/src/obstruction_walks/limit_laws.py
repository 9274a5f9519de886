"""Limiting distributions and the Feynman-Kac fundamental solution."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy import integrate, special

from .errors import NumericalError, ValidationError


def gaussian_cdf(z):
    return special.ndtr(z)


def half_normal_tail(z):
    """P(max_{[0,1]} W >= z) = 2(1 - Phi(z)) for z >= 0."""
    if np.any(np.asarray(z) < 0):
        raise ValidationError("half_normal_tail needs z >= 0")
    return 2.0 * special.ndtr(-np.asarray(z, dtype=float))


def half_normal_cdf(z):
    z = np.asarray(z, dtype=float)
    return np.where(z > 0, 1.0 - 2.0 * special.ndtr(-np.abs(z)), 0.0)


def _tau_inf_series(z: float, tol: float = 1e-12) -> float:
    c = math.pi**2 / (8.0 * z * z)
    total, m = 0.0, 0
    while True:
        k = 2 * m + 1
        term = math.exp(-k * k * c) / k
        total += term if m % 2 == 0 else -term
        if term < tol:
            break
        m += 1
    return 4.0 / math.pi * total


def _tau_inf_images(z: float) -> float:
    """Same law via the method of images, fast for large z:
    sum_k (-1)^k [Phi((2k+1)z) - Phi((2k-1)z)]."""
    k = np.arange(-20, 21)
    terms = special.ndtr((2 * k + 1) * z) - special.ndtr((2 * k - 1) * z)
    return float(np.sum(np.where(k % 2 == 0, terms, -terms)))


def tau_infinity(z):
    """P(max_{[0,1]} |W| < z): the alternating series
    (4/pi) sum (-1)^m/(2m+1) exp(-(2m+1)^2 pi^2 / (8 z^2)).

    The series needs about 1.5 z terms; above z = 8 the image-sum form is
    used instead.
    """
    def one(x):
        if x <= 0:
            raise ValidationError("tau_infinity needs z > 0")
        return _tau_inf_series(x) if x <= 8 else _tau_inf_images(x)

    if np.ndim(z) == 0:
        return one(float(z))
    return np.array([one(float(x)) for x in np.asarray(z).ravel()]).reshape(np.shape(z))


def tau_infinity_cdf(z):
    """tau_infinity extended by 0 on z <= 0 (CDF of max |W|)."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    if np.any(pos):
        out[pos] = tau_infinity(z[pos])
    return out


def arcsine_cdf(u):
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr > 1)):
        raise ValidationError("arcsine_cdf needs u in [0, 1]")
    return 2.0 / math.pi * np.arcsin(np.sqrt(u_arr))


def arcsine_cdf_clipped(u):
    return arcsine_cdf(np.clip(np.asarray(u, dtype=float), 0.0, 1.0))


def _theta_terms(q: float, tol: float = 1e-15) -> np.ndarray:
    if not 0 < q < 1:
        raise ValidationError("theta series needs 0 < q < 1")
    # q^((2m+1)^2/4) < tol  <=>  (2m+1)^2 > 4 log(tol) / log(q)
    kmax = math.sqrt(4 * math.log(tol) / math.log(q))
    k = np.arange(1, int(kmax) + 3, 2, dtype=float)
    return k


def theta1(y, q: float):
    """2 sum_m (-1)^m q^((2m+1)^2/4) sin((2m+1) y)."""
    k = _theta_terms(q)
    sign = np.where(np.arange(len(k)) % 2 == 0, 1.0, -1.0)
    coef = 2 * sign * q ** (k * k / 4)
    return np.sin(np.multiply.outer(np.asarray(y, dtype=float), k)) @ coef


def theta2(y, q: float):
    """y-derivative of theta1."""
    k = _theta_terms(q)
    sign = np.where(np.arange(len(k)) % 2 == 0, 1.0, -1.0)
    coef = 2 * sign * k * q ** (k * k / 4)
    return np.cos(np.multiply.outer(np.asarray(y, dtype=float), k)) @ coef


# t = pi/2 - w^2 removes the (cos t)^(-1/2) endpoint singularity
_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)
_W_MAX = math.sqrt(math.pi / 2)
_W_NODES = (_GL_X + 1) / 2 * _W_MAX
_W_WEIGHTS = _GL_W * _W_MAX / 2 * 2 * _W_NODES / np.sqrt(np.sin(_W_NODES**2))
_T_NODES = math.pi / 2 - _W_NODES**2

# Prefactor making the double integral a probability distribution; the
# double integral with 4/pi^(3/2) tends to 16, not 1.
TAU2_PREFACTOR = 1.0 / (4.0 * math.pi**1.5)


def _tau2_inner(u: float) -> float:
    if u <= 0:
        return 0.0
    q = math.exp(-1.0 / (4.0 * u))
    if q < 1e-300:
        return 0.0
    return float(np.dot(_W_WEIGHTS, theta2(_T_NODES / 2, q))) / u**1.5


def tau2(z, epsabs: float = 1e-7):
    """Limiting CDF of the integral of W^2 over [0, 1], as the double
    integral over u in [0, z/2] and t in [0, pi/2] of
    theta2(t/2, exp(-1/(4u))) (cos t)^(-1/2) u^(-3/2)."""
    def one(x):
        if x < 0:
            raise ValidationError("tau2 needs z >= 0")
        if x == 0:
            return 0.0
        if x > 60:
            return 1.0
        pts = [p for p in (0.05, 0.25, 1.0) if p < x / 2]
        val, err = integrate.quad(_tau2_inner, 0.0, x / 2, epsabs=epsabs, limit=400,
                                  points=pts or None)
        if err > 1e-4:
            raise NumericalError(f"tau2({x}) quadrature error {err:g}")
        return min(1.0, max(0.0, TAU2_PREFACTOR * val))

    if np.ndim(z) == 0:
        return one(float(z))
    return np.array([one(float(x)) for x in np.asarray(z).ravel()]).reshape(np.shape(z))


def tau2_series(z):
    """Independent form of the same law from inverting the Laplace
    transform (cosh sqrt(2 lam))^(-1/2):
    sqrt(2) sum_j binom(-1/2, j) erfc((4j+1) / (2 sqrt(2z)))."""
    z = np.asarray(z, dtype=float)
    j = np.arange(0, 400)
    coef = special.binom(-0.5, j)
    with np.errstate(divide="ignore"):
        arg = np.multiply.outer(1.0 / np.sqrt(2 * np.maximum(z, 1e-300)), (4 * j + 1) / 2)
    out = math.sqrt(2) * (special.erfc(arg) @ coef)
    return np.where(z > 0, out, 0.0)


def tau2_interpolated(z_max: float = 6.0, n: int = 600) -> Callable:
    """Vectorized tau2 built by monotone interpolation on a fine grid."""
    from scipy.interpolate import PchipInterpolator

    zs = np.concatenate([[0.0], np.geomspace(1e-3, z_max, n)])
    vals = np.array([tau2(float(x)) for x in zs])
    vals = np.maximum.accumulate(vals)
    f = PchipInterpolator(zs, vals)

    def cdf(z):
        z = np.asarray(z, dtype=float)
        return np.where(z <= 0, 0.0, np.where(z >= z_max, 1.0, f(np.clip(z, 0, z_max))))

    return cdf


@dataclass
class FundamentalSolution:
    s: float
    u: float
    K: Callable = field(repr=False)
    L: float
    h: float
    x: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    integral: float
    jump_residual: float
    boundary_ratio: float


@numba.njit(cache=True)
def _rk4_linear(c0, c_half, c1, h, y0, dy0):
    """RK4 for y'' = c(x) y with c sampled at each step's start, middle
    and end."""
    n = len(c0)
    y = np.empty(n + 1)
    dy = np.empty(n + 1)
    y[0], dy[0] = y0, dy0
    for i in range(n):
        a, b = y[i], dy[i]
        k1y, k1d = b, c0[i] * a
        k2y, k2d = b + 0.5 * h * k1d, c_half[i] * (a + 0.5 * h * k1y)
        k3y, k3d = b + 0.5 * h * k2d, c_half[i] * (a + 0.5 * h * k2y)
        k4y, k4d = b + h * k3d, c1[i] * (a + h * k3y)
        y[i + 1] = a + h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y)
        dy[i + 1] = b + h / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
    return y, dy


def _branch(coef: Callable, start: float, h: float, n: int):
    """Integrate from x = start toward 0 (n steps of signed size h), starting
    on the decaying exponential."""
    xs = start + h * np.arange(n + 1)
    c = coef(xs)
    c_half = coef(xs[:-1] + h / 2)
    # one-sided limits at the endpoints so a jump of K at 0 is respected
    c0 = coef(xs[:-1] + h * 1e-9)
    c1 = coef(xs[1:] - h * 1e-9)
    k0 = math.sqrt(c[0])
    y, dy = _rk4_linear(c0, c_half, c1, h, 1.0, k0 * math.copysign(1.0, h))
    return xs, y, dy


def fk_solve(s: float, u: float, K: Callable, L: float | None = None,
             h: float | None = None, sup_K: float | None = None) -> FundamentalSolution:
    """Fundamental solution of (1/2) psi'' = (s + u K(x)) psi.

    Both half-line branches are integrated inward from +-L starting on the
    decaying exponential, then scaled to be continuous at 0 with
    psi'(+0) - psi'(-0) = -2.
    """
    if s <= 0 or u <= 0:
        raise ValidationError("fk_solve needs s > 0 and u > 0")
    if L is None:
        L = 20.0 / math.sqrt(2 * s) + 2.0
    if sup_K is None:
        probe = np.asarray(K(np.linspace(-L, L, 20001)), dtype=float)
        sup_K = float(np.max(probe))
    if h is None:
        h = 1e-3 * min(1.0, 1.0 / math.sqrt(2 * (s + u * sup_K)))
    n = int(math.ceil(L / h))
    h = L / n

    def coef(x):
        return 2.0 * (s + u * np.asarray(K(x), dtype=float))

    xl, yl, dl = _branch(coef, -L, h, n)      # -L -> 0
    xr, yr, dr = _branch(coef, L, -h, n)      # +L -> 0
    # a*yl(0) = b*yr(0);  b*dr(0) - a*dl(0) = -2
    ylz, dlz, yrz, drz = yl[-1], dl[-1], yr[-1], dr[-1]
    denom = drz * ylz / yrz - dlz
    a = -2.0 / denom
    b = a * ylz / yrz
    x = np.concatenate([xl, xr[::-1][1:]])
    psi = np.concatenate([a * yl, b * yr[::-1][1:]])
    dpsi_left, dpsi_right = a * dlz, b * drz
    jump = abs(dpsi_right - dpsi_left + 2.0)
    integral = float(integrate.simpson(psi, x=x))
    peak = float(np.max(psi))
    ratio = float(max(psi[0], psi[-1]) / peak)
    if not np.all(psi >= 0) or jump > 1e-6 or ratio > 1e-8:
        raise NumericalError(f"fk_solve(s={s}, u={u}) failed: jump residual {jump:g}, "
                             f"boundary ratio {ratio:g}, min psi {psi.min():g}")
    return FundamentalSolution(s, u, K, L, h, x, psi, integral, jump, ratio)


def indicator_nonneg(x):
    return (np.asarray(x) >= 0).astype(float)


def clamped_square(x, cap: float = 25.0):
    return np.minimum(np.asarray(x, dtype=float) ** 2, cap)


def zero_potential(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class FKEstimate:
    s: float
    u: float
    mean: float
    se: float


def fk_lhs_mc_many(s_values, u_values, K: Callable, n_walks: int, seed: int,
                   dt: float = 2e-3, t_max: float | None = None,
                   chunk: int = 250) -> dict[tuple[float, float], FKEstimate]:
    """Monte-Carlo estimates of
    int_0^tmax e^{-st} E exp(-u int_0^t K(W_r) dr) dt
    for every (s, u), reusing one ensemble of scaled simple walks.

    Walks take steps +-sqrt(dt); the inner time integral uses the trapezoid
    rule along each walk, the outer one the trapezoid rule in t. K is read
    as the mean of its left and right limits.
    """
    from .montecarlo import _steps, stream

    s_values = [float(v) for v in s_values]
    u_values = [float(v) for v in u_values]
    if t_max is None:
        t_max = 20.0 / min(s_values)
    if t_max * min(s_values) < 20 - 1e-9:
        raise ValidationError("need t_max * s >= 20")
    n = int(math.ceil(t_max / dt))
    t = dt * np.arange(n + 1)
    trap = np.full(n + 1, dt)
    trap[[0, -1]] = dt / 2
    weights = np.stack([trap * np.exp(-s * t) for s in s_values], axis=1)
    sums = {(s, u): [0.0, 0.0] for s in s_values for u in u_values}
    done, index = 0, 0
    while done < n_walks:
        m = min(chunk, n_walks - done)
        rng = stream(seed, 2, index)
        W = np.zeros((m, n + 1))
        W[:, 1:] = np.cumsum(_steps(rng, (m, n)), axis=1, dtype=np.int32) * math.sqrt(dt)
        # midpoint of the one-sided limits: the lattice walk sits exactly on
        # a jump of K (e.g. at 0) for a positive fraction of steps
        eps = 1e-9 * math.sqrt(dt)
        k = 0.5 * (np.asarray(K(W + eps), dtype=float) + np.asarray(K(W - eps), dtype=float))
        occ = np.zeros((m, n + 1))
        occ[:, 1:] = np.cumsum((k[:, 1:] + k[:, :-1]) * (dt / 2), axis=1)
        for u in u_values:
            vals = np.exp(-u * occ) @ weights
            for j, s in enumerate(s_values):
                acc = sums[(s, u)]
                acc[0] += float(vals[:, j].sum())
                acc[1] += float((vals[:, j] ** 2).sum())
        done += m
        index += 1
    out = {}
    for (s, u), (a, b) in sums.items():
        mean = a / n_walks
        var = max(b / n_walks - mean**2, 0.0)
        out[(s, u)] = FKEstimate(s, u, mean, math.sqrt(var / n_walks))
    return out


def fk_lhs_mc(s: float, u: float, K: Callable, n_walks: int, seed: int,
              dt: float = 2e-3, t_max: float | None = None) -> FKEstimate:
    return fk_lhs_mc_many([s], [u], K, n_walks, seed, dt, t_max)[(float(s), float(u))]


def brownian_occupation_laplace(u: float) -> float:
    """E exp(-u A) for A arcsine distributed: e^{-u/2} I_0(u/2)."""
    return float(special.ive(0, u / 2))
