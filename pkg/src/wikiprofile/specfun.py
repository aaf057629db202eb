"""Distribution functions needed by the ANOVA and Tukey tables."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float, max_iter: int = 10_000) -> float:
    """Continued fraction for I_x(a, b), modified Lentz evaluation."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _log_prefactor(a: float, b: float, x: float) -> float:
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
            + a * math.log(x) + b * math.log1p(-x))


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    front = math.exp(_log_prefactor(a, b, x))
    # the fraction converges fastest below the mean of the distribution
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f: float, df1: float, df2: float) -> float:
    """Upper tail P(F > f) of the F(df1, df2) distribution."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _panels(lo: float, hi: float, panels: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gauss_legendre(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    half = (edges[1:] - edges[:-1]) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def _range_cdf_normal(w: np.ndarray, k: int, nodes: int) -> np.ndarray:
    """P(range of k iid standard normals < w), vectorized over w."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    z, wz = _panels(-8.5, 8.5, 8, nodes)
    phi = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    cz = ndtr(z)
    inner = np.clip(cz[None, :] - ndtr(z[None, :] - w[:, None]), 0.0, 1.0)
    out = k * (inner ** (k - 1) * (phi * wz)[None, :]).sum(axis=1)
    return np.clip(np.where(w > 0, out, 0.0), 0.0, 1.0)


def ptukey(q: float, k: int, df: float, nodes: int = 64) -> float:
    """CDF of the studentized range statistic for ``k`` groups and ``df`` error
    degrees of freedom, by nested Gauss-Legendre quadrature.

    The outer integral runs over s = S/sigma, whose density is that of
    sqrt(chi2_df / df); ``df=inf`` drops it.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if q <= 0:
        return 0.0
    if math.isinf(df):
        return float(_range_cdf_normal(np.array([q]), k, nodes)[0])
    spread = 1.0 / math.sqrt(2.0 * df)  # asymptotic sd of s
    lo = max(0.0, 1.0 - 14.0 * spread) if df > 20 else 0.0
    hi = 1.0 + 14.0 * spread if df > 20 else 1.0 + 14.0 / math.sqrt(df) + 4.0
    s, ws = _panels(lo, hi, 8, nodes)
    s = s[s > 0]
    ws = ws[-len(s):]
    log_dens = (math.log(2.0) + (df / 2.0) * math.log(df / 2.0) - math.lgamma(df / 2.0)
                + (df - 1.0) * np.log(s) - df * s * s / 2.0)
    dens = np.exp(log_dens)
    val = float((ws * dens * _range_cdf_normal(q * s, k, nodes)).sum())
    return min(max(val, 0.0), 1.0)


def tukey_sf(q: float, k: int, df: float) -> float:
    return min(max(1.0 - ptukey(q, k, df), 0.0), 1.0)
