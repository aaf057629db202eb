"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import math

import numpy as np


def naive_ward(points: np.ndarray) -> list[tuple[int, int, float, int]]:
    """O(n^3) Lance-Williams Ward on squared Euclidean distances.

    Scans every pair of live clusters at every step; ties go to the
    lexicographically smallest (left, right) node-id pair.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(pts)
    d = {}
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = float(sum((pts[i][t] - pts[j][t]) ** 2 for t in range(pts.shape[1])))
    size = {i: 1 for i in range(n)}
    live = list(range(n))
    out = []
    for step in range(n - 1):
        best = None
        for x in range(len(live)):
            for y in range(x + 1, len(live)):
                a, b = sorted((live[x], live[y]))
                cand = (d[a, b], a, b)
                if best is None or cand < best:
                    best = cand
        h, a, b = best
        new = n + step
        out.append((a, b, h, size[a] + size[b]))
        for c in live:
            if c in (a, b):
                continue
            dac = d[min(a, c), max(a, c)]
            dbc = d[min(b, c), max(b, c)]
            na, nb, nc = size[a], size[b], size[c]
            d[c, new] = ((na + nc) * dac + (nb + nc) * dbc - nc * h) / (na + nb + nc)
        size[new] = size[a] + size[b]
        live = [c for c in live if c not in (a, b)] + [new]
    return out


def naive_silhouette(dist: np.ndarray, labels) -> list[float]:
    n = len(labels)
    out = []
    for i in range(n):
        same = [dist[i][j] for j in range(n) if j != i and labels[j] == labels[i]]
        if not same:
            out.append(0.0)
            continue
        a = sum(same) / len(same)
        b = math.inf
        for c in set(labels):
            if c == labels[i]:
                continue
            others = [dist[i][j] for j in range(n) if labels[j] == c]
            b = min(b, sum(others) / len(others))
        out.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return out


def medoid_cost(dist: np.ndarray, medoids) -> float:
    return float(dist[:, list(medoids)].min(axis=1).sum())


def improving_swap(dist: np.ndarray, medoids, tol: float = 1e-9) -> tuple[int, int] | None:
    """Any single medoid/non-medoid exchange that lowers the cost, else None."""
    base = medoid_cost(dist, medoids)
    meds = list(medoids)
    for pos in range(len(meds)):
        for h in range(len(dist)):
            if h in meds:
                continue
            trial = meds[:pos] + [h] + meds[pos + 1:]
            if medoid_cost(dist, trial) < base - tol * max(base, 1.0):
                return meds[pos], h
    return None


def betainc_series(a: float, b: float, x: float, digits: int = 40) -> float:
    """I_x(a, b) from the power series B(x; a, b) = sum_n (1-b)_n x^(a+n) / (n! (a+n)),
    summed in extended precision; the symmetry I_x(a,b) = 1 - I_(1-x)(b,a)
    keeps the argument below 1/2."""
    import mpmath

    with mpmath.workdps(digits):
        a_, b_, x_ = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(x)
        flip = x_ > mpmath.mpf(1) / 2
        if flip:
            a_, b_, x_ = b_, a_, 1 - x_
        total, term, n = mpmath.mpf(0), mpmath.mpf(1), 0  # term = (1-b)_n / n! * x^n
        while True:
            piece = term / (a_ + n)
            total += piece
            if n > 10 and abs(piece) < mpmath.mpf(10) ** (-digits + 5) * abs(total):
                break
            term *= (n + 1 - b_) * x_ / (n + 1)
            n += 1
        val = total * x_**a_ / mpmath.beta(a_, b_)
        return float(1 - val if flip else val)


def monte_carlo_f_sf(f: float, df1: int, df2: int, draws: int = 1_000_000, seed: int = 2024) -> float:
    rng = np.random.default_rng(seed)
    sims = (rng.chisquare(df1, draws) / df1) / (rng.chisquare(df2, draws) / df2)
    return float((sims >= f).mean())


def monte_carlo_anova_sf(sizes, f: float, draws: int = 1_000_000, seed: int = 7) -> float:
    """Null distribution of the one-way F statistic by simulating normal groups."""
    rng = np.random.default_rng(seed)
    out = 0
    chunk = 100_000
    k, n = len(sizes), sum(sizes)
    for start in range(0, draws, chunk):
        m = min(chunk, draws - start)
        groups = [rng.standard_normal((m, s)) for s in sizes]
        means = [g.mean(axis=1) for g in groups]
        grand = sum(g.sum(axis=1) for g in groups) / n
        ssb = sum(s * (mu - grand) ** 2 for s, mu in zip(sizes, means))
        ssw = sum(((g - mu[:, None]) ** 2).sum(axis=1) for g, mu in zip(groups, means))
        out += int((((ssb / (k - 1)) / (ssw / (n - k))) >= f).sum())
    return out / draws
