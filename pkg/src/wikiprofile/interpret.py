"""Cluster interpretation: PCA loadings, per-feature ANOVA / Tukey-Kramer, archetype labels."""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .features import FEATURE_NAMES, StandardizedMatrix
from .specfun import f_sf, tukey_sf

ARCHETYPES = ("on-a-mission", "casual", "regular", "top")


class InterpretError(ValueError):
    pass


class LabelingTie(InterpretError):
    """Cluster medians tie on a feature the labeling rule depends on."""


# -- PCA ----------------------------------------------------------------------

def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors as columns), unsorted.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a)))
        if off.max(initial=0.0) <= tol:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise ArithmeticError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


@dataclass
class PcaModel:
    means: np.ndarray
    scales: np.ndarray
    loadings: np.ndarray  # columns are components, strongest first
    eigenvalues: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.eigenvalues / self.eigenvalues.sum()

    def to_dict(self) -> dict:
        return {
            "features": list(self.names),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_ratio": self.explained_ratio.tolist(),
            "loadings": self.loadings.tolist(),
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
        }


def pca_fit(data: StandardizedMatrix) -> PcaModel:
    z = data.values
    n, p = z.shape
    if n <= p:
        raise InterpretError(f"PCA needs more rows than features ({n} <= {p})")
    corr = (z.T @ z) / (n - 1)
    corr = (corr + corr.T) / 2
    vals, vecs = jacobi_eigh(corr)
    vals = np.maximum(vals, 0.0)
    order = sorted(range(p), key=lambda i: -vals[i])
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(p):
        col = vecs[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            vecs[:, j] = -col
    return PcaModel(data.means.copy(), data.scales.copy(), vecs, vals, tuple(data.names))


def pca_project(model: PcaModel, raw: np.ndarray, dims: int = 3) -> np.ndarray:
    """Scores of raw feature rows on the first ``dims`` components."""
    if not 1 <= dims <= model.loadings.shape[1]:
        raise InterpretError(f"dims must be in [1, {model.loadings.shape[1]}]")
    z = (np.atleast_2d(np.asarray(raw, dtype=float)) - model.means) / model.scales
    return z @ model.loadings[:, :dims]


def pca_reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    dims = scores.shape[1]
    return scores @ model.loadings[:, :dims].T * model.scales + model.means


# -- ANOVA / Tukey ------------------------------------------------------------

@dataclass
class AnovaResult:
    ss_between: float
    ss_within: float
    df_between: int
    df_within: int
    f: float
    p: float
    degenerate: bool = False

    @property
    def ms_within(self) -> float:
        return self.ss_within / self.df_within


def _check_groups(groups: Sequence[Sequence[float]]) -> list[np.ndarray]:
    arrs = [np.asarray(g, dtype=float) for g in groups]
    if len(arrs) < 2:
        raise InterpretError("need at least 2 groups")
    if any(len(g) < 2 for g in arrs):
        raise InterpretError("every group needs at least 2 members")
    return arrs


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    arrs = _check_groups(groups)
    allv = np.concatenate(arrs)
    grand = allv.mean()
    ss_b = float(sum(len(g) * (g.mean() - grand) ** 2 for g in arrs))
    ss_w = float(sum(((g - g.mean()) ** 2).sum() for g in arrs))
    df_b = len(arrs) - 1
    df_w = len(allv) - len(arrs)
    if ss_w == 0.0:
        if ss_b == 0.0:
            return AnovaResult(ss_b, ss_w, df_b, df_w, 0.0, 1.0, degenerate=True)
        return AnovaResult(ss_b, ss_w, df_b, df_w, math.inf, 0.0, degenerate=True)
    f = (ss_b / df_b) / (ss_w / df_w)
    return AnovaResult(ss_b, ss_w, df_b, df_w, f, f_sf(f, df_b, df_w))


@dataclass
class TukeyPair:
    a: int
    b: int
    mean_diff: float  # mean of group a minus mean of group b
    std_err: float
    q: float
    p_adj: float
    reject: bool


def tukey_hsd(groups: Sequence[Sequence[float]], alpha: float = 0.05,
              labels: Sequence[int] | None = None) -> list[TukeyPair]:
    """All-pairs Tukey-Kramer comparison."""
    arrs = _check_groups(groups)
    labels = list(labels) if labels is not None else list(range(1, len(arrs) + 1))
    an = anova_oneway(arrs)
    msw = an.ms_within
    k = len(arrs)
    out = []
    for i, j in itertools.combinations(range(k), 2):
        diff = float(arrs[i].mean() - arrs[j].mean())
        se = math.sqrt(msw / 2.0 * (1.0 / len(arrs[i]) + 1.0 / len(arrs[j])))
        if se == 0.0:
            q = 0.0 if diff == 0.0 else math.inf
        else:
            q = abs(diff) / se
        p = 1.0 if q == 0.0 else (0.0 if math.isinf(q) else tukey_sf(q, k, an.df_within))
        out.append(TukeyPair(labels[i], labels[j], diff, se, q, p, p < alpha))
    return out


# -- archetype labeling -------------------------------------------------------

@dataclass
class ClusterProfile:
    cluster: int
    size: int
    medians: dict[str, float]
    quartiles: dict[str, tuple[float, float, float, float, float]]  # min, q1, median, q3, max
    label: str | None = None
    above: list[str] = field(default_factory=list)
    below: list[str] = field(default_factory=list)


@dataclass
class ProfileReport:
    k: int
    clusters: list[ClusterProfile]
    anova: dict[str, AnovaResult]
    tukey: dict[str, list[TukeyPair]]

    def labels(self) -> dict[int, str | None]:
        return {c.cluster: c.label for c in self.clusters}


def _unique_argmax(values: dict[int, float], feature: str) -> int:
    top = max(values.values())
    winners = [c for c, v in values.items() if v == top]
    if len(winners) > 1:
        raise LabelingTie(f"clusters {winners} tie on median {feature}; label them manually")
    return winners[0]


def archetype_labels(medians: dict[int, dict[str, float]]) -> dict[int, str]:
    """Map four clusters to archetypes from their feature medians.

    top: highest ratio; on-a-mission: highest max_gap among the rest;
    regular: higher num_cons of the remaining two; casual: the last one.
    """
    if len(medians) != 4:
        raise InterpretError("archetype labels are defined for exactly 4 clusters")
    left = dict(medians)
    top = _unique_argmax({c: m["ratio"] for c, m in left.items()}, "ratio")
    del left[top]
    mission = _unique_argmax({c: m["max_gap"] for c, m in left.items()}, "max_gap")
    del left[mission]
    regular = _unique_argmax({c: m["num_cons"] for c, m in left.items()}, "num_cons")
    del left[regular]
    (casual,) = left
    return {top: "top", mission: "on-a-mission", regular: "regular", casual: "casual"}


def label_clusters(features: np.ndarray, assignment, alpha: float = 0.05,
                   names: Sequence[str] = FEATURE_NAMES, with_tests: bool = True,
                   name_archetypes: bool = True) -> ProfileReport:
    """Summarize each cluster and, for k = 4, name it after an archetype.

    ``features`` holds raw (unstandardized) values, one row per contributor.
    A feature counts as evidence for a cluster when its ANOVA is significant
    and the cluster median sits above or below the overall median.
    """
    x = np.asarray(features, dtype=float)
    labels = np.asarray(assignment)
    ids = sorted(int(c) for c in np.unique(labels))
    overall = np.median(x, axis=0)
    groups = {c: x[labels == c] for c in ids}

    anova, tukey = {}, {}
    if with_tests and len(ids) >= 2 and all(len(g) >= 2 for g in groups.values()):
        for j, name in enumerate(names):
            cols = [groups[c][:, j] for c in ids]
            anova[name] = anova_oneway(cols)
            tukey[name] = tukey_hsd(cols, alpha, labels=ids)

    profiles = []
    for c in ids:
        g = groups[c]
        qs = np.percentile(g, [0, 25, 50, 75, 100], axis=0)
        prof = ClusterProfile(
            cluster=c,
            size=len(g),
            medians={n: float(qs[2, j]) for j, n in enumerate(names)},
            quartiles={n: tuple(float(v) for v in qs[:, j]) for j, n in enumerate(names)},
        )
        for j, name in enumerate(names):
            if name in anova and anova[name].p < alpha:
                if prof.medians[name] > overall[j]:
                    prof.above.append(name)
                elif prof.medians[name] < overall[j]:
                    prof.below.append(name)
        profiles.append(prof)

    if name_archetypes and len(ids) == 4:
        names_by_cluster = archetype_labels({p.cluster: p.medians for p in profiles})
        for p in profiles:
            p.label = names_by_cluster[p.cluster]
    return ProfileReport(len(ids), profiles, anova, tukey)
