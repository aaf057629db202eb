"""Contributor filtering and monthly-activity features."""

from __future__ import annotations

import csv
import math
import statistics
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields

import numpy as np

from .ingest import ContributorHistory, SchemaError

FEATURE_NAMES = ("ratio", "mean_gap", "max_gap", "num_cons", "mean_month", "sd")
EXTENDED_NAMES = FEATURE_NAMES + (
    "total_edits", "days_active", "min_gap", "median_gap", "median_month", "num_active_months",
)
CSV_HEADER = ("contributor",) + FEATURE_NAMES + ("n_articles", "total_edits")
FEATURES_SCHEMA = "wikiprofile.features"
FEATURES_VERSION = 1


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    ratio: float
    mean_gap: float
    max_gap: int
    num_cons: int
    mean_month: float
    sd: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class ExtendedFeatureVector:
    base: FeatureVector
    total_edits: int
    days_active: int
    min_gap: int
    median_gap: float
    median_month: float
    num_active_months: int

    def as_array(self) -> np.ndarray:
        extra = (self.total_edits, self.days_active, self.min_gap,
                 self.median_gap, self.median_month, self.num_active_months)
        return np.array(astuple(self.base) + extra, dtype=float)


@dataclass(frozen=True)
class FeatureRow:
    """One line of the feature table."""
    contributor: str
    features: FeatureVector
    n_articles: int
    total_edits: int


def filter_contributors(histories: Iterable[ContributorHistory], min_edits: int = 100) -> list[ContributorHistory]:
    """Keep registered non-bot contributors with more than ``min_edits`` edits
    spread over at least two calendar months."""
    kept = []
    for h in histories:
        c = h.contributor
        if c.is_anonymous or c.bot:
            continue
        if h.total_edits <= min_edits or len(h.monthly_counts) < 2:
            continue
        kept.append(h)
    return kept


def days_active(history: ContributorHistory) -> int:
    """Calendar days from first to last edit, both ends included."""
    return (history.last_edit.date() - history.first_edit.date()).days + 1


def _gaps(months: Sequence[int]) -> list[int]:
    return [b - a for a, b in zip(months, months[1:])]


def compute_features(history: ContributorHistory) -> FeatureVector:
    months = history.active_months
    if len(months) < 2:
        raise ContractError(f"{history.contributor.label}: need at least 2 active months, got {len(months)}")
    gaps = _gaps(months)
    counts = [history.monthly_counts[m] for m in months]
    total = sum(counts)
    return FeatureVector(
        ratio=total / days_active(history),
        mean_gap=sum(gaps) / len(gaps),
        max_gap=max(gaps),
        num_cons=sum(1 for g in gaps if g == 1),
        mean_month=total / len(months),
        sd=statistics.stdev(counts),
    )


def compute_extended_features(history: ContributorHistory) -> ExtendedFeatureVector:
    base = compute_features(history)
    months = history.active_months
    gaps = _gaps(months)
    counts = [history.monthly_counts[m] for m in months]
    return ExtendedFeatureVector(
        base=base,
        total_edits=sum(counts),
        days_active=days_active(history),
        min_gap=min(gaps),
        median_gap=statistics.median(gaps),
        median_month=statistics.median(counts),
        num_active_months=len(months),
    )


def build_feature_rows(histories: Sequence[ContributorHistory], threads: int = 1) -> list[FeatureRow]:
    """Feature rows in canonical contributor order, independent of ``threads``."""
    ordered = sorted(histories, key=lambda h: h.contributor.sort_key)

    def one(h: ContributorHistory) -> FeatureRow:
        return FeatureRow(h.contributor.label, compute_features(h), h.distinct_articles, h.total_edits)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, ordered))
    return [one(h) for h in ordered]


@dataclass
class CorrelationMatrix:
    names: tuple[str, ...]
    values: np.ndarray
    undefined: tuple[str, ...]  # zero-variance columns; their row/column holds NaN


def correlation_matrix(vectors: Sequence[ExtendedFeatureVector]) -> CorrelationMatrix:
    """Pearson correlation of the twelve extended features."""
    if len(vectors) < 3:
        raise ContractError("correlation needs at least 3 vectors")
    x = np.vstack([v.as_array() for v in vectors])
    return pearson(x, EXTENDED_NAMES)


def pearson(x: np.ndarray, names: Sequence[str]) -> CorrelationMatrix:
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    ok = norms > 0
    p = x.shape[1]
    out = np.full((p, p), np.nan)
    idx = np.flatnonzero(ok)
    z = centered[:, idx] / norms[idx]
    sub = np.clip(z.T @ z, -1.0, 1.0)
    np.fill_diagonal(sub, 1.0)
    out[np.ix_(idx, idx)] = sub
    undefined = tuple(names[i] for i in range(p) if not ok[i])
    return CorrelationMatrix(tuple(names), out, undefined)


@dataclass
class StandardizedMatrix:
    values: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    names: tuple[str, ...] = FEATURE_NAMES

    def inverse(self, z: np.ndarray | None = None) -> np.ndarray:
        z = self.values if z is None else z
        return z * self.scales + self.means

    def transform(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.means) / self.scales


def standardize(data: Sequence[FeatureVector] | np.ndarray,
                names: Sequence[str] = FEATURE_NAMES) -> StandardizedMatrix:
    """Column z-scores using the sample (n-1) standard deviation."""
    if isinstance(data, np.ndarray):
        x = np.asarray(data, dtype=float)
    else:
        x = np.vstack([v.as_array() for v in data])
    if x.ndim != 2 or x.shape[0] < 2:
        raise ContractError("standardize needs at least 2 rows")
    means = x.mean(axis=0)
    scales = x.std(axis=0, ddof=1)
    for j, s in enumerate(scales):
        if not s > 0:
            raise ContractError(f"column {names[j]!r} has zero variance")
    z = (x - means) / scales
    # a second centring pass removes the rounding residue of the first
    z -= z.mean(axis=0)
    return StandardizedMatrix(z, means, scales, tuple(names))


# -- CSV --------------------------------------------------------------------

def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else format(v, ".17g")


def write_feature_csv(rows: Iterable[FeatureRow], fh) -> None:
    fh.write(f"# schema={FEATURES_SCHEMA} version={FEATURES_VERSION}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.contributor, *(_fmt(v) for v in astuple(r.features)),
                    r.n_articles, r.total_edits])


def read_feature_csv(fh) -> list[FeatureRow]:
    first = fh.readline()
    if first.strip() != f"# schema={FEATURES_SCHEMA} version={FEATURES_VERSION}":
        raise SchemaError(f"line 1: expected '# schema={FEATURES_SCHEMA} version={FEATURES_VERSION}'")
    reader = csv.reader(fh)
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise SchemaError(f"line 2: header must be {','.join(CSV_HEADER)}")
    field_types = {f.name: f.type for f in fields(FeatureVector)}
    rows = []
    for lineno, rec in enumerate(reader, start=3):
        if not rec:
            continue
        if len(rec) != len(CSV_HEADER):
            raise SchemaError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(rec)}")
        values = {}
        for name, text in zip(CSV_HEADER[1:], rec[1:]):
            try:
                values[name] = int(text) if field_types.get(name, "int") == "int" else float(text)
            except ValueError:
                raise SchemaError(f"line {lineno}: field {name!r} has invalid value {text!r}") from None
            if isinstance(values[name], float) and not math.isfinite(values[name]):
                raise SchemaError(f"line {lineno}: field {name!r} is not finite")
        fv = FeatureVector(**{k: values[k] for k in FEATURE_NAMES})
        rows.append(FeatureRow(rec[0], fv, values["n_articles"], values["total_edits"]))
    return rows


def feature_matrix(rows: Sequence[FeatureRow]) -> np.ndarray:
    return np.vstack([r.features.as_array() for r in rows])
