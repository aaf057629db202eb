"""Synthetic contributor cohorts with planted archetypes, plus brute-force oracles.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014), implemented here
so that a seed produces the same cohort on every platform and Python/numpy
version:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)                      (all arithmetic mod 2**64)

Integers in [lo, hi] are drawn by rejection sampling on the top bits, floats
in [0, 1) as ``(u64 >> 11) * 2**-53``. Contributor ``i`` of archetype ``a``
uses its own generator seeded with ``mix(seed, a, i)`` so generation order
does not matter.
"""

from __future__ import annotations

import itertools
import json
import math
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .cluster import DistanceMatrix
from .ingest import ContributorHistory, ContributorRef

_MASK = (1 << 64) - 1
DEFAULT_COUNTS = {"on-a-mission": 40, "casual": 80, "regular": 50, "top": 15}


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        if hi < lo:
            raise ValueError("empty range")
        span = hi - lo + 1
        bits = max(span - 1, 1).bit_length()
        while True:
            v = self.next_u64() >> (64 - bits)
            if v < span:
                return lo + v


def mix(*parts: int) -> int:
    """Derive a child seed from a tuple of integers."""
    h = 0x6A09E667F3BCC909
    for p in parts:
        g = SplitMix64(h ^ (p & _MASK))
        h = g.next_u64()
    return h


@dataclass(frozen=True)
class ArchetypeSpec:
    archetype: str
    months: tuple[int, int]  # number of active months
    edits: tuple[int, int]  # edits per active month
    gaps: tuple[int, int]  # month gap when not consecutive
    consecutive_prob: float = 0.0  # chance that a gap is exactly one month
    shape: str = "uniform"  # or "triangular": mean of two uniform draws

    @classmethod
    def from_dict(cls, name: str, d: dict) -> ArchetypeSpec:
        shape = d.get("shape", "uniform")
        if shape not in ("uniform", "triangular"):
            raise ValueError(f"{name}: unknown shape {shape!r}")
        return cls(name, tuple(d["months"]), tuple(d["edits"]), tuple(d["gaps"]),
                   float(d.get("consecutive_prob", 0.0)), shape)

    def draw(self, rng: SplitMix64, lo: int, hi: int) -> int:
        if self.shape == "triangular":
            return lo + (rng.randint(0, hi - lo) + rng.randint(0, hi - lo) + 1) // 2
        return rng.randint(lo, hi)



@dataclass
class CohortConfig:
    specs: dict[str, ArchetypeSpec]
    counts: dict[str, int]
    start_month: tuple[int, int]  # month-index range for the first active month
    version: int = 1


def _month_index(text: str) -> int:
    y, m = text.split("-")
    return int(y) * 12 + int(m) - 1


def load_config(path: str | Path | None = None) -> CohortConfig:
    """Read an archetype config; ``None`` loads the packaged defaults."""
    if path is None:
        text = resources.files("wikiprofile").joinpath("data/archetypes.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text)
    if doc.get("schema") != "wikiprofile.archetypes":
        raise ValueError("not an archetype config (field 'schema')")
    specs = {name: ArchetypeSpec.from_dict(name, d) for name, d in doc["archetypes"].items()}
    counts = {name: int(c) for name, c in doc.get("counts", DEFAULT_COUNTS).items()}
    for name in counts:
        if name not in specs:
            raise ValueError(f"count given for unknown archetype {name!r}")
        if counts[name] < 1:
            raise ValueError(f"count for {name!r} must be >= 1")
    lo, hi = doc.get("start_month", ["2004-01", "2012-12"])
    return CohortConfig(specs, counts, (_month_index(lo), _month_index(hi)), int(doc.get("version", 1)))


@dataclass
class LabeledCohort:
    histories: list[ContributorHistory]
    labels: list[str]
    seed: int


def _draw_history(spec: ArchetypeSpec, rng: SplitMix64, start_range: tuple[int, int],
                  ident: ContributorRef, min_edits: int) -> ContributorHistory:
    for _ in range(10_000):
        t = spec.draw(rng, *spec.months)
        month = rng.randint(*start_range)
        months = [month]
        for _ in range(t - 1):
            if rng.random() < spec.consecutive_prob:
                month += 1
            else:
                month += spec.draw(rng, *spec.gaps)
            months.append(month)
        counts = {m: spec.draw(rng, *spec.edits) for m in months}
        total = sum(counts.values())
        if total <= min_edits:
            continue
        first = _instant(months[0], rng)
        last = _instant(months[-1], rng)
        articles = rng.randint(max(1, total // 20), max(1, total // 3))
        return ContributorHistory(ident, counts, first, last, articles)
    raise RuntimeError(f"archetype {spec.archetype!r} cannot produce more than {min_edits} edits")


def _instant(month: int, rng: SplitMix64) -> datetime:
    return datetime(month // 12, month % 12 + 1, rng.randint(1, 28),
                    rng.randint(0, 23), rng.randint(0, 59), rng.randint(0, 59), tzinfo=timezone.utc)


def generate_cohort(spec: Sequence[tuple[ArchetypeSpec, int]] | None = None, seed: int = 1,
                    start_range: tuple[int, int] | None = None, min_edits: int = 100) -> LabeledCohort:
    """Draw ``count`` histories per archetype. Same seed, same cohort."""
    if spec is None or start_range is None:
        cfg = load_config()
        if spec is None:
            spec = [(cfg.specs[name], n) for name, n in cfg.counts.items()]
        start_range = start_range or cfg.start_month
    histories, labels = [], []
    uid = 1
    for a_idx, (arch, count) in enumerate(spec):
        if count < 1:
            raise ValueError("counts must be >= 1")
        for i in range(count):
            rng = SplitMix64(mix(seed, a_idx, i))
            ident = ContributorRef.registered(uid, f"Synth-{arch.archetype}-{i + 1:04d}")
            histories.append(_draw_history(arch, rng, start_range, ident, min_edits))
            labels.append(arch.archetype)
            uid += 1
    return LabeledCohort(histories, labels, seed)


def cohort_from_config(cfg: CohortConfig, seed: int) -> LabeledCohort:
    spec = [(cfg.specs[name], n) for name, n in cfg.counts.items()]
    return generate_cohort(spec, seed, cfg.start_month)


# -- oracles ------------------------------------------------------------------

def exhaustive_kmedoids(d: DistanceMatrix, k: int, budget: int = 1_000_000) -> tuple[tuple[int, ...], float]:
    """Globally optimal medoid set by enumeration; lexicographically smallest on ties."""
    n = d.n
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    if math.comb(n, k) > budget:
        raise ValueError(f"C({n}, {k}) = {math.comb(n, k)} exceeds the budget of {budget}")
    dist = d.square()
    best, best_cost = None, math.inf
    combos = itertools.combinations(range(n), k)
    while True:
        chunk = list(itertools.islice(combos, 4096))
        if not chunk:
            break
        idx = np.array(chunk)
        costs = dist[:, idx].min(axis=2).sum(axis=0)
        j = int(np.argmin(costs))
        if costs[j] < best_cost:
            best, best_cost = tuple(int(v) for v in idx[j]), float(costs[j])
    return best, best_cost


def adjusted_rand_index(a: Sequence, b: Sequence) -> float:
    if len(a) != len(b):
        raise ValueError(f"label sequences differ in length ({len(a)} != {len(b)})")
    _, ai = np.unique(np.asarray(a), return_inverse=True)
    _, bi = np.unique(np.asarray(b), return_inverse=True)
    table = np.zeros((ai.max(initial=-1) + 1, bi.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        return float((x * (x - 1) // 2).sum())

    index = pairs(table)
    rows = pairs(table.sum(axis=1))
    cols = pairs(table.sum(axis=0))
    total = len(a) * (len(a) - 1) / 2
    if total == 0:
        return 1.0
    expected = rows * cols / total
    max_index = (rows + cols) / 2
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)
