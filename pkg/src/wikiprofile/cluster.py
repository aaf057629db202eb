"""Ward hierarchical clustering, PAM k-medoids and partition validity indices.

Everything here is deterministic: ties are resolved towards the lowest index
and reductions happen in a fixed order.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np


class ClusterError(ValueError):
    pass


@dataclass
class DistanceMatrix:
    """Pairwise distances in condensed upper-triangle order (row-major, i < j)."""
    n: int
    condensed: np.ndarray

    def square(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n, k=1)
        out[iu] = self.condensed
        out[(iu[1], iu[0])] = self.condensed
        return out

    def __getitem__(self, ij: tuple[int, int]) -> float:
        i, j = ij
        if i == j:
            return 0.0
        if i > j:
            i, j = j, i
        return float(self.condensed[self.n * i - i * (i + 1) // 2 + (j - i - 1)])

    @classmethod
    def from_square(cls, d: np.ndarray) -> DistanceMatrix:
        d = np.asarray(d, dtype=float)
        n = d.shape[0]
        return cls(n, d[np.triu_indices(n, k=1)].copy())


def distance_matrix(data) -> DistanceMatrix:
    """Euclidean distances between the rows of ``data`` (array or StandardizedMatrix)."""
    x = np.asarray(getattr(data, "values", data), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise ClusterError("need at least 2 points")
    parts = []
    for i in range(n - 1):
        diff = x[i + 1:] - x[i]
        parts.append(np.sqrt(np.einsum("ij,ij->i", diff, diff)))
    return DistanceMatrix(n, np.concatenate(parts))


# -- Ward ---------------------------------------------------------------------

@dataclass
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass
class Dendrogram:
    """Merge table. Leaves are nodes ``0..n-1``; merge ``s`` creates node ``n+s``.
    Heights are Ward dissimilarities in squared-distance units."""
    n: int
    merges: list[Merge]

    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def to_csv(self) -> str:
        lines = ["step,left,right,height,size"]
        for s, m in enumerate(self.merges, start=1):
            lines.append(f"{s},{m.left},{m.right},{m.height:.17g},{m.size}")
        return "\n".join(lines) + "\n"

    def to_newick(self, labels: Sequence[str] | None = None) -> str:
        """Newick tree; a node sits at half its merge height, leaves at 0."""
        labels = labels or [str(i) for i in range(self.n)]
        depth = [0.0] * self.n + [m.height / 2 for m in self.merges]
        text = [_newick_label(l) for l in labels]
        for s, m in enumerate(self.merges):
            node = self.n + s
            left = f"{text[m.left]}:{depth[node] - depth[m.left]:.17g}"
            right = f"{text[m.right]}:{depth[node] - depth[m.right]:.17g}"
            text.append(f"({left},{right})")
        return (text[-1] if self.merges else text[0]) + ";\n"


def _newick_label(label: str) -> str:
    if any(ch in label for ch in " ():;,[]'\t\n"):
        return "'" + label.replace("'", "''") + "'"
    return label


def ward_cluster(d: DistanceMatrix) -> Dendrogram:
    """Agglomerative Ward clustering via the Lance-Williams update on squared distances.

    Each row caches its nearest active neighbour; only rows whose cached
    neighbour was consumed by a merge are rescanned. Among equal minimum
    dissimilarities the pair with the smallest (left, right) node ids wins.
    """
    n = d.n
    if n < 2:
        raise ClusterError("need at least 2 points")
    dis = d.square() ** 2
    np.fill_diagonal(dis, np.inf)
    size = np.ones(n)
    node = np.arange(n)  # slot -> node id
    active = np.ones(n, dtype=bool)
    row_arg = dis.argmin(axis=1)
    row_min = dis[np.arange(n), row_arg]

    merges = []
    for step in range(n - 1):
        best = row_min.min()
        pair = None
        for r in np.flatnonzero(row_min == best):
            for c in np.flatnonzero(dis[r] == best):
                a, b = sorted((int(node[r]), int(node[c])))
                if pair is None or (a, b) < pair[0]:
                    pair = ((a, b), int(r), int(c))
        (a, b), i, j = pair
        if i > j:
            i, j = j, i
        ni, nj = size[i], size[j]
        dij = dis[i, j]
        merges.append(Merge(a, b, float(dij), int(ni + nj)))
        if step == n - 2:
            break

        others = active.copy()
        others[[i, j]] = False
        nk = size[others]
        upd = ((ni + nk) * dis[i, others] + (nj + nk) * dis[j, others] - nk * dij) / (ni + nj + nk)
        # slot i becomes the merged cluster, slot j retires
        dis[i, others] = upd
        dis[others, i] = upd
        dis[j, :] = np.inf
        dis[:, j] = np.inf
        active[j] = False
        size[i] = ni + nj
        node[i] = n + step
        row_min[j] = np.inf

        rows = np.flatnonzero(others)
        closer = upd < row_min[rows]
        row_min[rows[closer]] = upd[closer]
        row_arg[rows[closer]] = i
        for r in rows[~closer & ((row_arg[rows] == i) | (row_arg[rows] == j))]:
            row_arg[r] = int(dis[r].argmin())
            row_min[r] = dis[r, row_arg[r]]
        row_arg[i] = int(dis[i].argmin())
        row_min[i] = dis[i, row_arg[i]]
    return Dendrogram(n, merges)


def cut_dendrogram(dend: Dendrogram, k: int) -> np.ndarray:
    """Flat clustering from the first ``n-k`` merges; ids 1..k ordered by smallest leaf."""
    n = dend.n
    if not 1 <= k <= n:
        raise ClusterError(f"k={k} outside [1, {n}]")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s, m in enumerate(dend.merges[: n - k]):
        new = n + s
        parent[find(m.left)] = new
        parent[find(m.right)] = new
    roots = [find(i) for i in range(n)]
    ids: dict[int, int] = {}
    labels = np.empty(n, dtype=int)
    for i, r in enumerate(roots):
        if r not in ids:
            ids[r] = len(ids) + 1
        labels[i] = ids[r]
    return labels


# -- PAM ----------------------------------------------------------------------

@dataclass
class ClusteringResult:
    k: int
    medoids: list[int]
    assignment: np.ndarray  # cluster id 1..k, cluster c has medoid medoids[c-1]
    cost: float
    build_cost: float
    avg_silhouette: float = float("nan")
    silhouettes: np.ndarray = field(default_factory=lambda: np.empty(0))
    within_ss: float = float("nan")

    def to_json(self, extra: dict | None = None) -> str:
        doc = {
            "k": self.k,
            "medoids": list(self.medoids),
            "assignment": [int(a) for a in self.assignment],
            "avg_silhouette": self.avg_silhouette,
            "within_ss": self.within_ss,
            "cost": self.cost,
        }
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def assign_to_medoids(dist: np.ndarray, medoids: Sequence[int]) -> np.ndarray:
    """Cluster ids 1..k by nearest medoid; ``medoids`` must be ascending, so
    argmin's first-hit rule breaks ties towards the lowest medoid index."""
    return dist[:, list(medoids)].argmin(axis=1) + 1


def pam(d: DistanceMatrix, k: int) -> ClusteringResult:
    """Classical BUILD + steepest-descent SWAP k-medoids."""
    n = d.n
    if not 2 <= k < n:
        raise ClusterError(f"k={k} outside [2, {n - 1}]")
    dist = d.square()
    medoids = _build(dist, k)
    build_cost = float(dist[:, medoids].min(axis=1).sum())
    medoids = _swap(dist, medoids)
    medoids.sort()
    assignment = assign_to_medoids(dist, medoids)
    cost = float(dist[np.arange(n), np.array(medoids)[assignment - 1]].sum())
    return ClusteringResult(k, medoids, assignment, cost, build_cost)


def _build(dist: np.ndarray, k: int) -> list[int]:
    n = dist.shape[0]
    first = int(np.argmin(dist.sum(axis=1)))
    medoids = [first]
    nearest = dist[:, first].copy()
    is_med = np.zeros(n, dtype=bool)
    is_med[first] = True
    while len(medoids) < k:
        # gain[c] = sum_j max(nearest[j] - d(j, c), 0)
        gain = np.maximum(nearest[:, None] - dist, 0.0).sum(axis=0)
        gain[is_med] = -np.inf
        c = int(np.argmax(gain))
        medoids.append(c)
        is_med[c] = True
        nearest = np.minimum(nearest, dist[:, c])
    return medoids


def _swap(dist: np.ndarray, medoids: list[int], max_iter: int = 10_000) -> list[int]:
    n = dist.shape[0]
    medoids = list(medoids)
    scale = max(float(dist.max()), 1.0)
    for _ in range(max_iter):
        order = sorted(medoids)
        dm = dist[:, order]  # n x k
        near_pos = dm.argmin(axis=1)
        near = dm[np.arange(n), near_pos]
        dm2 = dm.copy()
        dm2[np.arange(n), near_pos] = np.inf
        second = dm2.min(axis=1) if len(order) > 1 else np.full(n, np.inf)
        is_med = np.zeros(n, dtype=bool)
        is_med[order] = True

        best = (0.0, -1, -1)
        for pos, m in enumerate(order):
            # distance each point gets if m is removed and nothing is added
            without = np.where(near_pos == pos, second, near)
            # total cost after swapping m for candidate h, for every h at once
            cost_h = np.minimum(without[:, None], dist).sum(axis=0)
            delta = cost_h - near.sum()
            delta[is_med] = np.inf
            h = int(np.argmin(delta))
            if delta[h] < best[0]:
                best = (float(delta[h]), m, h)
        if best[0] >= -1e-12 * scale:
            break
        _, m, h = best
        medoids[medoids.index(m)] = h
    return medoids


# -- validity indices ---------------------------------------------------------

def silhouette(d: DistanceMatrix, assignment) -> tuple[np.ndarray, float]:
    """Per-point silhouette widths and their mean. Singletons score 0."""
    labels = np.asarray(assignment)
    uniq, inv = np.unique(labels, return_inverse=True)
    if len(uniq) < 2:
        raise ClusterError("silhouette needs at least 2 clusters")
    dist = d.square()
    n = d.n
    onehot = np.zeros((n, len(uniq)))
    onehot[np.arange(n), inv] = 1.0
    sums = dist @ onehot  # sums[i, c] = total distance from i to cluster c
    counts = onehot.sum(axis=0)
    own = counts[inv]
    a = np.where(own > 1, sums[np.arange(n), inv] / np.maximum(own - 1, 1), 0.0)
    means = sums / counts
    means[np.arange(n), inv] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return s, float(s.mean())


def within_ss(data, assignment) -> float:
    x = np.asarray(getattr(data, "values", data), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    labels = np.asarray(assignment)
    total = 0.0
    for c in np.unique(labels):
        pts = x[labels == c]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


@dataclass
class KDiagnostics:
    k: int
    avg_silhouette: float
    within_ss: float
    cost: float


@dataclass
class Selection:
    k: int
    result: ClusteringResult
    table: list[KDiagnostics]


def select_k(d: DistanceMatrix, data, k_range: Sequence[int] = range(2, 11), threads: int = 1) -> Selection:
    """Run PAM for every k and keep the k with the widest average silhouette
    (the smaller k on an exact tie)."""
    ks = list(k_range)
    if not ks or min(ks) < 2 or max(ks) > d.n - 1:
        raise ClusterError(f"k range must lie within [2, {d.n - 1}]")

    def run(k: int) -> ClusteringResult:
        res = pam(d, k)
        res.silhouettes, res.avg_silhouette = silhouette(d, res.assignment)
        res.within_ss = within_ss(data, res.assignment)
        return res

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, ks))
    else:
        results = [run(k) for k in ks]
    best = None
    for res in results:
        if best is None or res.avg_silhouette > best.avg_silhouette:
            best = res
    table = [KDiagnostics(r.k, r.avg_silhouette, r.within_ss, r.cost) for r in results]
    return Selection(best.k, best, table)
