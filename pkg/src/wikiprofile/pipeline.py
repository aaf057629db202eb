"""File-to-file pipeline stages. Each stage reads the previous stage's output
and writes a self-describing file (schema name + version)."""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cluster, features, ingest, interpret, synth

CLUSTERING_SCHEMA = "wikiprofile.clustering"
INTERPRETATION_SCHEMA = "wikiprofile.interpretation"
CORRELATION_SCHEMA = "wikiprofile.correlation"
LABELS_SCHEMA = "wikiprofile.synthetic-labels"
VERSION = 1


def clean(obj):
    """JSON-safe copy: non-finite floats become None, numpy scalars become Python ones."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dump_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(clean(doc), indent=1, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def load_json(path: Path, schema: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ingest.SchemaError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict) or doc.get("schema") != schema:
        raise ingest.SchemaError(f"line 1: field 'schema' must be {schema!r}")
    if doc.get("version") != VERSION:
        raise ingest.SchemaError(f"line 1: unsupported field 'version' {doc.get('version')!r}")
    return doc


# -- ingest / synth -------------------------------------------------------------

@dataclass
class IngestSummary:
    events: int
    contributors: int
    stats: ingest.IngestStats


def run_ingest(dump: Path, out: Path, config: ingest.IngestConfig) -> IngestSummary:
    stats = ingest.IngestStats()
    with ingest.open_dump(dump) as src:
        histories = ingest.aggregate_histories(ingest.parse_dump(src, config, stats))
    with open(out, "w", encoding="utf-8") as fh:
        ingest.write_histories(histories.values(), fh)
    return IngestSummary(stats.events, len(histories), stats)


def run_synth(out: Path, seed: int, spec_path: Path | None = None, labels_out: Path | None = None) -> synth.LabeledCohort:
    cfg = synth.load_config(spec_path)
    cohort = synth.cohort_from_config(cfg, seed)
    with open(out, "w", encoding="utf-8") as fh:
        ingest.write_histories(cohort.histories, fh)
    if labels_out is not None:
        dump_json({
            "schema": LABELS_SCHEMA, "version": VERSION, "seed": seed,
            "labels": {h.contributor.label: lab for h, lab in zip(cohort.histories, cohort.labels)},
        }, labels_out)
    return cohort


# -- features ---------------------------------------------------------------------

def run_features(histories_path: Path, out: Path, min_edits: int = 100, threads: int = 1,
                 correlation_out: Path | None = None) -> tuple[int, int]:
    with open(histories_path, encoding="utf-8") as fh:
        histories = ingest.read_histories(fh)
    kept = features.filter_contributors(histories, min_edits)
    rows = features.build_feature_rows(kept, threads)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        features.write_feature_csv(rows, fh)
    if correlation_out is not None:
        ordered = sorted(kept, key=lambda h: h.contributor.sort_key)
        ext = [features.compute_extended_features(h) for h in ordered]
        doc = {"schema": CORRELATION_SCHEMA, "version": VERSION, "n": len(ext)}
        if len(ext) >= 3:
            cm = features.correlation_matrix(ext)
            doc.update(features=list(cm.names), matrix=cm.values, undefined=list(cm.undefined))
        dump_json(doc, correlation_out)
    return len(histories), len(rows)


def read_features(path: Path) -> list[features.FeatureRow]:
    with open(path, encoding="utf-8", newline="") as fh:
        return features.read_feature_csv(fh)


# -- cluster ----------------------------------------------------------------------

def run_cluster(features_path: Path, out_dir: Path, k_range: Sequence[int] = range(2, 11),
                threads: int = 1) -> dict:
    rows = read_features(features_path)
    if len(rows) < 3:
        raise cluster.ClusterError(f"need at least 3 contributors to cluster, got {len(rows)}")
    ks = [k for k in k_range if k <= len(rows) - 1]
    if not ks:
        raise cluster.ClusterError(f"no k in the requested range fits {len(rows)} contributors")
    z = features.standardize(features.feature_matrix(rows))
    d = cluster.distance_matrix(z)
    dend = cluster.ward_cluster(d)
    sel = cluster.select_k(d, z, ks, threads)
    labels = [r.contributor for r in rows]

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "dendrogram.csv").write_text(dend.to_csv(), encoding="utf-8")
    (out_dir / "dendrogram.nwk").write_text(dend.to_newick(labels), encoding="utf-8")
    lines = ["k,avg_silhouette,within_ss,cost,ward_within_ss"]
    ward_wss = {}
    for row in sel.table:
        ward_wss[row.k] = cluster.within_ss(z, cluster.cut_dendrogram(dend, row.k))
        lines.append(f"{row.k},{row.avg_silhouette:.17g},{row.within_ss:.17g},{row.cost:.17g},{ward_wss[row.k]:.17g}")
    (out_dir / "validation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    res = sel.result
    doc = {
        "schema": CLUSTERING_SCHEMA,
        "version": VERSION,
        "features_file": Path(features_path).name,
        "contributors": labels,
        "k": res.k,
        "medoids": res.medoids,
        "assignment": res.assignment,
        "avg_silhouette": res.avg_silhouette,
        "silhouettes": res.silhouettes,
        "within_ss": res.within_ss,
        "cost": res.cost,
        "scaler": {"features": list(features.FEATURE_NAMES), "means": z.means, "scales": z.scales},
        "validation": [
            {"k": r.k, "avg_silhouette": r.avg_silhouette, "within_ss": r.within_ss, "cost": r.cost,
             "ward_within_ss": ward_wss[r.k]}
            for r in sel.table
        ],
        "ward_assignment": cluster.cut_dendrogram(dend, res.k),
    }
    dump_json(doc, out_dir / "clustering.json")
    return doc


def read_clustering(path: Path, rows: Sequence[features.FeatureRow]) -> dict:
    doc = load_json(path, CLUSTERING_SCHEMA)
    for name in ("k", "assignment", "contributors"):
        if name not in doc:
            raise ingest.SchemaError(f"line 1: missing field {name!r}")
    if doc["contributors"] != [r.contributor for r in rows]:
        raise ingest.SchemaError("field 'contributors' does not match the feature table")
    if len(doc["assignment"]) != len(rows):
        raise ingest.SchemaError("field 'assignment' length does not match the feature table")
    return doc


# -- interpret --------------------------------------------------------------------

def run_interpret(features_path: Path, clustering_path: Path, out: Path, alpha: float = 0.05) -> dict:
    rows = read_features(features_path)
    clus = read_clustering(clustering_path, rows)
    x = features.feature_matrix(rows)
    assignment = np.asarray(clus["assignment"])
    z = features.standardize(x)

    doc: dict = {"schema": INTERPRETATION_SCHEMA, "version": VERSION, "k": int(clus["k"]), "alpha": alpha}
    if len(rows) > len(features.FEATURE_NAMES):
        model = interpret.pca_fit(z)
        doc["pca"] = model.to_dict()
        doc["pca_scores"] = interpret.pca_project(model, x, dims=3)

    labeling_error = None
    try:
        report = interpret.label_clusters(x, assignment, alpha)
    except interpret.LabelingTie as exc:
        labeling_error = str(exc)
        report = interpret.label_clusters(x, assignment, alpha, name_archetypes=False)
    doc["labeling_error"] = labeling_error

    articles = np.array([r.n_articles for r in rows], dtype=float)
    doc["clusters"] = []
    for p in report.clusters:
        a = articles[assignment == p.cluster]
        doc["clusters"].append({
            "cluster": p.cluster,
            "size": p.size,
            "label": p.label,
            "medians": p.medians,
            "boxplot": {k: list(v) for k, v in p.quartiles.items()},
            "above_median": p.above,
            "below_median": p.below,
            "illustrative": {"n_articles": list(np.percentile(a, [0, 25, 50, 75, 100]))},
        })
    doc["anova"] = {
        name: {"ss_between": r.ss_between, "ss_within": r.ss_within, "df_between": r.df_between,
               "df_within": r.df_within, "f": r.f, "p": r.p, "degenerate": r.degenerate}
        for name, r in report.anova.items()
    }
    doc["tukey"] = {
        name: [{"a": t.a, "b": t.b, "mean_diff": t.mean_diff, "std_err": t.std_err, "q": t.q,
                "p_adj": t.p_adj, "reject": t.reject} for t in pairs]
        for name, pairs in report.tukey.items()
    }
    dump_json(doc, out)
    return doc

