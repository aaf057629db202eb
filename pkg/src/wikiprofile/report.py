"""Final report assembly: JSON, Markdown and optional SVG charts."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .features import FEATURE_NAMES
from .pipeline import INTERPRETATION_SCHEMA, VERSION, dump_json, load_json, read_clustering, read_features

REPORT_SCHEMA = "wikiprofile.report"
PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


def build_report(features_path: Path, clustering_path: Path, interpretation_path: Path) -> dict:
    rows = read_features(features_path)
    clus = read_clustering(clustering_path, rows)
    interp = load_json(interpretation_path, INTERPRETATION_SCHEMA)
    if interp.get("k") != clus["k"]:
        raise ValueError("interpretation and clustering disagree on k")
    return {
        "schema": REPORT_SCHEMA,
        "version": VERSION,
        "contributors": len(rows),
        "k": clus["k"],
        "avg_silhouette": clus.get("avg_silhouette"),
        "within_ss": clus.get("within_ss"),
        "validation": clus.get("validation", []),
        "clusters": [
            {key: c[key] for key in ("cluster", "size", "label", "medians", "boxplot",
                                     "above_median", "below_median", "illustrative")}
            for c in interp["clusters"]
        ],
        "labeling_error": interp.get("labeling_error"),
        "pca": interp.get("pca"),
        "anova": interp.get("anova", {}),
        "tukey": interp.get("tukey", {}),
        "assignment": dict(zip(clus["contributors"], clus["assignment"])),
    }


def _g(v, fmt=".4g") -> str:
    return "n/a" if v is None else format(v, fmt)


def render_markdown(rep: dict) -> str:
    out = ["# Contributor profiles", ""]
    out.append(f"{rep['contributors']} contributors, k = {rep['k']} "
               f"(average silhouette {_g(rep['avg_silhouette'])}, within-SS {_g(rep['within_ss'])}).")
    out.append("")
    if rep.get("labeling_error"):
        out += [f"**Archetype labels withheld:** {rep['labeling_error']}", ""]

    out += ["## Validation", "", "| k | avg silhouette | within SS (PAM) | within SS (Ward cut) |",
            "|---|---|---|---|"]
    for r in rep["validation"]:
        mark = " (chosen)" if r["k"] == rep["k"] else ""
        out.append(f"| {r['k']}{mark} | {_g(r['avg_silhouette'])} | {_g(r['within_ss'])} | "
                   f"{_g(r.get('ward_within_ss'))} |")
    out.append("")

    out += ["## Clusters", "", "| cluster | label | size | " + " | ".join(f"median {n}" for n in FEATURE_NAMES)
            + " | median n_articles |", "|---" * (len(FEATURE_NAMES) + 4) + "|"]
    for c in rep["clusters"]:
        meds = " | ".join(_g(c["medians"][n]) for n in FEATURE_NAMES)
        art = c["illustrative"]["n_articles"][2]
        out.append(f"| {c['cluster']} | {c['label'] or '-'} | {c['size']} | {meds} | {_g(art)} |")
    out.append("")
    for c in rep["clusters"]:
        if c["above_median"] or c["below_median"]:
            out.append(f"- cluster {c['cluster']}: above overall median on "
                       f"{', '.join(c['above_median']) or 'nothing'}; below on "
                       f"{', '.join(c['below_median']) or 'nothing'}")
    out.append("")

    if rep.get("pca"):
        pca = rep["pca"]
        out += ["## Principal components", "",
                "| component | eigenvalue | explained | cumulative | " + " | ".join(pca["features"]) + " |",
                "|---" * (len(pca["features"]) + 4) + "|"]
        cum = 0.0
        load = np.array(pca["loadings"])
        for j, (ev, ratio) in enumerate(zip(pca["eigenvalues"], pca["explained_ratio"])):
            cum += ratio
            cells = " | ".join(f"{v:+.3f}" for v in load[:, j])
            out.append(f"| PC{j + 1} | {ev:.4f} | {ratio:.1%} | {cum:.1%} | {cells} |")
        out.append("")

    if rep["anova"]:
        out += ["## One-way ANOVA per feature", "", "| feature | F | df | p |", "|---|---|---|---|"]
        for name, a in rep["anova"].items():
            flag = " (degenerate)" if a["degenerate"] else ""
            out.append(f"| {name} | {_g(a['f'])} | {a['df_between']}, {a['df_within']} | {_g(a['p'], '.3g')}{flag} |")
        out += ["", "## Tukey-Kramer pairwise comparisons", "",
                "| feature | pair | mean diff | q | adj. p |", "|---|---|---|---|---|"]
        for name, pairs in rep["tukey"].items():
            for t in pairs:
                star = " *" if t["reject"] else ""
                out.append(f"| {name} | {t['a']}-{t['b']} | {_g(t['mean_diff'])} | {_g(t['q'])} | "
                           f"{_g(t['p_adj'], '.3g')}{star} |")
        out.append("")
    return "\n".join(out)


# -- SVG ----------------------------------------------------------------------

class _Canvas:
    def __init__(self, width: int, height: int, title: str):
        self.w, self.h = width, height
        self.items = [f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>']

    def add(self, item: str) -> None:
        self.items.append(item)

    def render(self) -> str:
        body = "\n".join(self.items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}" font-family="sans-serif">\n'
                f'<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n')


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _axes(cv: _Canvas, box, xlim, ylim, xlabel, ylabel) -> None:
    x0, y0, x1, y1 = box
    cv.add(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" fill="none" stroke="#333"/>')
    cv.add(f'<text x="{(x0 + x1) / 2:.1f}" y="{y1 + 30}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>')
    cv.add(f'<text x="{x0 - 38}" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" font-size="11" '
           f'transform="rotate(-90 {x0 - 38} {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>')
    for v, pos in ((xlim[0], x0), (xlim[1], x1)):
        cv.add(f'<text x="{pos}" y="{y1 + 14}" text-anchor="middle" font-size="9">{v:.3g}</text>')
    for v, pos in ((ylim[0], y1), (ylim[1], y0)):
        cv.add(f'<text x="{x0 - 4}" y="{pos + 3}" text-anchor="end" font-size="9">{v:.3g}</text>')


def scatter_svg(xs, ys, groups, title, xlabel, ylabel) -> str:
    cv = _Canvas(420, 380, title)
    box = (60, 30, 400, 330)
    xlim, ylim = (min(xs), max(xs)), (min(ys), max(ys))
    fx, fy = _scale(*xlim, box[0], box[2]), _scale(*ylim, box[3], box[1])
    _axes(cv, box, xlim, ylim, xlabel, ylabel)
    for x, y, g in zip(xs, ys, groups):
        cv.add(f'<circle cx="{fx(x):.2f}" cy="{fy(y):.2f}" r="2.5" fill="{PALETTE[(g - 1) % len(PALETTE)]}"/>')
    return cv.render()


def curve_svg(ks, values, title, ylabel, chosen) -> str:
    cv = _Canvas(420, 320, title)
    box = (60, 30, 400, 270)
    xlim, ylim = (min(ks), max(ks)), (min(values), max(values))
    fx, fy = _scale(*xlim, box[0], box[2]), _scale(*ylim, box[3], box[1])
    _axes(cv, box, xlim, ylim, "number of clusters k", ylabel)
    pts = " ".join(f"{fx(k):.2f},{fy(v):.2f}" for k, v in zip(ks, values))
    cv.add(f'<polyline points="{pts}" fill="none" stroke="#1f77b4"/>')
    for k, v in zip(ks, values):
        colour = "#d62728" if k == chosen else "#1f77b4"
        cv.add(f'<circle cx="{fx(k):.2f}" cy="{fy(v):.2f}" r="3" fill="{colour}"/>')
    return cv.render()


def boxplot_svg(clusters: list[dict], feature: str) -> str:
    cv = _Canvas(420, 320, f"{feature} by cluster")
    box = (60, 30, 400, 270)
    stats = [c["boxplot"][feature] for c in clusters]
    ylim = (min(s[0] for s in stats), max(s[4] for s in stats))
    fy = _scale(*ylim, box[3], box[1])
    _axes(cv, box, (1, len(clusters)), ylim, "cluster", feature)
    step = (box[2] - box[0]) / len(clusters)
    for i, (c, s) in enumerate(zip(clusters, stats)):
        cx = box[0] + step * (i + 0.5)
        colour = PALETTE[(c["cluster"] - 1) % len(PALETTE)]
        half = step * 0.25
        cv.add(f'<line x1="{cx:.2f}" x2="{cx:.2f}" y1="{fy(s[0]):.2f}" y2="{fy(s[4]):.2f}" stroke="#333"/>')
        cv.add(f'<rect x="{cx - half:.2f}" y="{fy(s[3]):.2f}" width="{2 * half:.2f}" '
               f'height="{max(fy(s[1]) - fy(s[3]), 0.5):.2f}" fill="{colour}" stroke="#333"/>')
        cv.add(f'<line x1="{cx - half:.2f}" x2="{cx + half:.2f}" y1="{fy(s[2]):.2f}" y2="{fy(s[2]):.2f}" stroke="#000" stroke-width="2"/>')
        name = c["label"] or str(c["cluster"])
        cv.add(f'<text x="{cx:.2f}" y="{box[3] + 14}" text-anchor="middle" font-size="9">{escape(name)}</text>')
    return cv.render()


def write_report(features_path: Path, clustering_path: Path, interpretation_path: Path,
                 out_dir: Path, svg: bool = False) -> dict:
    rep = build_report(features_path, clustering_path, interpretation_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_json(rep, out_dir / "report.json")
    (out_dir / "report.md").write_text(render_markdown(rep), encoding="utf-8")
    if svg:
        _write_svgs(rep, interpretation_path, out_dir)
    return rep


def _write_svgs(rep: dict, interpretation_path: Path, out_dir: Path) -> None:
    interp = load_json(interpretation_path, INTERPRETATION_SCHEMA)
    groups = list(rep["assignment"].values())
    ks = [r["k"] for r in rep["validation"]]
    if ks:
        (out_dir / "validation_silhouette.svg").write_text(
            curve_svg(ks, [r["avg_silhouette"] for r in rep["validation"]], "Average silhouette width",
                      "avg silhouette", rep["k"]), encoding="utf-8")
        (out_dir / "validation_within_ss.svg").write_text(
            curve_svg(ks, [r["within_ss"] for r in rep["validation"]], "Total within sum of squares",
                      "within SS", rep["k"]), encoding="utf-8")
    scores = interp.get("pca_scores")
    if scores:
        s = np.array(scores)
        for a, b in ((0, 1), (0, 2), (1, 2)):
            (out_dir / f"pca_pc{a + 1}_pc{b + 1}.svg").write_text(
                scatter_svg(s[:, a], s[:, b], groups, f"PC{a + 1} vs PC{b + 1}", f"PC{a + 1}", f"PC{b + 1}"),
                encoding="utf-8")
    for name in FEATURE_NAMES:
        (out_dir / f"boxplot_{name}.svg").write_text(boxplot_svg(rep["clusters"], name), encoding="utf-8")

