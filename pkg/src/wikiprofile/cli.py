"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 parse / schema /
data error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, pipeline, report
from .ingest import DumpParseError, IngestConfig

log = logging.getLogger("wikiprofile")

EXIT_USAGE, EXIT_PARSE, EXIT_IO = 1, 2, 3

SCHEMAS = {
    "ingest": """\
output (JSON lines, UTF-8):
  line 1   {"schema": "wikiprofile.histories", "version": 1}
  line 2+  one contributor per line:
           {"key", "kind": "registered"|"anonymous", "user_id", "name", "ip", "bot",
            "monthly_counts": [[month_index, edits], ...],   month_index = year*12 + month-1
            "first_edit", "last_edit": "YYYY-MM-DDTHH:MM:SSZ", "distinct_articles"}
bot list: UTF-8 text, one user name per line, '#' starts a comment.""",
    "features": """\
input:  histories JSON lines (see `ingest --help`)
output (CSV, UTF-8):
  line 1   # schema=wikiprofile.features version=1
  line 2   contributor,ratio,mean_gap,max_gap,num_cons,mean_month,sd,n_articles,total_edits
  line 3+  one retained contributor per row, floats with 17 significant digits
--correlation writes the 12x12 Pearson matrix of the extended features as JSON.""",
    "cluster": """\
input:  feature CSV (see `features --help`)
output directory:
  clustering.json  {"schema": "wikiprofile.clustering", "version": 1, "k", "medoids",
                    "assignment" (cluster ids 1..k, feature-table order), "avg_silhouette",
                    "within_ss", "silhouettes", "validation": [{k, avg_silhouette, within_ss, ...}], ...}
  validation.csv   k,avg_silhouette,within_ss,cost,ward_within_ss
  dendrogram.csv   step,left,right,height,size  (leaves 0..n-1, merge s creates node n+s-1,
                   heights in squared Euclidean units)
  dendrogram.nwk   Newick tree with branch lengths""",
    "interpret": """\
input:  feature CSV and clustering.json
output: {"schema": "wikiprofile.interpretation", "version": 1, "k", "pca", "pca_scores",
         "clusters": [{cluster, size, label, medians, boxplot, above_median, below_median,
                       illustrative}], "anova", "tukey", "labeling_error"}""",
    "report": """\
input:  feature CSV, clustering.json, interpretation JSON
output directory: report.json, report.md, and with --svg: validation curves,
PCA scatter plots and per-feature boxplots.""",
    "synth": """\
output: histories JSON lines (same format as `ingest`), plus optional planted labels
        {"schema": "wikiprofile.synthetic-labels", "version": 1, "seed", "labels": {name: archetype}}
--spec: archetype config JSON (defaults ship in wikiprofile/data/archetypes.json).""",
}

# config-file keys and how to convert them
CONFIG_KEYS = {
    "min_edits": int, "k_min": int, "k_max": int, "threads": int, "seed": int, "alpha": float,
    "namespaces": lambda v: [int(x) for x in v.replace(",", " ").split()],
    "bot_list": Path, "spec": Path, "svg": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path: Path) -> dict:
    """``key = value`` lines; ``#`` comments; keys as in CONFIG_KEYS."""
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: invalid value for {key!r}: {value!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wikiprofile", description="Cluster wiki contributors by edit timing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="key = value file; command-line flags win")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, help=help_, epilog=SCHEMAS[name],
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    p = add("ingest", "stream a pages-meta-history dump into contributor histories")
    p.add_argument("dump", type=Path, nargs="?", help="XML dump, plain, .gz or .bz2")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--namespace", dest="namespaces", type=int, action="append",
                   help="keep only this namespace (repeatable; default: all)")
    p.add_argument("--bot-list", type=Path)
    p.add_argument("--synthetic", dest="spec", type=Path, nargs="?", const=Path("-"), default=None,
                   help="generate a synthetic cohort instead of reading a dump (optional archetype config)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--compression", choices=["auto"], default="auto", help="detected from magic bytes")

    p = add("synth", "generate a labeled synthetic cohort")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--labels", type=Path, help="write planted archetype labels here")
    p.add_argument("--spec", type=Path, help="archetype config JSON")
    p.add_argument("--seed", type=int, default=1)

    p = add("features", "filter contributors and compute the six activity features")
    p.add_argument("histories", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--min-edits", type=int, default=100)
    p.add_argument("--correlation", type=Path, help="also write the 12-feature correlation matrix")
    p.add_argument("--threads", type=int, default=1)

    p = add("cluster", "Ward dendrogram, PAM for each k, silhouette selection")
    p.add_argument("features", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--threads", type=int, default=1)

    p = add("interpret", "PCA, ANOVA, Tukey and archetype labels for the chosen partition")
    p.add_argument("features", type=Path)
    p.add_argument("clustering", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--alpha", type=float, default=0.05)

    p = add("report", "assemble JSON + Markdown (+ SVG) report")
    p.add_argument("features", type=Path)
    p.add_argument("clustering", type=Path)
    p.add_argument("interpretation", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--svg", action="store_true", default=False)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    try:
        cfg = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"cannot read config {known.config}: {exc.strerror}") from None
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            dests = {a.dest for a in sub._actions}
            sub.set_defaults(**{k: v for k, v in cfg.items() if k in dests})


def _validate(args) -> None:
    if getattr(args, "min_edits", 1) < 1:
        raise UsageError("--min-edits must be >= 1")
    if hasattr(args, "k_min"):
        if not 2 <= args.k_min <= args.k_max <= 50:
            raise UsageError("k range must satisfy 2 <= k-min <= k-max <= 50")
    if getattr(args, "threads", 1) < 1:
        raise UsageError("--threads must be >= 1")


def _run(args) -> None:
    cmd = args.command
    if cmd == "ingest":
        if args.spec is not None:
            spec = None if str(args.spec) == "-" else args.spec
            cohort = pipeline.run_synth(args.output, args.seed, spec)
            print(f"synthetic contributors: {len(cohort.histories)}")
            return
        if args.dump is None:
            raise UsageError("ingest needs a dump path (or --synthetic)")
        config = IngestConfig.from_paths(args.namespaces, args.bot_list)
        s = pipeline.run_ingest(args.dump, args.output, config)
        print(f"events: {s.events}")
        print(f"contributors: {s.contributors}")
        skipped = s.stats.bad_timestamps + s.stats.missing_contributor
        if skipped:
            print(f"skipped revisions: {skipped} (bad timestamp {s.stats.bad_timestamps}, "
                  f"no contributor {s.stats.missing_contributor})")
        for msg in s.stats.errors[:20]:
            log.warning(msg)
    elif cmd == "synth":
        cohort = pipeline.run_synth(args.output, args.seed, args.spec, args.labels)
        print(f"synthetic contributors: {len(cohort.histories)}")
    elif cmd == "features":
        total, kept = pipeline.run_features(args.histories, args.output, args.min_edits, args.threads,
                                            args.correlation)
        print(f"contributors: {total}")
        print(f"retained: {kept}")
    elif cmd == "cluster":
        doc = pipeline.run_cluster(args.features, args.output, range(args.k_min, args.k_max + 1), args.threads)
        print(f"k: {doc['k']}")
        print(f"average silhouette: {doc['avg_silhouette']:.4f}")
    elif cmd == "interpret":
        doc = pipeline.run_interpret(args.features, args.clustering, args.output, args.alpha)
        for c in doc["clusters"]:
            print(f"cluster {c['cluster']}: size {c['size']}, label {c['label'] or '-'}")
        if doc["labeling_error"]:
            log.warning(doc["labeling_error"])
    elif cmd == "report":
        rep = report.write_report(args.features, args.clustering, args.interpretation, args.output, args.svg)
        print(f"report: {args.output / 'report.md'} (k = {rep['k']})")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s")
        _validate(args)
        _run(args)
    except UsageError as exc:
        print(f"wikiprofile: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DumpParseError, ValueError) as exc:  # schema, contract and data errors subclass ValueError
        print(f"wikiprofile: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"wikiprofile: error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
