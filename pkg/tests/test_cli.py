import bz2
import json

import pytest

from conftest import dump, monthly_revisions, page, revision
from wikiprofile.cli import build_parser, main


def fixture_dump() -> bytes:
    return dump([
        page(1, monthly_revisions("Alice", 1, {(2011, 1): 60, (2011, 3): 50})),
        page(2, monthly_revisions("Bob", 2, {(2012, 5): 30, (2012, 6): 40, (2013, 1): 45})
             + [revision("2012-05-02T00:00:00Z", ip="10.1.1.1")]),
    ])


def run(argv, capsys):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:  # argparse exits directly on usage errors
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


def test_ingest_fixture(tmp_path, capsys):
    src = tmp_path / "dump.xml"
    src.write_bytes(fixture_dump())
    code, out, _ = run(["ingest", src, "-o", tmp_path / "h.jsonl"], capsys)
    assert code == 0
    assert "events: 226" in out and "contributors: 3" in out
    lines = (tmp_path / "h.jsonl").read_text(encoding="utf-8").splitlines()
    assert json.loads(lines[0]) == {"schema": "wikiprofile.histories", "version": 1}
    assert len(lines) == 4


def test_ingest_bzip2_identical(tmp_path, capsys):
    plain, packed = tmp_path / "d.xml", tmp_path / "d.xml.bz2"
    plain.write_bytes(fixture_dump())
    packed.write_bytes(bz2.compress(fixture_dump()))
    assert run(["ingest", plain, "-o", tmp_path / "a.jsonl"], capsys)[0] == 0
    assert run(["ingest", packed, "-o", tmp_path / "b.jsonl"], capsys)[0] == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert run(["ingest", tmp_path / "missing.xml", "-o", tmp_path / "h.jsonl"], capsys)[0] == 3
    bad = tmp_path / "bad.xml"
    bad.write_bytes(b"<mediawiki><page></mediawiki>")
    code, _, err = run(["ingest", bad, "-o", tmp_path / "h.jsonl"], capsys)
    assert code == 2 and "offset" in err
    assert run(["frobnicate"], capsys)[0] == 1
    assert run(["features"], capsys)[0] == 1
    assert run(["features", bad, "-o", tmp_path / "f.csv", "--min-edits", "0"], capsys)[0] == 1
    assert run(["cluster", bad, "-o", tmp_path, "--k-max", "60"], capsys)[0] == 1


def test_schema_error_names_line_and_field(tmp_path, capsys):
    h = tmp_path / "h.jsonl"
    h.write_text('{"schema": "wikiprofile.histories", "version": 1}\n{"key": "id:1"}\n', encoding="utf-8")
    code, _, err = run(["features", h, "-o", tmp_path / "f.csv"], capsys)
    assert code == 2 and "line 2" in err and "'" in err


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nseed = 4\nmin_edits = 100\nk_max = 5\n", encoding="utf-8")
    p = build_parser()
    from wikiprofile.cli import _apply_config

    _apply_config(p, ["--config", str(cfg), "synth", "-o", "x"])
    assert p.parse_args(["--config", str(cfg), "synth", "-o", "x"]).seed == 4
    assert p.parse_args(["--config", str(cfg), "synth", "-o", "x", "--seed", "9"]).seed == 9
    cfg.write_text("colour = blue\n", encoding="utf-8")
    assert run(["--config", cfg, "synth", "-o", tmp_path / "h.jsonl"], capsys)[0] == 1


def test_help_documents_schemas(capsys):
    for cmd, needle in [("ingest", "monthly_counts"), ("features", "contributor,ratio"),
                        ("cluster", "step,left,right,height,size"), ("interpret", "anova"), ("synth", "labels")]:
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        assert needle in capsys.readouterr().out


def test_full_chain_on_synthetic_cohort(tmp_path, capsys):
    h, f, c, i, r = (tmp_path / n for n in ("h.jsonl", "f.csv", "c", "i.json", "r"))
    assert run(["ingest", "--synthetic", "--seed", 2, "-o", h], capsys)[0] == 0
    assert run(["features", h, "-o", f, "--correlation", tmp_path / "corr.json"], capsys)[0] == 0
    code, out, _ = run(["cluster", f, "-o", c], capsys)
    assert code == 0 and "k: 4" in out
    assert len((c / "validation.csv").read_text().splitlines()) == 1 + 9
    assert run(["interpret", f, c / "clustering.json", "-o", i], capsys)[0] == 0
    assert run(["report", f, c / "clustering.json", i, "-o", r, "--svg"], capsys)[0] == 0
    rep = json.loads((r / "report.json").read_text())
    assert rep["k"] == 4
    assert sorted(cl["label"] for cl in rep["clusters"]) == ["casual", "on-a-mission", "regular", "top"]
    assert (r / "report.md").read_text().startswith("# Contributor profiles")
    assert (r / "pca_pc1_pc2.svg").read_text().startswith("<svg")
    corr = json.loads((tmp_path / "corr.json").read_text())
    assert len(corr["matrix"]) == 12


def test_report_rejects_mismatched_stage_files(tmp_path, capsys):
    h, f, c = tmp_path / "h.jsonl", tmp_path / "f.csv", tmp_path / "c"
    run(["synth", "-o", h, "--seed", 1], capsys)
    run(["features", h, "-o", f], capsys)
    run(["cluster", f, "-o", c, "--k-max", "4"], capsys)
    doc = json.loads((c / "clustering.json").read_text())
    doc["assignment"] = doc["assignment"][:-1]
    (c / "clustering.json").write_text(json.dumps(doc))
    code, _, err = run(["interpret", f, c / "clustering.json", "-o", tmp_path / "i.json"], capsys)
    assert code == 2 and "assignment" in err
