import filecmp
import json
import math

import pytest
import yaml

from biblioscope import cli
from biblioscope.fixtures import THESAURUS, shipped_config, write_fixture
from biblioscope.records import BibRecord, MeshHeading, write_records
from biblioscope.topicmap import read_map

FIXTURE_FILES = ["config.yaml", "reference.tsv", "source_a.jsonl", "source_b.jsonl",
                 "thesaurus.tsv"]


def a_rec(i, year=2010, mesh="HIV Infections"):
    return BibRecord(title=f"paper {i}", year=year, pmid=str(i), mesh_terms=(MeshHeading(mesh, False),))


def b_rec(i, pmid=None, year=2010, countries=("FR",), kws=(), cats=("INFECTIOUS DISEASES",),
          cites=()):
    return BibRecord(title=f"paper {i}", year=year, wos_id=f"W{i}", pmid=pmid,
                     countries=frozenset(countries), categories=frozenset(cats),
                     author_keywords=tuple(kws), citations=tuple(cites))


def project(tmp_path, a, b, reference=None, **overrides):
    write_records(a, tmp_path / "a.jsonl")
    write_records(b, tmp_path / "b.jsonl")
    (tmp_path / "th.tsv").write_text("".join(f"{n}\t{t}\n" for n, t in THESAURUS))
    if reference is None:
        years = sorted({r.year for r in b}) or [2010]
        countries = sorted({c for r in b for c in r.countries})
        lines = ["country\tyear\tpub_count"]
        lines += [f"{c}\t{y}\t1000" for c in countries for y in years]
        lines += [f"WORLD\t{y}\t{1000 * max(len(countries), 1)}" for y in years]
        reference = "\n".join(lines) + "\n"
    (tmp_path / "ref.tsv").write_text(reference)
    cfg = {"inputs": {"source_a": "a.jsonl", "source_b": "b.jsonl", "thesaurus": "th.tsv",
                      "reference": "ref.tsv"},
           "query": '"Infections"[MH] AND 2000/01/01:2020/12/01[dp]',
           "map": {"min_occ": 1}, "indicators": {"horizon": 2020, "periods": ["2010"]}}
    for k, v in overrides.items():
        if isinstance(v, dict):
            cfg.setdefault(k, {}).update(v)
        else:
            cfg[k] = v
    (tmp_path / "cfg.yaml").write_text(yaml.safe_dump(cfg))
    return str(tmp_path / "cfg.yaml")


def run(*argv):
    return cli.main(list(argv) + ["--quiet"])


def coverage(out):
    return dict(line.split("\t") for line in
                (out / "build" / "coverage.tsv").read_text().splitlines()[1:])


def test_shipped_fixture_is_regenerable(tmp_path):
    write_fixture(tmp_path)
    shipped = shipped_config().parent
    _, mismatch, errors = filecmp.cmpfiles(shipped, tmp_path, FIXTURE_FILES, shallow=False)
    assert mismatch == [] and errors == []


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for cmd in ("query", "build", "map", "indicators", "covid", "report"):
        assert cmd in text
    for flag in ("--config", "--seed", "--out", "--quiet"):
        assert flag in text


def test_query_writes_ids_and_explain(tmp_path, capsys):
    cfg = project(tmp_path, [a_rec(1), a_rec(2, mesh="Hypertension"), a_rec(3, year=1999)], [])
    assert cli.main(["query", "--config", cfg, "--out", str(tmp_path / "o"), "--explain", "1"]) == 0
    printed = capsys.readouterr().out
    assert '"Infections"[MH] -> True' in printed and "1 hits" in printed
    assert (tmp_path / "o" / "query" / "selected_ids.txt").read_text() == "1\n"
    manifest = json.loads((tmp_path / "o" / "query" / "manifest.json").read_text())
    assert set(manifest) >= {"config_sha256", "inputs", "versions", "outputs"}
    assert manifest["hits"] == 1


def test_query_usage_and_syntax_errors(tmp_path, capsys):
    cfg = project(tmp_path, [a_rec(1)], [])
    out = str(tmp_path / "o")
    assert run("query", "--config", cfg, "--out", out, "--query", "   ") == 2
    assert run("query", "--config", cfg, "--out", out, "--query", '"Infections"[MH] AND') == 1
    assert "position" in capsys.readouterr().err
    assert run("query", "--config", cfg, "--out", out, "--query", '"Nope"[MH]') == 1


def test_config_errors(tmp_path):
    cfg = project(tmp_path, [a_rec(1)], [], bogus=1)
    assert run("query", "--config", cfg) == 2
    cfg = project(tmp_path, [a_rec(1)], [], map={"min_occ": 0})
    assert run("query", "--config", cfg) == 2
    assert run("query", "--config", str(tmp_path / "missing.yaml")) == 2
    (tmp_path / "cfg2.yaml").write_text(yaml.safe_dump({"inputs": {"source_a": "nope.jsonl"}}))
    assert run("query", "--config", str(tmp_path / "cfg2.yaml")) == 2


def test_build_all_matched(tmp_path):
    a = [a_rec(i) for i in range(5)]
    b = [b_rec(i, pmid=str(i)) for i in range(5)]
    cfg = project(tmp_path, a, b)
    assert run("build", "--config", cfg, "--out", str(tmp_path / "o")) == 0
    rows = coverage(tmp_path / "o")
    assert rows["matched_AB"] == "5" and rows["A_only"] == "0" and rows["B_only"] == "0"
    assert rows["A_absent_share"] == "0.0" and rows["overlap"] == "1.0"


def test_build_disjoint_sources(tmp_path):
    a = [a_rec(i) for i in range(4)]
    b = [b_rec(100 + i) for i in range(3)]
    cfg = project(tmp_path, a, b)
    assert run("build", "--config", cfg, "--out", str(tmp_path / "o")) == 0
    rows = coverage(tmp_path / "o")
    assert rows["matched_AB"] == "0" and rows["A_only"] == "4" and rows["B_only"] == "3"
    assert rows["A_absent_share"] == "1.0" and rows["B_category_only_share"] == "1.0"
    assert rows["after_filters"] == "3"


def test_later_commands_need_build(tmp_path):
    cfg = project(tmp_path, [a_rec(1)], [])
    for cmd in ("map", "indicators", "covid", "report"):
        assert run(cmd, "--config", cfg, "--out", str(tmp_path / "fresh")) == 2


def test_map_empty_network_is_an_error(tmp_path):
    b = [b_rec(i, kws=["malaria"]) for i in range(3)]
    cfg = project(tmp_path, [], b, map={"min_occ": 50})
    out = tmp_path / "o"
    assert run("build", "--config", cfg, "--out", str(out)) == 0
    assert run("map", "--config", cfg, "--out", str(out)) == 1
    assert not (out / "map" / "nodes.tsv").exists()


def test_map_two_cliques_and_one_country(tmp_path):
    left, right = ["a1", "a2", "a3", "a4"], ["b1", "b2", "b3", "b4"]
    b = []
    for i in range(20):
        b.append(b_rec(i, kws=left if i % 2 else right))
    b.append(b_rec(99, kws=["a1", "b1"]))
    cfg = project(tmp_path, [], b, map={"countries": ["FR"]})
    out = tmp_path / "o"
    assert run("build", "--config", cfg, "--out", str(out)) == 0
    assert run("map", "--config", cfg, "--out", str(out)) == 0
    net = read_map(out / "map")
    assert net.cluster["a1"] == net.cluster["a4"] != net.cluster["b1"] == net.cluster["b4"]
    assert len(set(net.cluster.values())) == 2
    header, *rows = (out / "map" / "nodes.tsv").read_text().splitlines()
    col = header.split("\t").index("activity_FR")
    assert all(math.isclose(float(r.split("\t")[col]), 1.0, rel_tol=1e-12) for r in rows)
    assert (out / "map" / "country_FR" / "nodes.tsv").exists()


def test_indicators_world_only(tmp_path):
    b = [b_rec(i, countries=("FR",) if i % 2 else ("US",), cites=[2010] * (i % 4))
         for i in range(10)]
    cfg = project(tmp_path, [], b, indicators={"countries": ["WORLD", "FR"]})
    out = tmp_path / "o"
    assert run("build", "--config", cfg, "--out", str(out)) == 0
    assert run("indicators", "--config", cfg, "--out", str(out)) == 0
    lines = (out / "indicators" / "indicators.tsv").read_text().splitlines()
    assert lines[1] == "WORLD\t2010\tinfectious_diseases\t10\t1.0\t1.0"
    manifest = json.loads((out / "indicators" / "manifest.json").read_text())
    assert manifest["indicators"]["window"] == 2


def test_indicators_neutral_share(tmp_path):
    b = [b_rec(i, countries=("FR",) if i < 3 else ("US",)) for i in range(9)]
    ref = "country\tyear\tpub_count\nFR\t2010\t100\nUS\t2010\t200\nWORLD\t2010\t300\n"
    cfg = project(tmp_path, [], b, reference=ref, indicators={"countries": ["FR", "US"]})
    out = tmp_path / "o"
    assert run("build", "--config", cfg, "--out", str(out)) == 0
    assert run("indicators", "--config", cfg, "--out", str(out)) == 0
    rows = [r.split("\t") for r in (out / "indicators" / "indicators.tsv").read_text().splitlines()]
    assert rows[1][4] == "1.0" and rows[2][4] == "1.0"


def test_indicators_refuse_incomplete_window(tmp_path, capsys):
    b = [b_rec(i, year=2020) for i in range(3)]
    cfg = project(tmp_path, [], b, indicators={"periods": ["2020"], "horizon": 2020})
    out = tmp_path / "o"
    assert run("build", "--config", cfg, "--out", str(out)) == 0
    assert run("indicators", "--config", cfg, "--out", str(out)) == 0
    assert "\tNA\n" in (out / "indicators" / "indicators.tsv").read_text()
    assert run("indicators", "--strict", "--config", cfg, "--out", str(out)) == 1
    assert "2020" in capsys.readouterr().err


def test_covid_and_report_on_shipped_fixture(tmp_path):
    cfg = str(shipped_config())
    out = tmp_path / "o"
    for cmd in ("build", "covid", "report"):
        assert run(cmd, "--config", cfg, "--out", str(out)) == 0
    terms = (out / "covid" / "terms.tsv").read_text().splitlines()
    assert terms[0] == "term\tpub_count" and len(terms) > 2
    assert (out / "report" / "growth.tsv").read_text().startswith("country\tperiod")
    top = (out / "report" / "top_producers.tsv").read_text().splitlines()
    assert top[1].startswith("1\tUS\t")


def test_seed_flag_overrides_config(tmp_path):
    cfg = str(shipped_config())
    out = tmp_path / "o"
    assert run("build", "--config", cfg, "--out", str(out)) == 0
    assert run("map", "--config", cfg, "--out", str(out), "--seed", "3") == 0
    manifest = json.loads((out / "map" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3
