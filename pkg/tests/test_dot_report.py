import re

from txmm import dot, report
from txmm.execution import load
from txmm.metatheory import check_monotonicity
from txmm.synth import SuiteRow


def test_dot_boxes_transactions(corpus):
    text = dot.to_dot(load(corpus / "sample_txn.exec"), title="t")
    assert text.startswith("digraph execution {") and text.rstrip().endswith("}")
    assert len(re.findall(r"cluster_txn\d", text)) == 1
    assert "style=solid" in text
    assert "label=rf" in text and "label=co" in text


def test_dot_dashes_critical_regions(corpus):
    text = dot.to_dot(load(corpus / "elision_rmw_abstract.exec"))
    assert "cluster_cr" in text and "style=dashed" in text


def test_dot_draws_fr(corpus):
    text = dot.to_dot(load(corpus / "isol_noninterference.exec"))
    assert "label=fr" in text


def test_dot_is_deterministic(corpus):
    x = load(corpus / "power_iriw_txns.exec")
    assert dot.to_dot(x) == dot.to_dot(load(corpus / "power_iriw_txns.exec"))


def test_witness_bundle(tmp_path):
    w = check_monotonicity("power-tm", 2).witness
    paths = report.write_witness(tmp_path, w)
    assert all(p.exists() for p in paths.values())
    assert "->" in paths["dot"].read_text() and "style=dotted" in paths["dot"].read_text()
    assert "monotonicity" in paths["verdicts"].read_text()


def test_summary_roundtrip(tmp_path):
    rows = [SuiteRow("X86", 2, 0, 9), SuiteRow("X86", 3, 4, 55)]
    report.write_summary(tmp_path / "s.tsv", rows)
    assert report.read_summary(tmp_path / "s.tsv") == rows
    report.plot_counts(rows, tmp_path / "c.png")
    assert (tmp_path / "c.png").read_bytes()[:4] == b"\x89PNG"
