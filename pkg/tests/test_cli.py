import json

import pytest

from txmm import litmus
from txmm.cli import _matches, check_file, main
from txmm.execution import deserialize, load
from txmm.models import get_model
from txmm.synth import isomorphic


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_litmus_with_model(capsys, corpus):
    code, out, _ = run(capsys, "check", str(corpus / "sample_txn.litmus"), "--model", "tsc")
    assert code == 0 and out.split("\t")[2].strip() == "Forbidden"


def test_check_exec_with_model(capsys, corpus):
    code, out, _ = run(capsys, "check", str(corpus / "isol_noninterference.exec"), "--model", "sc+strongisol")
    assert out.split("\t")[2] == "Inconsistent: StrongIsol"


def test_missing_file_exits_2(capsys):
    code, _, err = run(capsys, "check", "missing.litmus")
    assert code == 2 and "error" in err


def test_malformed_file_exits_2(capsys, tmp_path):
    p = tmp_path / "bad.exec"
    p.write_text("arch SC\nevent a W\n")
    code, _, err = run(capsys, "check", str(p))
    assert code == 2 and "line 2" in err


def test_mismatch_exits_1(capsys, tmp_path, corpus):
    p = tmp_path / "wrong.exec"
    p.write_text((corpus / "sample.exec").read_text().replace("sc Consistent", "sc Inconsistent"))
    code, out, _ = run(capsys, "check", str(p))
    assert code == 1 and "MISMATCH" in out


def test_whole_corpus_passes(capsys, corpus):
    code, out, _ = run(capsys, "check", str(corpus))
    assert code == 0
    assert out.count("\tok") == len(out.strip().splitlines()) >= 60


def test_jobs_do_not_change_output(capsys, corpus):
    _, a, _ = run(capsys, "check", str(corpus), "--format", "jsonl")
    _, b, _ = run(capsys, "check", str(corpus), "--format", "jsonl", "--jobs", "2")
    assert a == b
    recs = [json.loads(line) for line in a.splitlines()]
    assert all(r["ok"] for r in recs)


def test_cli_verdicts_equal_library(corpus):
    for p in sorted(corpus.glob("*")):
        if p.suffix not in (".exec", ".litmus"):
            continue
        for rec in check_file(str(p)):
            m = get_model(rec.model)
            if p.suffix == ".exec":
                want = str(m.check(load(p)))
            else:
                want = litmus.evaluate(litmus.load(p), m).status.capitalize()
            assert rec.verdict == want


def test_matching_rules():
    assert _matches("Inconsistent: Order, TxnOrder", "Inconsistent: TxnOrder, Order")
    assert _matches("Inconsistent: Order", "inconsistent")
    assert not _matches("Inconsistent: Order", "Inconsistent: TxnOrder")
    assert _matches("Consistent (racy)", "Consistent")


def test_candidates_listing(capsys, corpus):
    code, out, _ = run(capsys, "candidates", str(corpus / "sample_txn.litmus"), "--model", "tsc")
    lines = out.splitlines()
    assert lines[0].startswith("# 7 raw candidates, 7 well-formed")
    assert len(lines) == 8


def test_synth(capsys, tmp_path):
    code, out, _ = run(capsys, "synth", "--model", "x86-tm", "--baseline", "x86", "--max-events", "3",
                       "--out", str(tmp_path))
    assert code == 0
    assert "X86\t3\t4\t" in out
    suite = tmp_path / "x86-tm-3"
    assert len(list((suite / "forbid").glob("*.exec"))) == 4
    assert len(list((suite / "forbid").glob("*.litmus"))) == 4
    assert (suite / "summary.tsv").read_text().splitlines()[0] == "arch\tevents\tforbid\tallow"
    assert (suite / "counts.png").stat().st_size > 0 and (suite / "txn_histogram.png").stat().st_size > 0


def test_meta_mono_bundle(capsys, tmp_path, corpus):
    code, out, _ = run(capsys, "meta", "--check", "mono", "--arch", "power", "--bound", "2",
                       "--variant", "coalescing", "--out", str(tmp_path))
    assert code == 0 and "counterexample" in out
    x = load(tmp_path / "x.exec")
    assert isomorphic(x, load(corpus / "mono_rmw_split_power.exec"))
    assert (tmp_path / "pi.tsv").read_text().startswith("x\ty")


def test_meta_none(capsys):
    code, out, _ = run(capsys, "meta", "--check", "compile", "--arch", "x86", "--bound", "2")
    assert code == 0 and "none up to bound 2" in out


def test_meta_unsupported(capsys):
    code, _, _ = run(capsys, "meta", "--check", "elision", "--arch", "cpp", "--bound", "4")
    assert code == 2


def test_convert_roundtrip(capsys, corpus):
    code, out, _ = run(capsys, "convert", str(corpus / "sample.exec"))
    t = litmus.parse(out)
    assert litmus.post_text(t) == "r0=2 /\\ x=2"
    # the post condition is reachable under SC only
    code, out, _ = run(capsys, "convert", str(corpus / "sample_txn.litmus"), "--model", "tsc")
    assert out == ""
    code, out, _ = run(capsys, "convert", str(corpus / "sample_txn.litmus"), "--model", "sc")
    xs = [deserialize("arch" + chunk) for chunk in out.split("arch")[1:]]
    assert len(xs) == 1 and isomorphic(xs[0], load(corpus / "sample_txn.exec").replace(arch="X86"))


def test_convert_asm(capsys, corpus):
    code, out, _ = run(capsys, "convert", str(corpus / "power_mp.litmus"), "--to", "asm")
    assert code == 0 and "P0" in out


def test_graph(capsys, corpus):
    code, out, _ = run(capsys, "graph", str(corpus / "sample_txn.exec"))
    assert code == 0 and out.startswith("digraph")
    assert "style=solid" in out


@pytest.mark.parametrize("argv", [["check", "--help"], ["--help"]])
def test_help(argv, capsys):
    with pytest.raises(SystemExit) as ei:
        main(argv)
    assert ei.value.code == 0
