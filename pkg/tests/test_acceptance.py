"""Acceptance suite: one PASS/FAIL line per criterion.

    python3 -m pytest tests/test_acceptance.py -s
    python3 tests/test_acceptance.py

Criteria that are not met at desk scale fail here rather than being relaxed;
the lines say what was checked and what was not.  Expect about twelve
minutes on one core.
"""

from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path


sys.path.insert(0, str(Path(__file__).parent))

import theorems as T  # noqa: E402
from txmm.cli import check_file  # noqa: E402
from txmm.execution import load  # noqa: E402
from txmm.metatheory import check_compilation, check_lock_elision, check_monotonicity  # noqa: E402
from txmm.models import get_model  # noqa: E402
from txmm.synth import (  # noqa: E402
    Signature, canonical_key, isomorphic, max_consistent, min_inconsistent,
)

CORPUS = Path(__file__).resolve().parents[1] / "src" / "txmm" / "corpus"
ACCEPTANCE_LINES: list[str] = []


def report(n: int, ok: bool, title: str, detail: str = "") -> None:
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}"
    if detail:
        line += f" | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def sketch(x) -> str:
    """One-line rendering: threads separated by ``||``, transactions in braces,
    reads suffixed with the value they return."""
    stxn, vals = x.rels["stxn"], x.values()
    parts = []
    for th in x.threads():
        out, open_ = [], False
        for e in th:
            in_txn = bool(stxn[e])
            if in_txn and (not open_ or not (stxn[e] >> prev) & 1):
                if open_:
                    out.append("}")
                out.append("{")
                open_ = True
            elif not in_txn and open_:
                out.append("}")
                open_ = False
            out.append(x.events[e].label() + (f"={vals[e]}" if x.events[e].kind == "R" else ""))
            prev = e
        if open_:
            out.append("}")
        parts.append(" ".join(out).replace("{ ", "{").replace(" }", "}"))
    return " || ".join(parts)


# ---------------------------------------------------------------------------
# 1. golden executions

GOLDEN = [
    # (file, model, consistent)
    *[(f"isol_{s}.exec", m, ok) for s in ("containment", "noninterference", "overwrite", "rmw")
      for m, ok in (("sc+strongisol", False), ("sc+weakisol", True))],
    ("sample_txn.exec", "tsc", False),
    ("sample_txn.exec", "sc", True),
    ("power_iriw_txns.exec", "power-tm", False),
    ("power_wrc_txn_barrier.exec", "power-tm", False),
    ("power_wrc_txn_mca.exec", "power-tm", False),
    ("power_rwc_txn_read.exec", "power-tm", True),
    ("power_rwc_txn_write.exec", "power-tm", True),
    ("power_iriw_one_txn.exec", "power-tm", True),
    ("cpp_txn_order.exec", "cpp-tm", False),
]


def test_criterion_1_golden_verdicts():
    t0 = time.perf_counter()
    bad = [(f, m) for f, m, want in GOLDEN if get_model(m).is_consistent(load(CORPUS / f)) != want]
    dt = time.perf_counter() - t0
    ok = not bad and dt < 1.0
    report(1, ok, "golden verdicts", f"{len(GOLDEN) - len(bad)}/{len(GOLDEN)} match in {dt:.2f}s"
           + (f"; mismatches {bad}" if bad else ""))
    assert ok


# ---------------------------------------------------------------------------
# 2. conformance suite counts

REFERENCE_COUNTS = {
    ("X86", 2): (0, 2), ("X86", 3): (4, 24), ("X86", 4): (22, 99),
    ("POWER", 2): (2, 7), ("POWER", 3): (9, 44),
}
SUITE_BOUND = {"X86": 4, "POWER": 3}


def test_criterion_2_conformance_counts():
    t0 = time.perf_counter()
    cells, mismatched, x86_allow2 = [], [], []
    for arch, k in SUITE_BOUND.items():
        tm, base = get_model(f"{arch.lower()}-tm"), get_model(arch.lower())
        forbid = min_inconsistent(tm, base, sig=Signature(arch, k, edge_fences=False))
        allow = max_consistent(tm, forbid, edge_fences=False)
        for size in range(2, k + 1):
            pf, pa = REFERENCE_COUNTS[(arch, size)]
            f = sum(x.n == size for x in forbid)
            # Allow(k) draws on Forbid(k+1): only sizes below the bound are complete
            a = sum(x.n == size for x in allow) if size < k else None
            cells.append(f"{arch} |E|={size} forbid {f}/{pf} allow {'n/c' if a is None else a}/{pa}")
            if f != pf:
                mismatched.append(f"{arch} Forbid({size})")
            if a is None:
                mismatched.append(f"{arch} Allow({size}) not computed")
            elif a != pa:
                mismatched.append(f"{arch} Allow({size})")
        if arch == "X86":
            x86_allow2 = [sketch(x) for x in allow if x.n == 2]
    ok = not mismatched
    report(2, ok, "conformance counts (ours/reference)",
           "; ".join(cells) + f" ({time.perf_counter() - t0:.0f}s)"
           + (f"; differing: {', '.join(mismatched)}" if mismatched else ""))
    if x86_allow2:
        print("  x86 Allow(2) members: " + "; ".join(x86_allow2), flush=True)
    assert ok


# ---------------------------------------------------------------------------
# 3. metatheory searches


def test_criterion_3_metatheory():
    t0 = time.perf_counter()
    notes, problems = [], []

    for arch in ("power", "armv8"):
        res = check_monotonicity(f"{arch}-tm", 2, variant="coalescing")
        w = res.witness
        pictured = (w is not None and w.validate()
                    and isomorphic(w.x, load(CORPUS / f"mono_rmw_split_{arch}.exec"))
                    and isomorphic(w.y, load(CORPUS / f"mono_rmw_joined_{arch}.exec")))
        notes.append(f"mono {arch}@2 {'pictured pair' if pictured else 'MISSING'}")
        if not pictured:
            problems.append(f"mono {arch}")

    res = check_lock_elision("ARMV8", bound=7, all_witnesses=True)
    keys = {canonical_key(w.x) for w in res.witnesses}
    want = {canonical_key(load(CORPUS / f"elision_{s}_abstract.exec")) for s in ("rmw", "store_twice")}
    hit = want <= keys
    notes.append(f"elision ARMv8@7 {len(res.witnesses)} witnesses, pictured {'found' if hit else 'MISSING'}")
    if not hit:
        problems.append("ARMv8 elision")

    negatives = [
        ("x86-tm", lambda: check_monotonicity("x86-tm", 4)),
        ("cpp-tm", lambda: check_monotonicity("cpp-tm", 3, sig=Signature("CPP", 3, atomic_txns="any"))),
        ("", lambda: check_compilation("X86", 3)),
        ("", lambda: check_compilation("POWER", 3)),
        ("", lambda: check_compilation("ARMV8", 3)),
        ("", lambda: check_lock_elision("X86", bound=8)),
        ("", lambda: check_lock_elision("POWER", bound=9)),
        ("", lambda: check_lock_elision("ARMV8", fixed=True, bound=8)),
    ]
    for label, job in negatives:
        r = job()
        name = f"{r.check} {label}".strip()
        notes.append(f"{name} {'FOUND' if r.found else 'none'} up to {r.bound} ({r.searched} sources)")
        if r.found:
            problems.append(name)
    ok = not problems
    report(3, ok, "metatheory searches", "; ".join(notes) + f" ({time.perf_counter() - t0:.0f}s)")
    assert ok


# ---------------------------------------------------------------------------
# 4. exhaustive theorem suite

LITERAL_BOUND = 5


def theorem_runs():
    cpp3 = T.cpp_sig(3)
    return [
        ([T.theorem1, T.theorem2, T.lemma1, T.cpp_weak_isol, T.cnf_is_ecom], cpp3),
        ([T.txn_order_implies_strong_isol], Signature("SC", 4)),
        ([T.conservativity("tsc")], Signature("SC", 5, transactions=False)),
        ([T.conservativity("x86-tm")], Signature("X86", 5, transactions=False)),
        ([T.conservativity("power-tm")], Signature("POWER", 3, transactions=False)),
        ([T.conservativity("armv8-tm")], Signature("ARMV8", 3, transactions=False)),
        ([T.conservativity("cpp-tm")], T.cpp_sig(3, transactions=False)),
    ]


def test_criterion_4_theorem_suite():
    t0 = time.perf_counter()
    results = []
    for checks, sig in theorem_runs():
        results += T.run("", checks, sig)
    failing = [r for r in results if r.failures]
    short = sorted({r.name for r in results if int(r.bound.split()[-1]) < LITERAL_BOUND})
    # sample the literal bound for the C++ theorems to show how far it gets
    probe = T.run("", [T.theorem1, T.theorem2], T.cpp_sig(LITERAL_BOUND), deadline=time.perf_counter() + 60)
    cells = [f"{r.name}@{r.bound.split()[-1]}: {r.checked} execs, {len(r.failures)} violations" for r in results]
    detail = "; ".join(cells)
    detail += (f"; CPP<= {LITERAL_BOUND} probe: {probe[0].checked} execs in 60s, "
               f"{sum(len(p.failures) for p in probe)} violations, incomplete")
    if short:
        detail += f"; below {LITERAL_BOUND} events: {', '.join(short)}"
    ok = not failing and not short and all(p.ok for p in probe)
    report(4, ok, f"theorem suite, zero violations required at <= {LITERAL_BOUND}",
           detail + f" ({time.perf_counter() - t0:.0f}s)")
    assert ok


# ---------------------------------------------------------------------------
# 5. baseline litmus outcomes

BASELINES = ("x86", "power", "armv8", "cpp")
SHAPES = ("sb", "mp", "lb", "wrc", "iriw")


def test_criterion_5_baseline_litmus():
    t0 = time.perf_counter()
    records = []
    for p in sorted(CORPUS.glob("*.litmus")):
        if p.stem.split("_")[1] not in SHAPES:
            continue
        records += [r for r in check_file(str(p)) if r.model in BASELINES]
    shapes = {(r.model, Path(r.path).stem.split("_")[1]) for r in records}
    missing = [(m, s) for m in BASELINES for s in SHAPES if (m, s) not in shapes]
    bad = [f"{Path(r.path).name}:{r.model}" for r in records if not r.ok]
    dt = time.perf_counter() - t0
    ok = not bad and not missing and dt < 1.0
    report(5, ok, "baseline litmus outcomes",
           f"{len(records) - len(bad)}/{len(records)} match in {dt:.2f}s"
           + (f"; mismatches {bad}" if bad else "") + (f"; no test for {missing}" if missing else ""))
    assert ok


# ---------------------------------------------------------------------------
# 6. property suite

UNIT_MODULES = ("test_relalg.py", "test_execution.py", "test_models.py", "test_litmus.py",
                "test_synth.py", "test_metatheory.py", "test_cli.py", "test_dot_report.py")


def _run_units() -> tuple[int, int]:
    here = Path(__file__).parent
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(here / m) for m in UNIT_MODULES]], capture_output=True, text=True)
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else ""
    passed = failed = 0
    for chunk in tail.strip("= ").split(","):
        words = chunk.split()
        if len(words) >= 2 and words[0].isdigit():
            if words[1] == "passed":
                passed = int(words[0])
            elif words[1] in ("failed", "error", "errors"):
                failed += int(words[0])
    if proc.returncode and not failed:
        failed = 1
    return passed, failed


def test_criterion_6_property_suite(request):
    seen = getattr(request.config, "txmm_outcomes", None) if request is not None else None
    if seen and any(Path(k.split("::")[0]).name in UNIT_MODULES for k in seen):
        units = {k: v for k, v in seen.items() if Path(k.split("::")[0]).name in UNIT_MODULES}
        passed = sum(v == "passed" for v in units.values())
        failed = sum(v == "failed" for v in units.values())
        how = "this session"
    else:
        passed, failed = _run_units()
        how = "subprocess"
    ok = passed > 0 and failed == 0
    report(6, ok, "property suite", f"{passed} passed, {failed} failed ({how})")
    assert ok


if __name__ == "__main__":
    tests = [test_criterion_1_golden_verdicts, test_criterion_2_conformance_counts,
             test_criterion_3_metatheory, test_criterion_4_theorem_suite,
             test_criterion_5_baseline_litmus]
    for fn in tests:
        try:
            fn()
        except AssertionError:
            pass
    try:
        test_criterion_6_property_suite(None)
    except AssertionError:
        pass
    print("\n".join(["", "acceptance summary:", *ACCEPTANCE_LINES]))
    sys.exit(0 if all(" PASS" in ln for ln in ACCEPTANCE_LINES) else 1)
