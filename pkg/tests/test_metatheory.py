import pytest

from txmm.execution import Execution, R, W, is_wellformed, load
from txmm.metatheory import (
    MONO_VARIANTS, Pi, PiWitness, UnsupportedArch, abstract_executions, check_compilation, check_lock_elision,
    check_monotonicity, compile_execution, lock_elision_clauses, map_lock_execution, stxn_additions,
)
from txmm.models import get_model
from txmm.synth import Signature, canonical_key, isomorphic


def test_pi_basics():
    pi = Pi.from_pairs(2, 3, [(0, 0), (0, 1), (1, 2)])
    assert pi.pairs() == [(0, 0), (0, 1), (1, 2)]
    assert pi.image(0b01) == 0b011 and pi.preimage(0b100) == 0b10
    # an X edge 0->1 maps to every image pair
    assert pi.to_y((0b10, 0)) == (0b100, 0b100, 0)
    assert pi.to_x(pi.to_y((0b10, 0))) == (0b10, 0)


@pytest.mark.parametrize("arch", ["power", "armv8"])
def test_monotonicity_counterexample(arch, corpus):
    res = check_monotonicity(f"{arch}-tm", 2)
    assert res.found and res.witness.validate()
    res = check_monotonicity(f"{arch}-tm", 2, variant="coalescing")
    assert res.found and res.witness.validate()
    w = res.witness
    assert isomorphic(w.x, load(corpus / f"mono_rmw_split_{arch}.exec"))
    assert isomorphic(w.y, load(corpus / f"mono_rmw_joined_{arch}.exec"))
    assert "TxnCancelsRMW" in w.x_verdict


@pytest.mark.parametrize("model", ["x86-tm", "tsc"])
def test_no_monotonicity_counterexample(model):
    assert not check_monotonicity(model, 3).found


def test_no_cpp_monotonicity_counterexample():
    sig = Signature("CPP", 2, atomic_txns="any")
    assert not check_monotonicity("cpp-tm", 2, sig=sig).found


def test_restricted_variants_are_subsets():
    x = Execution.build("POWER", [R("x"), W("x"), W("y")], threads=[[0, 1, 2]], rmw=[(0, 1)], stxn=[[0], [1]])
    general = {canonical_key(y) for _, y in stxn_additions(x, "any")}
    for v in MONO_VARIANTS[1:]:
        assert {canonical_key(y) for _, y in stxn_additions(x, v)} <= general
    assert {k for k, _ in stxn_additions(x, "any")} == {"introduction", "enlargement", "coalescing"}
    with pytest.raises(ValueError):
        check_monotonicity("power-tm", 1, variant="sideways")


@pytest.mark.parametrize("target", ["X86", "POWER", "ARMV8"])
def test_no_compilation_counterexample(target):
    res = check_compilation(target, 2)
    assert not res.found and res.searched > 0


def test_compiled_dongol_execution_stays_forbidden(corpus):
    x = load(corpus / "cpp_txn_order.exec")
    assert not get_model("cpp-tm").is_consistent(x)
    for target, model in (("POWER", "power-tm"), ("X86", "x86-tm"), ("ARMV8", "armv8-tm")):
        y, pi = compile_execution(x, target)
        assert is_wellformed(y)
        assert not get_model(model).is_consistent(y)
        assert len(pi.pairs()) >= x.n


def test_compile_mappings():
    x = Execution.build("CPP", [W("x", "Ato", "SC"), R("y", "Ato", "SC")], threads=[[0, 1]])
    y, _ = compile_execution(x, "X86")
    assert [e.label() for e in y.events] == ["W x", "mfence", "R y"]
    y, _ = compile_execution(x, "ARMV8")
    assert [e.label() for e in y.events] == ["W[Rel] x", "R[Acq] y"]
    y, _ = compile_execution(x, "POWER")
    assert [e.label() for e in y.events if e.kind == "F"].count("sync") == 2


def test_empty_execution_compiles_to_empty():
    y, pi = compile_execution(Execution("CPP", []), "X86")
    assert y.n == 0 and pi.pairs() == []


@pytest.mark.parametrize("stem", ["elision_rmw", "elision_store_twice"])
def test_elision_corpus_pairs(stem, corpus):
    x = load(corpus / f"{stem}_abstract.exec")
    want = load(corpus / f"{stem}_concrete.exec")
    src, tgt = get_model("armv8-tm+crorder"), get_model("armv8-tm")
    assert not src.is_consistent(x)
    ys, pi, _ = map_lock_execution(x, "ARMV8")
    match = [y for y in ys if isomorphic(y, want)]
    assert len(match) == 1
    y = match[0]
    assert tgt.is_consistent(y) and lock_elision_clauses(x, y, pi) == []
    assert PiWitness("lock-elision", x, y, pi, src, tgt).validate()
    assert canonical_key(x) in {canonical_key(a) for a in abstract_executions("ARMV8", 7)}


def test_fixed_lock_blocks_the_corpus_witness(corpus):
    x = load(corpus / "elision_rmw_abstract.exec")
    ys, _, _ = map_lock_execution(x, "ARMV8", fixed=True)
    assert ys and not any(get_model("armv8-tm").is_consistent(y) for y in ys)


def test_bad_witness_is_reported(corpus):
    x = load(corpus / "elision_rmw_abstract.exec")
    ys, pi, _ = map_lock_execution(x, "ARMV8")
    y = ys[0]
    # swap source and target roles: X is now consistent under its model
    w = PiWitness("lock-elision", y.replace(arch="ARMV8"), y, Pi.identity(y.n), get_model("armv8-tm"),
                  get_model("armv8-tm"))
    assert not w.validate() and w.problems()


def test_unsupported_arch():
    with pytest.raises(UnsupportedArch):
        check_lock_elision("CPP")
    with pytest.raises(UnsupportedArch):
        check_lock_elision("X86", fixed=True)


def test_no_x86_elision_counterexample_small():
    res = check_lock_elision("X86", bound=8)
    assert not res.found and res.searched > 0
