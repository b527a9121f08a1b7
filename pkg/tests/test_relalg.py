import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle as O
from txmm import relalg as ra
from txmm.relalg import ExprSyntaxError, Rel, evaluate, parse_expr

N = 5
pairs_st = st.sets(st.tuples(st.integers(0, N - 1), st.integers(0, N - 1)), max_size=12)
set_st = st.integers(0, (1 << N) - 1)


def R(p):
    return Rel.from_pairs(N, p)


def test_seq_example():
    r = Rel.from_pairs(3, [(0, 1), (1, 2)])
    assert (r @ r).pairs() == {(0, 2)}
    assert r.plus().pairs() == {(0, 1), (1, 2), (0, 2)}
    assert r.star().pairs() == {(0, 1), (1, 2), (0, 2), (0, 0), (1, 1), (2, 2)}


def test_cycle_detection():
    assert not Rel.from_pairs(3, [(0, 1), (1, 2), (2, 0)]).acyclic()
    assert Rel.from_pairs(3, [(0, 1), (1, 2)]).acyclic()
    assert not Rel.from_pairs(2, [(1, 1)]).irreflexive()


def test_rel_is_immutable_and_bounded():
    r = Rel(2)
    with pytest.raises(AttributeError):
        r.n = 3
    with pytest.raises(ValueError):
        Rel(2, (4, 0))


@given(pairs_st, pairs_st)
def test_algebra_matches_pair_sets(a, b):
    ra_, rb = R(a), R(b)
    assert (ra_ | rb).pairs() == a | b
    assert (ra_ & rb).pairs() == a & b
    assert (ra_ - rb).pairs() == a - b
    assert ra_.seq(rb).pairs() == O.seq(a, b)
    assert ra_.inv.pairs() == O.inv(a)
    assert ra_.plus().pairs() == O.plus(a)
    assert ra_.star().pairs() == O.star(a, N)
    assert ra_.acyclic() == O.acyclic(a)
    assert (~ra_).pairs() == O.cross(range(N), range(N)) - a


@given(pairs_st)
def test_acyclic_iff_closure_irreflexive(a):
    r = R(a)
    assert r.acyclic() == r.plus().irreflexive()


@given(pairs_st)
def test_closure_is_fixpoint(a):
    p = R(a).plus()
    assert (p | p.seq(p)).pairs() == p.pairs()


@given(pairs_st, st.lists(st.sets(st.integers(0, N - 1), min_size=1), max_size=3))
def test_lifts_match_definitions(a, classes):
    seen, cls = set(), []
    for c in classes:
        c = c - seen
        if c:
            cls.append(c)
            seen |= c
    t = ra.per_from_classes(N, cls)
    tp = O.pairs_of(t)
    rows = ra.rows_from_pairs(N, a)
    assert O.pairs_of(ra.weaklift(rows, t)) == O.weaklift(a, tp)
    assert O.pairs_of(ra.stronglift(rows, t)) == O.stronglift(a, tp, N)
    # every weak lift edge is also a strong lift edge
    assert O.weaklift(a, tp) <= O.stronglift(a, tp, N)


def test_stronglift_keeps_unlifted_edges():
    t = ra.per_from_classes(3, [[0, 1]])
    r = ra.rows_from_pairs(3, [(1, 2)])
    assert set(ra.rows_pairs(ra.stronglift(r, t))) == {(0, 2), (1, 2)}
    assert ra.rows_pairs(ra.weaklift(r, t)) == []


def test_per_classes_roundtrip():
    t = ra.per_from_classes(5, [[0, 2], [3]])
    assert sorted(ra.per_classes(t)) == sorted([0b101, 0b1000])


@given(pairs_st, pairs_st, set_st)
def test_expression_language_matches_oracle(a, b, s):
    env = {"a": ra.rows_from_pairs(N, a), "b": ra.rows_from_pairs(N, b), "S": s}
    sset = {i for i in range(N) if (s >> i) & 1}
    got = evaluate("(a | b^-1);[S];a+ \\ b", N, env)
    # `\` binds tighter than `;`
    want = O.seq(O.seq(a | O.inv(b), O.lift(sset)), O.plus(a) - b)
    assert O.pairs_of(got) == want
    got = evaluate("a & (S * S) | b?", N, env)
    want = (a & O.cross(sset, sset)) | b | O.ident(N)
    assert O.pairs_of(got) == want
    got = evaluate("~a & weaklift(b, a)", N, env)
    assert O.pairs_of(got) == (O.cross(range(N), range(N)) - a) & O.weaklift(b, a)


def test_star_disambiguation():
    env = {"a": ra.rows_from_pairs(3, [(0, 1)]), "S": 0b011}
    assert O.pairs_of(evaluate("a*", 3, env)) == {(0, 1), (0, 0), (1, 1), (2, 2)}
    assert O.pairs_of(evaluate("S * S", 3, env)) == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_unresolved_name_raises():
    with pytest.raises(NameError):
        evaluate("po | nothere", 2, {"po": (0, 0)})


@pytest.mark.parametrize("text", ["a |", "(a", "a ;; b", "[a", "a ^-2"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse_expr(text)


def test_show_roundtrip():
    e = parse_expr("stronglift(po | com, stxn) \\ [R];po")
    assert ra.show(parse_expr(ra.show(e))) == ra.show(e)


def test_evaluation_does_not_mutate_environment():
    rows = ra.rows_from_pairs(3, [(0, 1), (1, 2)])
    env = {"a": rows}
    evaluate("a+ | a^-1", 3, env)
    assert env["a"] is rows and rows == ra.rows_from_pairs(3, [(0, 1), (1, 2)])


@settings(max_examples=50)
@given(pairs_st)
def test_domain_range(a):
    r = R(a)
    assert set(ra.bits(r.domain())) == {x for x, _ in a}
    assert set(ra.bits(r.range())) == {y for _, y in a}
