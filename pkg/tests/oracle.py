"""Independent brute-force oracles.

Everything here works on Python sets of pairs and literal definitions; it
shares no code with the bitmask implementation under test beyond reading
the raw fields of an execution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass


# ---------------------------------------------------------------------------
# relations as sets of pairs


def seq(a, b):
    out = set()
    for x, y in a:
        for y2, z in b:
            if y == y2:
                out.add((x, z))
    return out


def inv(a):
    return {(y, x) for x, y in a}


def plus(a):
    out = set(a)
    while True:
        more = out | seq(out, a)
        if more == out:
            return out
        out = more


def ident(n):
    return {(i, i) for i in range(n)}


def star(a, n):
    return plus(a) | ident(n)


def acyclic(a):
    return all(x != y for x, y in plus(a))


def irreflexive(a):
    return all(x != y for x, y in a)


def lift(s):
    return {(i, i) for i in s}


def cross(s, t):
    return {(a, b) for a in s for b in t}


def weaklift(r, t):
    return seq(seq(t, r - t), t)


def stronglift(r, t, n):
    topt = t | ident(n)
    return seq(seq(topt, r - t), topt)


# ---------------------------------------------------------------------------
# executions as plain data


@dataclass
class OExec:
    n: int
    kind: list          # "R" "W" "F" "C"
    loc: list
    tags: list
    fence: list
    po: set
    rf: set
    co: set
    stxn: set
    satxn: set
    rmw: set
    addr: set
    data: set
    ctrl: set


def pairs_of(rows):
    return {(a, b) for a, r in enumerate(rows) for b in range(len(rows)) if (r >> b) & 1}


def from_execution(x) -> OExec:
    return OExec(
        n=x.n,
        kind=[e.kind for e in x.events],
        loc=[e.loc for e in x.events],
        tags=[set(e.tags) for e in x.events],
        fence=[e.fence for e in x.events],
        po=pairs_of(x.rels["po"]), rf=pairs_of(x.rels["rf"]), co=pairs_of(x.rels["co"]),
        stxn=pairs_of(x.rels["stxn"]), satxn=pairs_of(x.rels["satxn"]), rmw=pairs_of(x.rels["rmw"]),
        addr=pairs_of(x.rels["addr"]), data=pairs_of(x.rels["data"]), ctrl=pairs_of(x.rels["ctrl"]),
    )


def sets(o: OExec):
    R = {i for i in range(o.n) if o.kind[i] == "R"}
    W = {i for i in range(o.n) if o.kind[i] == "W"}
    F = {i for i in range(o.n) if o.kind[i] == "F"}
    return R, W, F


def sloc(o: OExec):
    return {(a, b) for a in range(o.n) for b in range(o.n)
            if o.kind[a] in "RW" and o.kind[b] in "RW" and o.loc[a] == o.loc[b]}


def sthd(o: OExec):
    return star(o.po | inv(o.po), o.n)


def fr(o: OExec):
    R, W, _ = sets(o)
    base = seq(seq(lift(R), sloc(o)), lift(W))
    return base - seq(inv(o.rf), star(inv(o.co), o.n))


def com(o: OExec):
    return o.rf | o.co | fr(o)


def ecom(o: OExec):
    return com(o) | seq(o.co, o.rf)


def ext(o, r):
    return r - sthd(o)


def fence_rel(o: OExec, flavor: str):
    R, W, F = sets(o)
    out = set()
    for a, f in o.po:
        if o.kind[f] != "F" or o.fence[f] != flavor or o.kind[a] == "F":
            continue
        for f2, b in o.po:
            if f2 == f and o.kind[b] != "F":
                if flavor == "dmbld" and a not in R:
                    continue
                if flavor == "dmbst" and (a not in W or b not in W):
                    continue
                out.add((a, b))
    return out


def tfence(o: OExec):
    n = o.n
    notin = cross(range(n), range(n)) - o.stxn
    return o.po & (seq(notin, o.stxn) | seq(o.stxn, notin))


# ---------------------------------------------------------------------------
# models, transcribed axiom by axiom


def sc_violations(o: OExec):
    hb = o.po | com(o)
    return [] if acyclic(hb) else ["Order"]


def tsc_violations(o: OExec):
    hb = o.po | com(o)
    out = [] if acyclic(hb) else ["Order"]
    if not acyclic(stronglift(hb, o.stxn, o.n)):
        out.append("TxnOrder")
    return out


def strong_isol(o: OExec) -> bool:
    return acyclic(stronglift(com(o), o.stxn, o.n))


def weak_isol(o: OExec) -> bool:
    return acyclic(weaklift(com(o), o.stxn))


def x86_violations(o: OExec, tm: bool = True):
    R, W, _ = sets(o)
    c = com(o)
    f = fr(o)
    out = []
    if not acyclic((o.po & sloc(o)) | c):
        out.append("Coherence")
    if o.rmw & seq(ext(o, f), ext(o, o.co)):
        out.append("RMWIsol")
    ppo = (cross(W, W) | cross(R, W) | cross(R, R)) & o.po
    locked = {a for a, _ in o.rmw} | {b for _, b in o.rmw}
    implied = seq(lift(locked), o.po) | seq(o.po, lift(locked))
    if tm:
        implied |= tfence(o)
    hb = fence_rel(o, "mfence") | ppo | implied | ext(o, o.rf) | f | o.co
    if not acyclic(hb):
        out.append("Order")
    if tm:
        if not acyclic(stronglift(c, o.stxn, o.n)):
            out.append("StrongIsol")
        if not acyclic(stronglift(hb, o.stxn, o.n)):
            out.append("TxnOrder")
    return out


def cnf(o: OExec):
    R, W, _ = sets(o)
    both = cross(W, W) | cross(R, W) | cross(W, R)
    return (both & sloc(o)) - ident(o.n)


# ---------------------------------------------------------------------------
# brute-force well-formed execution enumeration up to isomorphism


def _ordered_partitions(n):
    """Thread layouts: lists of thread lengths (order irrelevant; sorted)."""
    def rec(rest, max_part):
        if rest == 0:
            yield []
            return
        for k in range(min(rest, max_part), 0, -1):
            for tail in rec(rest - k, k):
                yield [k] + tail
    return list(rec(n, n))


def _contiguous_classes(thread):
    """All ways to mark disjoint contiguous non-empty segments of a thread."""
    L = len(thread)
    out = []

    def rec(i, acc):
        if i >= L:
            out.append(list(acc))
            return
        rec(i + 1, acc)  # event i not starting a txn here
        for j in range(i + 1, L + 1):
            acc.append(thread[i:j])
            rec(j, acc)
            acc.pop()
    rec(0, [])
    return out


def _canon(n, kinds, locs, po, rf, co, stxn, rmw):
    best = None
    for perm in itertools.permutations(range(n)):
        # rename locations by first appearance under this permutation
        order = [None] * n
        for new, old in enumerate(perm):
            order[new] = old
        lmap = {}
        for old in order:
            if locs[old] is not None and locs[old] not in lmap:
                lmap[locs[old]] = len(lmap)
        p = {old: new for new, old in enumerate(order)}
        enc = (
            tuple((kinds[o], lmap.get(locs[o])) for o in order),
            tuple(sorted((p[a], p[b]) for a, b in po)),
            tuple(sorted((p[a], p[b]) for a, b in rf)),
            tuple(sorted((p[a], p[b]) for a, b in co)),
            tuple(sorted((p[a], p[b]) for a, b in stxn)),
            tuple(sorted((p[a], p[b]) for a, b in rmw)),
        )
        if best is None or enc < best:
            best = enc
    return best


def brute_executions(max_events: int, kinds=("R", "W"), txns: bool = True, rmw: bool = False):
    """Canonical encodings of every well-formed execution with 1..max_events
    events drawn from ``kinds`` ("R", "W", or a fence flavor string)."""
    seen = set()
    for n in range(1, max_events + 1):
        for layout in _ordered_partitions(n):
            threads, k = [], 0
            for L in layout:
                threads.append(list(range(k, k + L)))
                k += L
            po = {(t[i], t[j]) for t in threads for i in range(len(t)) for j in range(i + 1, len(t))}
            for kind in itertools.product(kinds, repeat=n):
                mem = [i for i in range(n) if kind[i] in ("R", "W")]
                for locs_mem in itertools.product(range(len(mem)), repeat=len(mem)):
                    locs = [None] * n
                    for i, l in zip(mem, locs_mem):
                        locs[i] = l
                    reads = [i for i in mem if kind[i] == "R"]
                    writes = [i for i in mem if kind[i] == "W"]
                    rf_opts = [[None] + [w for w in writes if locs[w] == locs[r]] for r in reads]
                    by_loc = {}
                    for w in writes:
                        by_loc.setdefault(locs[w], []).append(w)
                    co_opts = [list(itertools.permutations(ws)) for ws in by_loc.values()]
                    if txns:
                        txn_opts = list(itertools.product(*[_contiguous_classes(t) for t in threads]))
                    else:
                        txn_opts = [tuple([] for _ in threads)]
                    rmw_opts = [set()]
                    if rmw:
                        cands = [(a, b) for a, b in po if kind[a] == "R" and kind[b] == "W"
                                 and locs[a] == locs[b] and not any((a, c) in po and (c, b) in po for c in range(n))]
                        rmw_opts = []
                        for r in range(len(cands) + 1):
                            for sub in itertools.combinations(cands, r):
                                srcs = [a for a, _ in sub]
                                dsts = [b for _, b in sub]
                                if len(set(srcs)) == len(srcs) and len(set(dsts)) == len(dsts):
                                    rmw_opts.append(set(sub))
                    for rfc in itertools.product(*rf_opts):
                        rf = {(w, r) for w, r in zip(rfc, reads) if w is not None}
                        for coc in itertools.product(*co_opts):
                            co = set()
                            for chain in coc:
                                co |= {(chain[i], chain[j]) for i in range(len(chain)) for j in range(i + 1, len(chain))}
                            for tx in txn_opts:
                                st = set()
                                for cls_list in tx:
                                    for cls in cls_list:
                                        st |= {(a, b) for a in cls for b in cls}
                                for rm in rmw_opts:
                                    seen.add(_canon(n, kind, locs, po, rf, co, st, rm))
    return seen


# ---------------------------------------------------------------------------
# brute-force candidate generation for tiny programs


def brute_candidates(events, threads):
    """Well-formed rf/co choices found by filtering *all* subsets of W×R and
    W×W pairs (no structural shortcuts).  ``events`` are (kind, loc); the
    result is a list of canonical encodings, one per candidate."""
    n = len(events)
    W = [i for i in range(n) if events[i][0] == "W"]
    R = [i for i in range(n) if events[i][0] == "R"]
    po = {(t[i], t[j]) for t in threads for i in range(len(t)) for j in range(i + 1, len(t))}
    rf_space = [(w, r) for w in W for r in R]
    co_space = [(a, b) for a in W for b in W if a != b]
    out = []
    for rk in range(len(rf_space) + 1):
        for rf in itertools.combinations(rf_space, rk):
            if any(events[w][1] != events[r][1] for w, r in rf):
                continue
            if len({r for _, r in rf}) != len(rf):
                continue
            for ck in range(len(co_space) + 1):
                for co in itertools.combinations(co_space, ck):
                    co = set(co)
                    if any(events[a][1] != events[b][1] for a, b in co):
                        continue
                    if not acyclic(co) or plus(co) != co:
                        continue
                    if any(events[a][1] == events[b][1] and a < b and (a, b) not in co and (b, a) not in co
                           for a in W for b in W):
                        continue
                    out.append(_canon(n, [k for k, _ in events], [l for _, l in events], po, set(rf), co,
                                      set(), set()))
    return out


def canon_of(o: OExec):
    kinds = [o.fence[i] if o.kind[i] == "F" else o.kind[i] for i in range(o.n)]
    return _canon(o.n, kinds, o.loc, o.po, o.rf, o.co, o.stxn, o.rmw)
