"""Bounded enumeration of executions and Forbid/Allow suite synthesis.

Enumeration is orderly: threads are generated longest first, locations are
named by first occurrence, and a skeleton (everything but ``rf``/``co``) is
kept only when it is the least encoding among its thread permutations.  The
permutations that fix a skeleton are its automorphisms; ``rf``/``co`` choices
are then deduplicated against those alone.
"""

from __future__ import annotations

import builtins
import itertools
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Sequence

from . import relalg as ra
from .execution import (ARCH_FENCES, CALL, EXCLUSIVE_ARCHES, FENCE, READ, WRITE, Event, Execution, po_from_threads,
                        threads_of)
from .relalg import bits

_builtin_enumerate = builtins.enumerate

LOC_NAMES = ("x", "y", "z", "w", "v", "u")

# event templates per architecture (location filled in later)
_PLAIN = [Event(READ, "?"), Event(WRITE, "?")]
_ARCH_EVENTS = {
    "SC": _PLAIN,
    "TSC": _PLAIN,
    "X86": _PLAIN + [Event(FENCE, fence="mfence")],
    "POWER": _PLAIN + [Event(FENCE, fence=f) for f in ("sync", "lwsync", "isync")],
    "ARMV8": [Event(READ, "?"), Event(READ, "?", frozenset({"Acq"})), Event(WRITE, "?"),
              Event(WRITE, "?", frozenset({"Rel"}))] + [Event(FENCE, fence=f) for f in ("dmb", "dmbld", "dmbst", "isb")],
    "CPP": [Event(k, "?", frozenset(t)) for k in (READ, WRITE)
            for t in ((), ("Ato",), ("Ato", "Acq" if k == READ else "Rel"), ("Ato", "SC"))],
}
_ARCH_DEPS = {"POWER": True, "ARMV8": True}


def cpp_events(modes: Sequence[str] = ("na", "rlx", "acqrel", "sc")) -> list[Event]:
    """C++ event templates restricted to the given access modes."""
    tag = {"na": (), "rlx": ("Ato",), "sc": ("Ato", "SC")}
    out = []
    for k in (READ, WRITE):
        for mode in modes:
            if mode == "acqrel":
                out.append(Event(k, "?", frozenset(("Ato", "Acq" if k == READ else "Rel"))))
            else:
                out.append(Event(k, "?", frozenset(tag[mode])))
    return out


@dataclass(frozen=True)
class Signature:
    """What to enumerate.

    ``atomic_txns`` is ``"none"``, ``"any"`` (each transaction may or may not
    be atomic) or ``"all"`` (``satxn = stxn``).  ``edge_fences`` allows fence
    events at the start or end of a thread, where they order nothing.
    """

    arch: str
    max_events: int
    min_events: int = 1
    transactions: bool = True
    max_txns: int | None = None
    min_txns: int = 0
    atomic_txns: str = "none"
    events: tuple | None = None
    deps: bool | None = None
    ctrl_from_store: bool = True
    rmw: bool = True
    max_locations: int | None = None
    max_threads: int | None = None
    edge_fences: bool = True

    def alphabet(self) -> list[Event]:
        return list(self.events) if self.events is not None else list(_ARCH_EVENTS[self.arch])

    def use_deps(self) -> bool:
        return _ARCH_DEPS.get(self.arch, False) if self.deps is None else self.deps


# ---------------------------------------------------------------------------
# canonical encodings

_KEY_RELS = ("rmw", "addr", "ctrl", "data", "stxn", "satxn", "scr", "scrt")


def _event_desc(e: Event, locmap: dict) -> tuple:
    return (e.kind, locmap.get(e.loc, -1) if e.loc is not None else -1, tuple(sorted(e.tags)),
            e.fence or "", e.lock or "")


def _order_key(x: Execution, order: Sequence[int], lengths: tuple, rels: Sequence[str]) -> tuple:
    new = {old: i for i, old in _builtin_enumerate(order)}
    locmap: dict = {}
    descs = []
    for old in order:
        e = x.events[old]
        if e.loc is not None and e.loc not in locmap:
            locmap[e.loc] = len(locmap)
        descs.append(_event_desc(e, locmap))
    parts = [x.arch, lengths, tuple(descs)]
    for r in rels:
        rows = x.rels[r]
        parts.append(tuple(sorted((new[a], new[b]) for a in order for b in bits(rows[a]))))
    return tuple(parts)


def _thread_orders(threads: list[list[int]]) -> Iterator[tuple[tuple, list[int]]]:
    """Thread permutations sorted by non-increasing length, as (lengths, event order)."""
    threads = sorted(threads, key=lambda t: -len(t))
    lengths = tuple(len(t) for t in threads)
    groups = [list(g) for _, g in itertools.groupby(threads, key=len)]
    for choice in itertools.product(*[list(itertools.permutations(g)) for g in groups]):
        order = [e for grp in choice for th in grp for e in th]
        yield lengths, order


ALL_KEY_RELS = _KEY_RELS + ("rf", "co")


def canonical_key(x: Execution) -> tuple:
    """Isomorphism-invariant key: ``canonical_key(x) == canonical_key(y)`` iff x ≅ y."""
    return min(_order_key(x, order, lengths, ALL_KEY_RELS) for lengths, order in _thread_orders(x.threads()))


def from_key(key: tuple) -> Execution:
    arch, lengths, descs = key[0], key[1], key[2]
    events = []
    for kind, loc, tags, fence, lock in descs:
        events.append(Event(kind, LOC_NAMES[loc] if loc >= 0 and loc < len(LOC_NAMES) else (f"l{loc}" if loc >= 0 else None),
                            frozenset(tags), fence or None, lock or None))
    n = len(events)
    threads, start = [], 0
    for ln in lengths:
        threads.append(list(range(start, start + ln)))
        start += ln
    rels = {"po": po_from_threads(n, threads)}
    for name, pairs in zip(ALL_KEY_RELS, key[3:]):
        rels[name] = ra.rows_from_pairs(n, pairs)
    return Execution(arch, events, rels)


def canonicalize(x: Execution) -> Execution:
    return from_key(canonical_key(x))


def isomorphic(x: Execution, y: Execution) -> bool:
    return x.n == y.n and canonical_key(x) == canonical_key(y)


# ---------------------------------------------------------------------------
# enumeration


def _partitions(k: int, max_part: int | None = None) -> Iterator[tuple[int, ...]]:
    max_part = k if max_part is None else max_part
    if k == 0:
        yield ()
        return
    for first in range(min(k, max_part), 0, -1):
        for rest in _partitions(k - first, first):
            yield (first,) + rest


def _rgs(m: int, limit: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings: location assignments up to renaming."""
    def rec(prefix, top):
        if len(prefix) == m:
            yield tuple(prefix)
            return
        for v in range(min(top + 1, limit)):
            prefix.append(v)
            yield from rec(prefix, max(top, v + 1))
            prefix.pop()
    yield from rec([], 0)


def _segmentations(length: int) -> list[list[tuple[int, int]]]:
    """All sets of disjoint contiguous intervals [i, j) within 0..length."""
    out = []

    def rec(pos, acc):
        if pos >= length:
            out.append(list(acc))
            return
        rec(pos + 1, acc)  # pos not in a transaction
        for end in range(pos + 1, length + 1):
            acc.append((pos, end))
            rec(end, acc)
            acc.pop()
    rec(0, [])
    return out


_SEGS: dict[int, list] = {}


def _segs(length: int):
    if length not in _SEGS:
        _SEGS[length] = _segmentations(length)
    return _SEGS[length]


def _thread_extras(sig: Signature, evs: Sequence[Event], ids: Sequence[int]) -> list[tuple]:
    """Intra-thread choices: (rmw pairs, addr, ctrl, data, txn intervals)."""
    L = len(ids)
    rmw_cands = []
    if sig.rmw:
        spanning = sig.arch in EXCLUSIVE_ARCHES
        for i in range(L - 1):
            a = evs[ids[i]]
            if a.kind != READ:
                continue
            for j in range(i + 1, L):
                b = evs[ids[j]]
                if b.kind == WRITE and b.loc == a.loc:
                    if not (sig.arch == "CPP" and not ("Ato" in a.tags and "Ato" in b.tags)):
                        rmw_cands.append((ids[i], ids[j]))
                if not spanning or b.loc == a.loc:
                    break
    rmw_opts = []
    for r in range(len(rmw_cands) + 1):
        for c in itertools.combinations(rmw_cands, r):
            ends = [e for p in c for e in p]
            if len(ends) == len(set(ends)):
                rmw_opts.append(list(c))
    results = []
    for rmw in rmw_opts:
        rmw_w = {b for _, b in rmw}
        if sig.use_deps():
            per_src = []
            for i in range(L):
                e = evs[ids[i]]
                is_src = e.kind == READ
                ctrl_ok = is_src or (sig.ctrl_from_store and sig.arch == "POWER" and ids[i] in rmw_w)
                if not (is_src or ctrl_ok):
                    continue
                later = ids[i + 1:]
                if not later:
                    continue
                addr_t = [t for t in later if evs[t].kind in (READ, WRITE)] if is_src else []
                data_t = [t for t in later if evs[t].kind == WRITE] if is_src else []
                ctrl_starts = [None] + (list(range(len(later))) if ctrl_ok else [])
                opts = []
                for na in range(len(addr_t) + 1):
                    for aset in itertools.combinations(addr_t, na):
                        for nd in range(len(data_t) + 1):
                            for dset in itertools.combinations(data_t, nd):
                                for cs in ctrl_starts:
                                    cset = later[cs:] if cs is not None else []
                                    opts.append(([(ids[i], t) for t in aset], [(ids[i], t) for t in cset],
                                                 [(ids[i], t) for t in dset]))
                per_src.append(opts)
            dep_opts = []
            for combo in itertools.product(*per_src):
                addr = [p for o in combo for p in o[0]]
                ctrl = [p for o in combo for p in o[1]]
                data = [p for o in combo for p in o[2]]
                dep_opts.append((addr, ctrl, data))
        else:
            dep_opts = [([], [], [])]
        seg_opts = _segs(L) if sig.transactions else [[]]
        for addr, ctrl, data in dep_opts:
            for seg in seg_opts:
                txns = [[ids[k] for k in range(i, j)] for i, j in seg]
                results.append((rmw, addr, ctrl, data, txns))
    return results


def _rf_co_choices(evs: Sequence[Event]):
    reads = [i for i, e in _builtin_enumerate(evs) if e.kind == READ]
    writes_by_loc: dict = {}
    for i, e in _builtin_enumerate(evs):
        if e.kind == WRITE:
            writes_by_loc.setdefault(e.loc, []).append(i)
    rf_opts = [[None] + writes_by_loc.get(evs[r].loc, []) for r in reads]
    co_opts = [list(itertools.permutations(ws)) for ws in writes_by_loc.values()]
    co_list = list(itertools.product(*co_opts))
    for rf_choice in itertools.product(*rf_opts):
        rf = [(w, r) for r, w in zip(reads, rf_choice) if w is not None]
        for co_choice in co_list:
            co = [(ch[i], ch[j]) for ch in co_choice for i in range(len(ch)) for j in range(i + 1, len(ch))]
            yield rf, co


def count_rf_co(evs: Sequence[Event]) -> int:
    """Number of rf × co choices for a list of events (before any filtering)."""
    import math
    writes = Counter(e.loc for e in evs if e.kind == WRITE)
    out = 1
    for e in evs:
        if e.kind == READ:
            out *= 1 + writes.get(e.loc, 0)
    for c in writes.values():
        out *= math.factorial(c)
    return out


def enumerate_executions(sig: Signature) -> Iterator[Execution]:
    """Every well-formed execution within ``sig``, one per isomorphism class."""
    for k in range(max(sig.min_events, 1), sig.max_events + 1):
        yield from _enumerate_size(sig, k)




def _enumerate_size(sig: Signature, k: int) -> Iterator[Execution]:
    alphabet = sig.alphabet()
    allowed_f = ARCH_FENCES.get(sig.arch, ())
    alphabet = [e for e in alphabet if e.kind != FENCE or e.fence in allowed_f]
    max_locs = sig.max_locations if sig.max_locations is not None else k
    max_threads = sig.max_threads if sig.max_threads is not None else k
    for lengths in _partitions(k):
        if len(lengths) > max_threads:
            continue
        threads = []
        start = 0
        for ln in lengths:
            threads.append(list(range(start, start + ln)))
            start += ln
        po = po_from_threads(k, threads)
        orders = [order for _, order in _thread_orders(threads)]
        for kinds in itertools.product(alphabet, repeat=k):
            if not sig.edge_fences and any(
                    kinds[th[0]].kind == FENCE or kinds[th[-1]].kind == FENCE for th in threads):
                continue
            mem = [i for i in range(k) if kinds[i].kind in (READ, WRITE)]
            for locs in _rgs(len(mem), max_locs):
                evs = list(kinds)
                for i, l in zip(mem, locs):
                    evs[i] = replace(kinds[i], loc=LOC_NAMES[l])
                evs = tuple(evs)
                base = Execution(sig.arch, evs, {"po": po})
                ident = _order_key(base, list(range(k)), lengths, ())
                ties = []
                smaller = False
                for order in orders:
                    kk = _order_key(base, order, lengths, ())
                    if kk < ident:
                        smaller = True
                        break
                    if kk == ident:
                        ties.append(order)
                if smaller:
                    continue
                yield from _with_extras(sig, evs, threads, lengths, po, ties)


def _with_extras(sig, evs, threads, lengths, po, ties):
    k = len(evs)
    per_thread = [_thread_extras(sig, evs, th) for th in threads]
    for combo in itertools.product(*per_thread):
        rmw = [p for c in combo for p in c[0]]
        addr = [p for c in combo for p in c[1]]
        ctrl = [p for c in combo for p in c[2]]
        data = [p for c in combo for p in c[3]]
        txns = [t for c in combo for t in c[4]]
        if sig.max_txns is not None and len(txns) > sig.max_txns:
            continue
        if len(txns) < sig.min_txns:
            continue
        if sig.atomic_txns == "all":
            atomic_opts = [txns]
        elif sig.atomic_txns == "any":
            atomic_opts = [[t for t, bit in zip(txns, mask) if bit]
                           for mask in itertools.product((0, 1), repeat=len(txns))]
        else:
            atomic_opts = [[]]
        for atomic in atomic_opts:
            rels = {
                "po": po,
                "rmw": ra.rows_from_pairs(k, rmw),
                "addr": ra.rows_from_pairs(k, addr),
                "ctrl": ra.rows_from_pairs(k, ctrl),
                "data": ra.rows_from_pairs(k, data),
                "stxn": ra.per_from_classes(k, txns),
                "satxn": ra.per_from_classes(k, atomic),
            }
            skel = Execution(sig.arch, evs, rels)
            ident = _order_key(skel, list(range(k)), lengths, _KEY_RELS)
            autos = []
            smaller = False
            for order in ties:
                kk = _order_key(skel, order, lengths, _KEY_RELS)
                if kk < ident:
                    smaller = True
                    break
                if kk == ident and order != list(range(k)):
                    autos.append(order)
            if smaller:
                continue
            for rf, co in _rf_co_choices(evs):
                r2 = dict(rels)
                r2["rf"] = ra.rows_from_pairs(k, rf)
                r2["co"] = ra.rows_from_pairs(k, co)
                x = Execution(sig.arch, evs, r2)
                if autos:
                    full = _order_key(x, list(range(k)), lengths, ALL_KEY_RELS)
                    if any(_order_key(x, o, lengths, ALL_KEY_RELS) < full for o in autos):
                        continue
                yield x


# ---------------------------------------------------------------------------
# the shrink order


@dataclass(frozen=True)
class ShrinkStep:
    kind: str  # RemoveEvent | RemoveDep | Downgrade | DetransactionalizeBoundary
    payload: tuple

    def __str__(self) -> str:
        return f"{self.kind}{self.payload}"


def induced(x: Execution, keep: Sequence[int]) -> Execution:
    """The sub-execution on the events ``keep`` (incident edges dropped)."""
    keep = list(keep)
    n = len(keep)
    rels = {}
    for name, rows in x.rels.items():
        new = []
        for old in keep:
            row = rows[old]
            acc = 0
            for j, o2 in _builtin_enumerate(keep):
                if (row >> o2) & 1:
                    acc |= 1 << j
            new.append(acc)
        rels[name] = tuple(new)
    events = [x.events[i] for i in keep]
    names = [x.names[i] for i in keep]
    return Execution(x.arch, events, rels, names=names)


# Downgrade lattice: tags removed or replaced, per architecture.
def _downgrades(arch: str, e: Event) -> list[Event]:
    t = set(e.tags)
    out = []
    if arch == "ARMV8":
        if e.kind == READ and "Acq" in t:
            out.append(replace(e, tags=frozenset(t - {"Acq"})))
        if e.kind == WRITE and "Rel" in t:
            out.append(replace(e, tags=frozenset(t - {"Rel"})))
        if e.kind == FENCE and e.fence == "dmb":
            out += [replace(e, fence="dmbld"), replace(e, fence="dmbst")]
    elif arch == "CPP" and e.kind in (READ, WRITE):
        if "SC" in t:
            out.append(replace(e, tags=frozenset((t - {"SC"}) | {"Acq" if e.kind == READ else "Rel"})))
        elif "Acq" in t or "Rel" in t:
            out.append(replace(e, tags=frozenset(t - {"Acq", "Rel"})))
        elif "Ato" in t:
            out.append(replace(e, tags=frozenset(t - {"Ato"})))
    return out


def tag_weight(x: Execution) -> int:
    """Strength of annotations; every Downgrade lowers it.  SC outweighs
    Acq/Rel so that SC -> Acq/Rel, which swaps one tag for another, counts."""
    w = 0
    for e in x.events:
        w += len(e.tags) + ("SC" in e.tags)
        if e.fence == "dmb":
            w += 1
    return w


def measure(x: Execution) -> tuple:
    deps = sum(bin(r).count("1") for name in ("addr", "ctrl", "data", "rmw") for r in x.rels[name])
    stxn_pairs = sum(bin(r).count("1") for r in x.rels["stxn"])
    return (x.n, deps, tag_weight(x), stxn_pairs)


def shrink_steps(x: Execution) -> list[tuple[ShrinkStep, Execution]]:
    out = []
    n = x.n
    for e in range(n):
        out.append((ShrinkStep("RemoveEvent", (e,)), induced(x, [i for i in range(n) if i != e])))
    for name in ("addr", "data", "rmw"):
        for a, b in ra.rows_pairs(x.rels[name]):
            rows = list(x.rels[name])
            rows[a] &= ~(1 << b)
            out.append((ShrinkStep("RemoveDep", (name, a, b)), x.replace(**{name: tuple(rows)})))
    po = x.rels["po"]
    ctrl = x.rels["ctrl"]
    for a in range(n):
        tgts = ctrl[a]
        if not tgts:
            continue
        # the po-first target: the one no other target precedes
        first = next(b for b in bits(tgts) if not any((po[c] >> b) & 1 for c in bits(tgts)))
        rows = list(ctrl)
        rows[a] &= ~(1 << first)
        out.append((ShrinkStep("RemoveDep", ("ctrl", a, first)), x.replace(ctrl=tuple(rows))))
    for e in range(n):
        for new in _downgrades(x.arch, x.events[e]):
            evs = list(x.events)
            evs[e] = new
            y = Execution(x.arch, evs, x.rels, names=x.names)
            out.append((ShrinkStep("Downgrade", (e, new.label())), y))
    for cls in ra.per_classes(x.rels["stxn"]):
        members = list(bits(cls))
        first = next(m for m in members if not any((po[o] >> m) & 1 for o in members))
        last = next(m for m in members if not any((po[m] >> o) & 1 for o in members))
        for e in sorted({first, last}):
            rest = cls & ~(1 << e)
            stxn = [r for r in x.rels["stxn"]]
            satxn = [r for r in x.rels["satxn"]]
            atomic = bool(satxn[e])
            for m in bits(cls):
                stxn[m] = rest if m != e else 0
                if atomic:
                    satxn[m] = rest if m != e else 0
            out.append((ShrinkStep("DetransactionalizeBoundary", (e,)),
                        x.replace(stxn=tuple(stxn), satxn=tuple(satxn))))
    return out


def erase_txns(x: Execution) -> Execution:
    z = (0,) * x.n
    return x.replace(stxn=z, satxn=z)


# ---------------------------------------------------------------------------
# Forbid / Allow suites


def is_min_inconsistent(m, x: Execution, baseline=None) -> bool:
    if m.is_consistent(x):
        return False
    if baseline is not None and not baseline.is_consistent(erase_txns(x)):
        return False
    return all(m.is_consistent(y) for _, y in shrink_steps(x))


def _synth_sig(m, sig: Signature | None, max_events: int | None) -> Signature:
    if sig is None:
        sig = Signature(arch=m.arch, max_events=max_events or 3)
    return sig


def min_inconsistent(m, baseline=None, sig: Signature | None = None, max_events: int | None = None,
                     progress: Callable | None = None) -> list[Execution]:
    """Forbid suite: executions inconsistent under ``m`` whose every ⊏-predecessor is
    consistent, and (with ``baseline``) consistent under the baseline once
    transactions are erased.  Results are canonical, sorted by size then key."""
    sig = _synth_sig(m, sig, max_events)
    out = []
    for x in enumerate_executions(sig):
        if m.is_consistent(x):
            continue
        if baseline is not None and not baseline.is_consistent(erase_txns(x)):
            continue
        if all(m.is_consistent(y) for _, y in shrink_steps(x)):
            out.append(x)
            if progress:
                progress(x)
    return sorted(out, key=lambda e: (e.n, canonical_key(e)))


def has_edge_fence(x: Execution) -> bool:
    return any(x.events[th[0]].kind == FENCE or x.events[th[-1]].kind == FENCE for th in x.threads())


def max_consistent(m, forbid: Iterable[Execution], edge_fences: bool = True) -> list[Execution]:
    """Allow suite: one-step shrinks of Forbid members, m-consistent, deduplicated.
    With ``edge_fences=False`` shrinks leaving a fence first or last in a thread
    are dropped, matching a Forbid signature that prunes them."""
    seen = {}
    for y in forbid:
        for _, x in shrink_steps(y):
            if x.n == 0 or not m.is_consistent(x):
                continue
            if not edge_fences and has_edge_fence(x):
                continue
            key = canonical_key(x)
            if key not in seen:
                seen[key] = from_key(key)
    return [seen[k] for k in sorted(seen, key=lambda kk: (len(kk[2]), kk))]


def txn_count(x: Execution) -> int:
    return len(ra.per_classes(x.rels["stxn"]))


@dataclass
class SuiteRow:
    arch: str
    events: int
    forbid: int
    allow: int


def summarize(forbid: Sequence[Execution], allow: Sequence[Execution], arch: str,
              sizes: Iterable[int]) -> list[SuiteRow]:
    f = Counter(x.n for x in forbid)
    a = Counter(x.n for x in allow)
    return [SuiteRow(arch, k, f.get(k, 0), a.get(k, 0)) for k in sizes]


def txn_histogram(forbid: Sequence[Execution]) -> dict[int, float]:
    """Share of Forbid tests by number of transactions, as percentages."""
    c = Counter(txn_count(x) for x in forbid)
    total = sum(c.values()) or 1
    return {k: 100.0 * v / total for k, v in sorted(c.items())}


# The public name of the enumeration operation.  Internal code uses the
# builtin through ``_builtin_enumerate``.
enumerate = enumerate_executions  # noqa: A001
