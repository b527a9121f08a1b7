"""Execution graphs: events, base relations, well-formedness and derived relations.

An :class:`Execution` is immutable.  Its events are numbered ``0..n-1``; every
base relation is stored as a tuple of row bitmasks (see :mod:`txmm.relalg`).
Values are never free: the ``k``-th write to a location in ``co`` order writes
``k`` (1-based), and a read observes the value of its ``rf`` source, or ``0``
when it has none.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import relalg as ra
from .relalg import Rel, bits

READ, WRITE, FENCE, CALL = "R", "W", "F", "C"
KINDS = (READ, WRITE, FENCE, CALL)
LOCK_KINDS = ("L", "U", "Lt", "Ut")
TAGS = ("Acq", "Rel", "SC", "Ato", "X")
FENCE_FLAVORS = ("mfence", "sync", "lwsync", "isync", "dmb", "dmbld", "dmbst", "isb")
ARCHES = ("SC", "TSC", "X86", "POWER", "ARMV8", "CPP")
ARCH_FENCES = {
    "SC": (),
    "TSC": (),
    "X86": ("mfence",),
    "POWER": ("sync", "lwsync", "isync"),
    "ARMV8": ("dmb", "dmbld", "dmbst", "isb"),
    "CPP": (),
}

BASE_RELATIONS = ("po", "addr", "ctrl", "data", "rmw", "rf", "co", "stxn", "satxn", "scr", "scrt")
DEP_RELATIONS = ("addr", "ctrl", "data")


class ParseError(ValueError):
    """Malformed execution or litmus text."""

    def __init__(self, msg: str, line: int = 0, column: int = 0):
        where = f" (line {line}, column {column})" if line else ""
        super().__init__(msg + where)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Event:
    kind: str
    loc: str | None = None
    tags: frozenset = frozenset()
    fence: str | None = None
    lock: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        object.__setattr__(self, "tags", frozenset(self.tags))

    @property
    def is_memory(self) -> bool:
        return self.kind in (READ, WRITE)

    def label(self) -> str:
        if self.kind == FENCE:
            return self.fence or "F"
        if self.kind == CALL:
            return self.lock or "C"
        tags = "".join(f"{t}" for t in sorted(self.tags))
        return f"{self.kind}{('[' + tags + ']') if tags else ''} {self.loc}"


def R(loc: str, *tags: str) -> Event:
    return Event(READ, loc, frozenset(tags))


def W(loc: str, *tags: str) -> Event:
    return Event(WRITE, loc, frozenset(tags))


def F(flavor: str) -> Event:
    return Event(FENCE, fence=flavor)


def Call(kind: str, loc: str | None = None) -> Event:
    return Event(CALL, loc, lock=kind)


def default_names(n: int) -> tuple[str, ...]:
    letters = string.ascii_lowercase
    if n <= len(letters):
        return tuple(letters[:n])
    return tuple(f"e{i}" for i in range(n))


def _rows(n: int, value) -> tuple:
    if value is None:
        return (0,) * n
    if isinstance(value, Rel):
        if value.n != n:
            raise ValueError("relation universe does not match the event count")
        return value.rows
    if isinstance(value, tuple) and len(value) == n and all(isinstance(v, int) for v in value):
        return value
    return ra.rows_from_pairs(n, value)


class Execution:
    """A candidate execution.  Construct with :meth:`build` for convenience."""

    __slots__ = ("arch", "events", "names", "rels", "sloc", "_env", "_hash")

    def __init__(self, arch: str, events: Sequence[Event], rels: Mapping[str, object] | None = None,
                 names: Sequence[str] | None = None, sloc=None):
        if arch not in ARCHES:
            raise ValueError(f"unknown architecture {arch!r}")
        events = tuple(events)
        n = len(events)
        rels = dict(rels or {})
        unknown = set(rels) - set(BASE_RELATIONS)
        if unknown:
            raise ValueError(f"unknown base relations {sorted(unknown)}")
        self.arch = arch
        self.events = events
        self.names = tuple(names) if names is not None else default_names(n)
        if len(self.names) != n or len(set(self.names)) != n:
            raise ValueError("event names must be unique, one per event")
        self.rels = {r: _rows(n, rels.get(r)) for r in BASE_RELATIONS}
        self.sloc = _rows(n, sloc) if sloc is not None else loc_equivalence(events)
        self._env = None
        self._hash = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def build(cls, arch: str, events: Sequence[Event], threads: Sequence[Sequence[int]] = (),
              rf=(), co=(), stxn: Iterable[Iterable[int]] = (), satxn: Iterable[Iterable[int]] = (),
              addr=(), ctrl=(), data=(), rmw=(), names=None, co_chains: Iterable[Sequence[int]] = ()) -> "Execution":
        """Build from thread lists, pair lists and transaction classes.

        ``co_chains`` lists writes per location in coherence order and is
        expanded to a transitive relation; ``co`` takes raw pairs.
        ``scr``/``scrt`` are derived from lock calls.
        """
        n = len(events)
        po = po_from_threads(n, threads)
        co_pairs = list(co)
        for chain in co_chains:
            chain = list(chain)
            co_pairs.extend((chain[i], chain[j]) for i in range(len(chain)) for j in range(i + 1, len(chain)))
        rels = {
            "po": po,
            "rf": ra.rows_from_pairs(n, rf),
            "co": ra.rows_from_pairs(n, co_pairs),
            "stxn": ra.per_from_classes(n, stxn),
            "satxn": ra.per_from_classes(n, satxn),
            "addr": ra.rows_from_pairs(n, addr),
            "ctrl": ra.rows_from_pairs(n, ctrl),
            "data": ra.rows_from_pairs(n, data),
            "rmw": ra.rows_from_pairs(n, rmw),
        }
        scr, scrt = derive_critical_regions(events, po)
        rels["scr"] = scr
        rels["scrt"] = scrt
        return cls(arch, events, rels, names=names)

    def replace(self, arch: str | None = None, events=None, names=None, **rels) -> "Execution":
        new = dict(self.rels)
        new.update(rels)
        return Execution(arch or self.arch, events if events is not None else self.events, new,
                         names=names if names is not None else (self.names if events is None else None),
                         sloc=None)

    # -- basic accessors ------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.events)

    def rel(self, name: str) -> Rel:
        if name == "sloc":
            return Rel(self.n, self.sloc)
        return Rel(self.n, self.rels[name])

    def mask(self, pred) -> int:
        m = 0
        for i, e in enumerate(self.events):
            if pred(e):
                m |= 1 << i
        return m

    def threads(self) -> list[list[int]]:
        """Events grouped by thread, each in po order; threads ordered by first event id."""
        return threads_of(self.n, self.rels["po"])

    def values(self, init: Mapping[str, int] | None = None) -> list[int | None]:
        """Value written or read by each event (``None`` for fences and calls)."""
        init = init or {}
        co = self.rels["co"]
        vals: list[int | None] = [None] * self.n
        for i, e in enumerate(self.events):
            if e.kind == WRITE:
                # position in co among same-location writes
                preds = sum(1 for j in range(self.n) if (co[j] >> i) & 1)
                vals[i] = preds + 1
        rf_inv = ra.r_inv(self.n, self.rels["rf"])
        for i, e in enumerate(self.events):
            if e.kind == READ:
                src = rf_inv[i]
                vals[i] = vals[src.bit_length() - 1] if src else init.get(e.loc, 0)
        return vals

    def locations(self) -> list[str]:
        seen = []
        for e in self.events:
            if e.loc is not None and e.loc not in seen:
                seen.append(e.loc)
        return seen

    def txn_classes(self, which: str = "stxn") -> list[list[int]]:
        return [list(bits(m)) for m in ra.per_classes(self.rels[which])]

    # -- model environment ----------------------------------------------------

    def env(self) -> dict:
        """Name table used by model evaluation: event sets and base relations."""
        if self._env is None:
            self._env = build_env(self)
        return self._env

    # -- identity -------------------------------------------------------------

    def key(self) -> tuple:
        return (self.arch, self.events, tuple(self.rels[r] for r in BASE_RELATIONS), self.sloc)

    def __eq__(self, other) -> bool:
        return isinstance(other, Execution) and self.key() == other.key()

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __repr__(self) -> str:
        return f"<Execution {self.arch} |E|={self.n}>"

    def __str__(self) -> str:
        return serialize(self)


# ---------------------------------------------------------------------------
# helpers


def loc_equivalence(events: Sequence[Event]) -> tuple:
    n = len(events)
    rows = [0] * n
    by_loc: dict[str, int] = {}
    # lock calls carry their lock name in ``loc`` but are not memory accesses
    for i, e in enumerate(events):
        if e.is_memory:
            by_loc[e.loc] = by_loc.get(e.loc, 0) | (1 << i)
    for i, e in enumerate(events):
        if e.is_memory:
            rows[i] = by_loc[e.loc]
    return tuple(rows)


def po_from_threads(n: int, threads: Sequence[Sequence[int]]) -> tuple:
    rows = [0] * n
    seen = set()
    for th in threads:
        th = list(th)
        for k, e in enumerate(th):
            if e in seen:
                raise ValueError(f"event {e} appears in two threads")
            seen.add(e)
            for later in th[k + 1:]:
                rows[e] |= 1 << later
    return tuple(rows)


def threads_of(n: int, po: Sequence[int]) -> list[list[int]]:
    """Weakly connected components of po, each sorted by number of po-predecessors."""
    inv = ra.r_inv(n, tuple(po))
    sym = [po[i] | inv[i] for i in range(n)]
    seen = 0
    out = []
    for i in range(n):
        if (seen >> i) & 1:
            continue
        comp = 1 << i
        frontier = comp
        while frontier:
            nxt = 0
            for j in bits(frontier):
                nxt |= sym[j]
            frontier = nxt & ~comp
            comp |= nxt
        seen |= comp
        members = list(bits(comp))
        members.sort(key=lambda e: (bin(inv[e] & comp).count("1"), e))
        out.append(members)
    return out


def derive_critical_regions(events: Sequence[Event], po: Sequence[int]) -> tuple[tuple, tuple]:
    """``scr`` relates every pair of events in one critical region, lock calls included;
    ``scrt`` is its restriction to the transactionalised regions (Lt .. Ut)."""
    n = len(events)
    if not any(e.kind == CALL for e in events):
        return (0,) * n, (0,) * n
    classes, tclasses = [], []
    for th in threads_of(n, po):
        current: list[int] | None = None
        elided = False
        for e in th:
            ev = events[e]
            if ev.kind == CALL and ev.lock in ("L", "Lt"):
                current = [e]
                elided = ev.lock == "Lt"
            elif current is not None:
                current.append(e)
                if ev.kind == CALL and ev.lock in ("U", "Ut"):
                    (tclasses if elided else classes).append(current)
                    current = None
    scr = ra.per_from_classes(n, classes + tclasses)
    scrt = ra.per_from_classes(n, tclasses)
    return scr, scrt


def build_env(x: Execution) -> dict:
    ev = x.events
    n = len(ev)

    def m(pred) -> int:
        out = 0
        for i, e in enumerate(ev):
            if pred(e):
                out |= 1 << i
        return out

    env = {
        "E": (1 << n) - 1,
        "R": m(lambda e: e.kind == READ),
        "W": m(lambda e: e.kind == WRITE),
        "F": m(lambda e: e.kind == FENCE),
        "C": m(lambda e: e.kind == CALL),
        "L": m(lambda e: e.lock == "L"),
        "U": m(lambda e: e.lock == "U"),
        "Lt": m(lambda e: e.lock == "Lt"),
        "Ut": m(lambda e: e.lock == "Ut"),
    }
    env["M"] = env["R"] | env["W"]
    for t in TAGS:
        env[t] = m(lambda e, t=t: t in e.tags)
    for f in FENCE_FLAVORS:
        env[f.upper()] = m(lambda e, f=f: e.fence == f)
    env["id"] = ra.r_id(n)
    for r in BASE_RELATIONS:
        env[r] = x.rels[r]
    env["sloc"] = x.sloc
    return env


ENV_SETS = ("E", "R", "W", "F", "C", "L", "U", "Lt", "Ut", "M") + TAGS + tuple(f.upper() for f in FENCE_FLAVORS)
ENV_RELS = ("id",) + BASE_RELATIONS + ("sloc",)


def env_types() -> dict[str, str]:
    types = {s: ra.SET for s in ENV_SETS}
    types.update({r: ra.REL for r in ENV_RELS})
    return types


# ---------------------------------------------------------------------------
# derived relations (direct implementations; models re-derive them in the
# expression language, and the tests check that both agree)


def _fr_rows(x: Execution) -> tuple:
    n = x.n
    env = x.env()
    rf_inv = ra.r_inv(n, x.rels["rf"])
    co = x.rels["co"]
    out = []
    for i in range(n):
        if not (env["R"] >> i) & 1:
            out.append(0)
            continue
        cands = x.sloc[i] & env["W"]
        src = rf_inv[i]
        if src:
            w = src.bit_length() - 1
            cands &= co[w]  # strictly co-after the source; the source itself is excluded
        out.append(cands)
    return tuple(out)


def derive_fr(x: Execution) -> Rel:
    return Rel(x.n, _fr_rows(x))


def derive_com(x: Execution) -> Rel:
    return Rel(x.n, ra.r_union(ra.r_union(x.rels["rf"], x.rels["co"]), _fr_rows(x)))


def derive_ecom(x: Execution) -> Rel:
    com = derive_com(x).rows
    return Rel(x.n, ra.r_union(com, ra.r_seq(x.rels["co"], x.rels["rf"])))


def same_thread(x: Execution) -> tuple:
    po = x.rels["po"]
    return ra.r_star(ra.r_union(po, ra.r_inv(x.n, po)))


def restrict(r: Rel, mode: str, x: Execution) -> Rel:
    if mode == "external":
        return Rel(x.n, ra.r_diff(r.rows, same_thread(x)))
    if mode == "internal":
        return Rel(x.n, ra.r_inter(r.rows, same_thread(x)))
    if mode == "same_loc":
        return Rel(x.n, ra.r_inter(r.rows, x.sloc))
    raise ValueError(f"unknown restriction mode {mode!r}")


def derive_fences(x: Execution) -> dict[str, Rel]:
    n = x.n
    env = x.env()
    po = x.rels["po"]
    nonfence = env["E"] & ~env["F"]
    out = {}
    for f in FENCE_FLAVORS:
        fences = env[f.upper()]
        src = nonfence
        dst = nonfence
        if f == "dmbld":
            src = env["R"]
        elif f == "dmbst":
            src = dst = env["W"]
        rows = []
        for a in range(n):
            if not (src >> a) & 1:
                rows.append(0)
                continue
            acc = 0
            for fe in bits(po[a] & fences):
                acc |= po[fe]
            rows.append(acc & dst)
        out[f] = Rel(n, tuple(rows))
    return out


# ---------------------------------------------------------------------------
# well-formedness

RULES = ("po", "deps", "rmw", "rf", "co", "sloc", "stxn", "satxn", "locks", "events")


@dataclass
class WellformednessReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> list[str]:
        return sorted({v[0] for v in self.violations})

    def __bool__(self) -> bool:
        return self.ok


def validate_wellformed(x: Execution) -> WellformednessReport:
    rep = WellformednessReport()
    bad = rep.violations
    n = x.n
    env = x.env()
    po = x.rels["po"]
    R_, W_ = env["R"], env["W"]

    # (0) event invariants
    allowed_fences = ARCH_FENCES[x.arch]
    for i, e in enumerate(x.events):
        if "Acq" in e.tags and e.kind not in (READ, CALL):
            bad.append(("events", i, "Acq on a non-read"))
        if "Rel" in e.tags and e.kind not in (WRITE, CALL):
            bad.append(("events", i, "Rel on a non-write"))
        if "SC" in e.tags and "Ato" not in e.tags:
            bad.append(("events", i, "SC without Ato"))
        if e.kind == FENCE and e.fence not in allowed_fences:
            bad.append(("events", i, f"fence {e.fence} not available on {x.arch}"))
        if e.kind == CALL and e.lock not in LOCK_KINDS:
            bad.append(("events", i, f"unknown lock call {e.lock}"))
        if e.is_memory and e.loc is None:
            bad.append(("events", i, "memory event without a location"))

    # (1) po: union of per-thread strict total orders
    if not ra.is_irreflexive(po):
        bad.append(("po", [i for i in range(n) if (po[i] >> i) & 1], "po is reflexive"))
    if ra.r_diff(ra.r_seq(po, po), po) != (0,) * n:
        bad.append(("po", ra.rows_pairs(ra.r_diff(ra.r_seq(po, po), po)), "po is not transitive"))
    for th in threads_of(n, po):
        for a in th:
            for b in th:
                if a < b and not ((po[a] >> b) & 1 or (po[b] >> a) & 1):
                    bad.append(("po", (a, b), "events of one thread unordered"))

    # (2) dependencies
    is_power = x.arch == "POWER"
    rmw_range = ra.r_range(x.rels["rmw"])
    for dep in DEP_RELATIONS:
        d = x.rels[dep]
        if ra.r_diff(d, po) != (0,) * n:
            bad.append(("deps", dep, "dependency outside po"))
        src_ok = R_ | (rmw_range & W_ if (is_power and dep == "ctrl") else 0)
        if ra.r_domain(d) & ~src_ok:
            bad.append(("deps", dep, "dependency not originating at a read"))
        if dep == "addr" and ra.r_range(d) & ~(R_ | W_):
            bad.append(("deps", dep, "addr into a non-memory event"))
        if dep == "data" and ra.r_range(d) & ~W_:
            bad.append(("deps", dep, "data into a non-write"))
    ctrl = x.rels["ctrl"]
    if ra.r_diff(ra.r_seq(ctrl, po), ctrl) != (0,) * n:
        bad.append(("deps", "ctrl", "ctrl not closed under po"))

    # (3) rmw
    rmw = x.rels["rmw"]
    imm = rmw_span(x.arch, po, x.sloc)
    if ra.r_diff(rmw, imm) != (0,) * n:
        bad.append(("rmw", ra.rows_pairs(ra.r_diff(rmw, imm)), "rmw spans too much of po"))
    if ra.r_domain(rmw) & ~R_ or ra.r_range(rmw) & ~W_:
        bad.append(("rmw", None, "rmw must go from a read to a write"))
    if ra.r_diff(rmw, x.sloc) != (0,) * n:
        bad.append(("rmw", None, "rmw across locations"))
    for i in range(n):
        if bin(rmw[i]).count("1") > 1:
            bad.append(("rmw", i, "read in two rmw pairs"))
    if any(bin(c).count("1") > 1 for c in ra.r_inv(n, rmw)):
        bad.append(("rmw", None, "write in two rmw pairs"))

    # (4) rf
    rf = x.rels["rf"]
    if ra.r_domain(rf) & ~W_ or ra.r_range(rf) & ~R_:
        bad.append(("rf", None, "rf must go from writes to reads"))
    if ra.r_diff(rf, x.sloc) != (0,) * n:
        bad.append(("rf", None, "rf across locations"))
    for i, c in enumerate(ra.r_inv(n, rf)):
        if bin(c).count("1") > 1:
            bad.append(("rf", i, "read with several rf sources"))

    # (5) co
    co = x.rels["co"]
    if ra.r_domain(co) & ~W_ or ra.r_range(co) & ~W_:
        bad.append(("co", None, "co must relate writes"))
    if ra.r_diff(co, x.sloc) != (0,) * n:
        bad.append(("co", None, "co across locations"))
    if not ra.is_irreflexive(co) or ra.r_diff(ra.r_seq(co, co), co) != (0,) * n:
        bad.append(("co", None, "co is not a strict order"))
    for a in bits(W_):
        for b in bits(W_ & x.sloc[a]):
            if a < b and not ((co[a] >> b) & 1 or (co[b] >> a) & 1):
                bad.append(("co", (a, b), "same-location writes unordered"))

    # (6) sloc
    expected = loc_equivalence(x.events)
    if tuple(x.sloc) != expected:
        bad.append(("sloc", None, "sloc disagrees with event locations"))

    # (7) stxn
    for name in ("stxn", "satxn", "scr", "scrt"):
        t = x.rels[name]
        rule = "stxn" if name in ("stxn", "satxn") else "locks"
        if ra.r_inv(n, t) != t or ra.r_diff(ra.r_seq(t, t), t) != (0,) * n:
            bad.append((rule, name, f"{name} is not a partial equivalence relation"))
            continue
        for cls in ra.per_classes(t):
            members = list(bits(cls))
            sthd = same_thread(x)
            if any(not (sthd[members[0]] >> b) & 1 for b in members):
                bad.append((rule, members, f"{name} class spans threads"))
                continue
            between = 0
            for a in members:
                for c in members:
                    if (po[a] >> c) & 1:
                        between |= po[a] & ra.r_inv(n, po)[c]
            if between & ~cls:
                bad.append((rule, members, f"{name} class is not po-contiguous"))

    # (8) satxn
    satxn, stxn = x.rels["satxn"], x.rels["stxn"]
    if ra.r_diff(satxn, stxn) != (0,) * n or ra.r_diff(ra.r_seq(satxn, stxn), satxn) != (0,) * n:
        bad.append(("satxn", None, "satxn must be a union of whole stxn classes"))

    # (9) lock calls
    for th in threads_of(n, po):
        pending = None
        for e in th:
            ev = x.events[e]
            if ev.kind != CALL:
                continue
            if ev.lock in ("L", "Lt"):
                if pending is not None:
                    bad.append(("locks", e, "lock call while a region is open"))
                pending = ev.lock
            else:
                want = "U" if pending == "L" else "Ut" if pending == "Lt" else None
                if ev.lock != want:
                    bad.append(("locks", e, f"{ev.lock} does not close the open region"))
                pending = None
        if pending is not None:
            bad.append(("locks", th[-1], "critical region never closed"))
    if any(e.kind == CALL for e in x.events):
        scr, scrt = derive_critical_regions(x.events, po)
        if (scr, scrt) != (x.rels["scr"], x.rels["scrt"]):
            bad.append(("locks", None, "scr/scrt disagree with the lock calls"))
    elif any(x.rels["scr"]) or any(x.rels["scrt"]):
        bad.append(("locks", None, "scr/scrt without lock calls"))
    return rep


# Exclusive pairs (Power, ARMv8) may enclose accesses to other locations and
# fences; single-instruction RMWs (x86, C++) are po-adjacent.
EXCLUSIVE_ARCHES = ("POWER", "ARMV8")


def rmw_span(arch: str, po, sloc) -> tuple:
    """Pairs an rmw edge may connect: po-immediate, or po_loc-immediate for
    exclusive-pair architectures."""
    if arch in EXCLUSIVE_ARCHES:
        po_loc = ra.r_inter(po, sloc)
        return ra.r_diff(po_loc, ra.r_seq(po_loc, po_loc))
    return ra.r_diff(po, ra.r_seq(po, po))


def is_wellformed(x: Execution) -> bool:
    return validate_wellformed(x).ok


# ---------------------------------------------------------------------------
# text format
#
#   arch X86
#   event a W x           # kind, location, then tags
#   event b R x Acq
#   event c F mfence
#   event d C L           # lock call
#   thread a b            # po chain
#   rf a -> b
#   co a -> c
#   txn a b               # one stxn class
#   atxn a b              # one satxn class (must also be a txn)
#   addr a -> b / ctrl / data / rmw
#   expect: ...           # free-form annotation kept on the side


_DEP_KEYWORDS = ("addr", "ctrl", "data", "rmw", "rf", "co")


def serialize(x: Execution, expect: str | None = None) -> str:
    nm = x.names
    vals = x.values()
    lines = [f"arch {x.arch}"]
    for i, e in enumerate(x.events):
        parts = ["event", nm[i], e.kind]
        if e.kind == FENCE:
            parts.append(e.fence)
        elif e.kind == CALL:
            parts.append(e.lock)
            if e.loc:
                parts.append(e.loc)
        else:
            parts.append(e.loc)
            parts.append(f"={vals[i]}")
        parts.extend(sorted(e.tags))
        lines.append(" ".join(parts))
    for th in x.threads():
        lines.append("thread " + " ".join(nm[e] for e in th))
    for r in _DEP_KEYWORDS:
        rows = x.rels[r]
        if r == "co":
            rows = ra.r_diff(rows, ra.r_seq(rows, rows))  # immediate edges suffice
        for a, b in ra.rows_pairs(rows):
            lines.append(f"{r} {nm[a]} -> {nm[b]}")
    for kw, rel in (("txn", "stxn"), ("atxn", "satxn")):
        for cls in x.txn_classes(rel):
            lines.append(f"{kw} " + " ".join(nm[e] for e in cls))
    if expect:
        for ln in expect.splitlines():
            lines.append(f"expect: {ln}")
    return "\n".join(lines) + "\n"


@dataclass
class ParsedExecution:
    execution: Execution
    expects: list[str]


_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def deserialize(text: str, with_expect: bool = False):
    """Parse the text format.  Returns the execution, or a ParsedExecution
    carrying ``expect:`` annotations when ``with_expect`` is set."""
    arch = None
    names: list[str] = []
    events: list[Event] = []
    declared_vals: dict[int, tuple[int, int, int]] = {}
    index: dict[str, int] = {}
    threads: list[list[int]] = []
    pairs: dict[str, list] = {k: [] for k in _DEP_KEYWORDS}
    classes: dict[str, list] = {"txn": [], "atxn": []}
    expects: list[str] = []

    def ref(tok: str, lineno: int, col: int) -> int:
        if tok not in index:
            raise ParseError(f"unknown event {tok!r}", lineno, col)
        return index[tok]

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, 1):
        stripped = raw.strip()
        if stripped.startswith("expect:"):
            expects.append(stripped[len("expect:"):].strip())
            continue
        body = raw.split("#", 1)[0]
        toks = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        if not toks:
            continue
        kw, col = toks[0]
        args = toks[1:]
        if kw == "arch":
            if len(args) != 1 or args[0][0].upper() not in ARCHES:
                raise ParseError("expected 'arch' followed by one of " + ", ".join(ARCHES), lineno, col)
            arch = args[0][0].upper()
        elif kw == "event":
            if len(args) < 2:
                raise ParseError("event needs a name and a kind", lineno, col)
            (name, ncol), (kind, kcol) = args[0], args[1]
            if not _NAME.match(name) or name in index:
                raise ParseError(f"bad or duplicate event name {name!r}", lineno, ncol)
            rest = args[2:]
            try:
                if kind in (READ, WRITE):
                    if not rest:
                        raise ParseError("memory event needs a location", lineno, kcol)
                    loc = rest[0][0]
                    tags = []
                    for tok, tcol in rest[1:]:
                        if tok.startswith("="):
                            try:
                                declared_vals[len(events)] = (int(tok[1:]), lineno, tcol)
                            except ValueError:
                                raise ParseError(f"bad value {tok!r}", lineno, tcol) from None
                        elif tok in TAGS:
                            tags.append(tok)
                        else:
                            raise ParseError(f"unknown tag {tok!r}", lineno, tcol)
                    ev = Event(kind, loc, frozenset(tags))
                elif kind == FENCE:
                    if len(rest) != 1 or rest[0][0] not in FENCE_FLAVORS:
                        raise ParseError("fence needs exactly one known flavor", lineno, kcol)
                    ev = Event(FENCE, fence=rest[0][0])
                elif kind == CALL:
                    if not rest or rest[0][0] not in LOCK_KINDS:
                        raise ParseError("lock call needs one of " + ", ".join(LOCK_KINDS), lineno, kcol)
                    ev = Event(CALL, rest[1][0] if len(rest) > 1 else None, lock=rest[0][0])
                else:
                    raise ParseError(f"unknown event kind {kind!r}", lineno, kcol)
            except ValueError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(str(exc), lineno, kcol) from None
            index[name] = len(events)
            names.append(name)
            events.append(ev)
        elif kw == "thread":
            threads.append([ref(t, lineno, c) for t, c in args])
        elif kw in _DEP_KEYWORDS:
            if len(args) != 3 or args[1][0] != "->":
                raise ParseError(f"expected '{kw} <event> -> <event>'", lineno, col)
            pairs[kw].append((ref(args[0][0], lineno, args[0][1]), ref(args[2][0], lineno, args[2][1])))
        elif kw in classes:
            if not args:
                raise ParseError(f"{kw} needs at least one event", lineno, col)
            classes[kw].append([ref(t, lineno, c) for t, c in args])
        else:
            raise ParseError(f"unknown directive {kw!r}", lineno, col)
    if arch is None:
        raise ParseError("missing 'arch' line", len(lines) or 1, 1)
    if not events:
        raise ParseError("execution has no events", len(lines) or 1, 1)
    in_thread = {e for th in threads for e in th}
    for i in range(len(events)):
        if i not in in_thread:
            threads.append([i])  # a singleton thread
    try:
        x = Execution.build(arch, events, threads=threads, rf=pairs["rf"], co=pairs["co"],
                            stxn=classes["txn"], satxn=classes["atxn"], addr=pairs["addr"],
                            ctrl=pairs["ctrl"], data=pairs["data"], rmw=pairs["rmw"], names=names)
    except ValueError as exc:
        raise ParseError(str(exc), len(lines), 1) from None
    # co lines may list immediate edges only; close them
    co = ra.r_plus(x.rels["co"])
    # ctrl reaches every po-later event
    ctrl = ra.r_union(x.rels["ctrl"], ra.r_seq(x.rels["ctrl"], x.rels["po"]))
    x = x.replace(co=co, ctrl=ctrl)
    vals = x.values()
    for i, (v, lineno, col) in declared_vals.items():
        if vals[i] != v:
            raise ParseError(f"event {names[i]} declares value {v} but its rf/co give {vals[i]}", lineno, col)
    if with_expect:
        return ParsedExecution(x, expects)
    return x


def load(path) -> Execution:
    with open(path) as fh:
        return deserialize(fh.read())
