"""Bounded counterexample search for transformations between executions.

Each check looks for a pair ``X``/``Y`` related by a mapping ``pi`` from the
events of ``X`` to those of ``Y`` such that ``X`` is inconsistent under a
source model while ``Y`` is consistent under a target model.  Finding none
up to a bound is reported as such and never as a proof.

Three checks are provided:

* monotonicity: ``Y`` is ``X`` with more ``stxn`` edges (``pi`` is the identity);
* compilation: ``X`` is a C++ execution, ``Y`` its image under a hardware
  mapping that also preserves transactions;
* lock elision: ``X`` is an abstract execution with lock calls, ``Y`` the
  concrete execution in which calls become spinlock code or, when elided,
  a transaction that reads the lock.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

from . import relalg as ra
from .execution import (CALL, FENCE, READ, WRITE, Event, Execution, is_wellformed, po_from_threads,
                        validate_wellformed)
from .models import Model, get_model
from .relalg import bits
from .synth import Signature, canonical_key, cpp_events, enumerate_executions

ARCH_MODELS = {"X86": "x86-tm", "POWER": "power-tm", "ARMV8": "armv8-tm", "CPP": "cpp-tm"}


class UnsupportedArch(ValueError):
    pass


# ---------------------------------------------------------------------------
# pi as a relation between two event sets


@dataclass(frozen=True)
class Pi:
    """A relation from the ``nx`` events of X to the ``ny`` events of Y."""

    nx: int
    ny: int
    rows: tuple                   # per X event, mask of Y events

    @classmethod
    def from_pairs(cls, nx: int, ny: int, pairs: Iterable[tuple[int, int]]) -> "Pi":
        rows = [0] * nx
        for a, b in pairs:
            rows[a] |= 1 << b
        return cls(nx, ny, tuple(rows))

    @classmethod
    def identity(cls, n: int) -> "Pi":
        return cls(n, n, tuple(1 << i for i in range(n)))

    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.nx) for b in bits(self.rows[a])]

    def inverse_rows(self) -> tuple:
        inv = [0] * self.ny
        for a in range(self.nx):
            for b in bits(self.rows[a]):
                inv[b] |= 1 << a
        return tuple(inv)

    def image(self, xs: int) -> int:
        out = 0
        for a in bits(xs):
            out |= self.rows[a]
        return out

    def preimage(self, ys: int) -> int:
        inv = self.inverse_rows()
        out = 0
        for b in bits(ys):
            out |= inv[b]
        return out

    def to_y(self, rx: Sequence[int]) -> tuple:
        """``pi^-1 ; rx ; pi`` as a relation over Y."""
        inv = self.inverse_rows()
        return tuple(self.image(_seq_row(rx, inv[b])) for b in range(self.ny))

    def to_x(self, ry: Sequence[int]) -> tuple:
        """``pi ; ry ; pi^-1`` as a relation over X."""
        inv = self.inverse_rows()
        out = []
        for a in range(self.nx):
            ys = 0
            for b in bits(self.rows[a]):
                ys |= ry[b]
            xs = 0
            for b in bits(ys):
                xs |= inv[b]
            out.append(xs)
        return tuple(out)


def _seq_row(rel: Sequence[int], src: int) -> int:
    out = 0
    for i in bits(src):
        out |= rel[i]
    return out


# ---------------------------------------------------------------------------
# witnesses


@dataclass
class PiWitness:
    check: str
    x: Execution
    y: Execution
    pi: Pi
    source: Model
    target: Model
    x_verdict: str = ""
    y_verdict: str = ""
    detail: str = ""

    def __post_init__(self):
        self.x_verdict = self.x_verdict or str(self.source.check(self.x))
        self.y_verdict = self.y_verdict or str(self.target.check(self.y))

    def problems(self) -> list[str]:
        """Clause violations found by an independent re-check (empty when valid)."""
        out = []
        for side, ex in (("X", self.x), ("Y", self.y)):
            rep = validate_wellformed(ex)
            if not rep.ok:
                out.append(f"{side} ill-formed: {rep.violations[0]}")
        if self.source.is_consistent(self.x):
            out.append("X is consistent under the source model")
        if not self.target.is_consistent(self.y):
            out.append("Y is inconsistent under the target model")
        clauses = {"monotonicity": monotonicity_clauses, "compilation": compilation_clauses,
                   "lock-elision": lock_elision_clauses}[self.check]
        out += clauses(self.x, self.y, self.pi)
        return out

    def validate(self) -> bool:
        return not self.problems()

    def summary(self) -> str:
        return (f"{self.check} witness ({self.detail}): X[{self.x.n} events] {self.x_verdict}; "
                f"Y[{self.y.n} events] {self.y_verdict}")


@dataclass
class SearchResult:
    check: str
    bound: int
    witness: PiWitness | None
    searched: int
    seconds: float
    witnesses: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.witness is not None

    def __str__(self) -> str:
        if self.witness is None:
            return f"{self.check}: none up to bound {self.bound} ({self.searched} sources, {self.seconds:.1f}s)"
        return f"{self.check}: counterexample at bound {self.bound}: {self.witness.summary()}"


def _same_rel(a: Sequence[int], b: Sequence[int]) -> bool:
    return tuple(a) == tuple(b)


# ---------------------------------------------------------------------------
# monotonicity

MONO_VARIANTS = ("any", "introduction", "enlargement", "coalescing")


def _neighbours(x: Execution, e: int) -> list[int]:
    """The po-immediate neighbours of ``e`` in its thread."""
    for th in x.threads():
        if e in th:
            i = th.index(e)
            return [th[j] for j in (i - 1, i + 1) if 0 <= j < len(th)]
    return []


def stxn_additions(x: Execution, variant: str = "any") -> Iterator[tuple[str, Execution]]:
    """Executions with one more transactional step than ``x``.

    ``introduction`` puts one untransactional event in a new singleton
    transaction, ``enlargement`` absorbs an adjacent untransactional event into
    a transaction, and ``coalescing`` merges two po-adjacent transactions.
    Sequences of introductions and coalescings reach every stxn superset.
    """
    stxn = x.rels["stxn"]
    classes = [c for c in ra.per_classes(stxn)]
    satxn = x.rels["satxn"]

    def with_classes(new_classes):
        rows = ra.per_from_classes(x.n, [list(bits(c)) for c in new_classes])
        return x.replace(stxn=rows, satxn=satxn)

    if variant in ("any", "introduction"):
        for e in range(x.n):
            if not stxn[e]:
                yield "introduction", with_classes(classes + [1 << e])
    if variant in ("any", "enlargement"):
        for ci, c in enumerate(classes):
            for m in bits(c):
                for nb in _neighbours(x, m):
                    if not stxn[nb]:
                        rest = classes[:ci] + [c | (1 << nb)] + classes[ci + 1:]
                        yield "enlargement", with_classes(rest)
    if variant in ("any", "coalescing"):
        for i, j in itertools.combinations(range(len(classes)), 2):
            ci, cj = classes[i], classes[j]
            if any(nb in bits(cj) for m in bits(ci) for nb in _neighbours(x, m)):
                rest = [c for k, c in enumerate(classes) if k not in (i, j)] + [ci | cj]
                yield "coalescing", with_classes(rest)


def monotonicity_clauses(x: Execution, y: Execution, pi: Pi) -> list[str]:
    out = []
    if x.n != y.n or pi != Pi.identity(x.n):
        out.append("pi is not the identity")
        return out
    if x.events != y.events:
        out.append("events differ")
    for name in x.rels:
        if name == "stxn":
            if any(a & ~b for a, b in zip(x.rels[name], y.rels[name])):
                out.append("stxn_X is not contained in stxn_Y")
        elif name != "satxn" and not _same_rel(x.rels[name], y.rels[name]):
            out.append(f"{name} differs")
    if _same_rel(x.rels["stxn"], y.rels["stxn"]):
        out.append("Y adds no stxn edges")
    return out


def check_monotonicity(m: Model | str, bound: int, variant: str = "any", sig: Signature | None = None,
                       all_witnesses: bool = False) -> SearchResult:
    """Search for ``X`` inconsistent and ``Y`` consistent where ``Y`` only adds
    ``stxn`` edges to ``X``."""
    m = get_model(m) if isinstance(m, str) else m
    if variant not in MONO_VARIANTS:
        raise ValueError(f"variant must be one of {MONO_VARIANTS}")
    arch = m.arch if m.arch != "SC" else "TSC"
    sig = sig or Signature(arch, bound, edge_fences=False)
    start = time.perf_counter()
    found, n = [], 0
    for x in enumerate_executions(sig):
        n += 1
        if m.is_consistent(x):
            continue
        for kind, y in stxn_additions(x, variant):
            if is_wellformed(y) and m.is_consistent(y):
                w = PiWitness("monotonicity", x, y, Pi.identity(x.n), m, m, detail=kind)
                found.append(w)
                if not all_witnesses:
                    return SearchResult("monotonicity", bound, w, n, time.perf_counter() - start, found)
    first = found[0] if found else None
    return SearchResult("monotonicity", bound, first, n, time.perf_counter() - start, found)


# ---------------------------------------------------------------------------
# compilation C++ -> hardware


def _mode(e: Event) -> str:
    t = e.tags
    if "SC" in t:
        return "sc"
    if "Acq" in t:
        return "acq"
    if "Rel" in t:
        return "rel"
    return "rlx" if "Ato" in t else "na"


@dataclass(frozen=True)
class _Piece:
    events: tuple                 # target events
    anchor: tuple                 # index of the image of each source event within ``events``
    rmw: tuple = ()               # local (read, write) rmw pairs
    ctrl_from: tuple = ()         # local indices whose ctrl reaches everything after them
    ctrl_to: int | None = None    # first local index such a ctrl edge must reach


def _compile_access(arch: str, src: Sequence[Event]) -> _Piece:
    """Target code for one access, or for an rmw pair given as ``(R, W)``."""
    if len(src) == 2:
        r, w = src
        mr, mw = _mode(r), _mode(w)
        if arch == "X86":
            return _Piece((Event(READ, r.loc), Event(WRITE, w.loc)), (0, 1), rmw=((0, 1),))
        if arch == "ARMV8":
            rt = frozenset({"Acq"}) if mr in ("acq", "sc") else frozenset()
            wt = frozenset({"Rel"}) if mw in ("rel", "sc") else frozenset()
            return _Piece((Event(READ, r.loc, rt), Event(WRITE, w.loc, wt)), (0, 1), rmw=((0, 1),))
        pre = ()
        if "sc" in (mr, mw):
            pre = (Event(FENCE, fence="sync"),)
        elif mw == "rel":
            pre = (Event(FENCE, fence="lwsync"),)
        k = len(pre)
        evs = pre + (Event(READ, r.loc), Event(WRITE, w.loc))
        if mr in ("acq", "sc"):
            evs += (Event(FENCE, fence="isync"),)
            return _Piece(evs, (k, k + 1), rmw=((k, k + 1),), ctrl_from=(k,), ctrl_to=k + 2)
        return _Piece(evs, (k, k + 1), rmw=((k, k + 1),))
    (e,) = src
    mode = _mode(e)
    if arch == "X86":
        if e.kind == WRITE and mode == "sc":
            return _Piece((Event(WRITE, e.loc), Event(FENCE, fence="mfence")), (0,))
        return _Piece((Event(e.kind, e.loc),), (0,))
    if arch == "ARMV8":
        if e.kind == READ and mode in ("acq", "sc"):
            return _Piece((Event(READ, e.loc, frozenset({"Acq"})),), (0,))
        if e.kind == WRITE and mode in ("rel", "sc"):
            return _Piece((Event(WRITE, e.loc, frozenset({"Rel"})),), (0,))
        return _Piece((Event(e.kind, e.loc),), (0,))
    # Power, leading-sync convention
    if e.kind == READ:
        if mode == "sc":
            return _Piece((Event(FENCE, fence="sync"), Event(READ, e.loc), Event(FENCE, fence="isync")), (1,),
                          ctrl_from=(1,), ctrl_to=2)
        if mode == "acq":
            return _Piece((Event(READ, e.loc), Event(FENCE, fence="isync")), (0,), ctrl_from=(0,), ctrl_to=1)
        return _Piece((Event(READ, e.loc),), (0,))
    if mode == "sc":
        return _Piece((Event(FENCE, fence="sync"), Event(WRITE, e.loc)), (1,))
    if mode == "rel":
        return _Piece((Event(FENCE, fence="lwsync"), Event(WRITE, e.loc)), (1,))
    return _Piece((Event(WRITE, e.loc),), (0,))


def compile_execution(x: Execution, arch: str) -> tuple[Execution, Pi]:
    """Image of a C++ execution under the standard mapping to ``arch``.

    Memory events map to one access each (an rmw pair to a hardware rmw);
    fences and ``isync``+ctrl sequences are inserted per access mode.  All
    target events of a transactional source event join its transaction.
    """
    if arch not in ("X86", "POWER", "ARMV8"):
        raise UnsupportedArch(arch)
    rmw_w = {b: a for a, b in ra.rows_pairs(x.rels["rmw"])}
    rmw_r = {a: b for a, b in ra.rows_pairs(x.rels["rmw"])}
    events: list[Event] = []
    threads: list[list[int]] = []
    pi_pairs: list[tuple[int, int]] = []
    rmw: list[tuple[int, int]] = []
    ctrl: list[tuple[int, int]] = []
    owner: list[int] = []         # source event owning each target event
    for th in x.threads():
        ids: list[int] = []
        pending_ctrl: list[int] = []
        for e in th:
            if e in rmw_w:
                continue
            src = (x.events[e], x.events[rmw_r[e]]) if e in rmw_r else (x.events[e],)
            srcs = (e, rmw_r[e]) if e in rmw_r else (e,)
            piece = _compile_access(arch, src)
            base = len(events)
            for k, ev in enumerate(piece.events):
                events.append(ev)
                ids.append(base + k)
                owner.append(srcs[0] if k not in piece.anchor[1:] else srcs[piece.anchor.index(k)])
            for s, k in zip(srcs, piece.anchor):
                pi_pairs.append((s, base + k))
            for a, b in piece.rmw:
                rmw.append((base + a, base + b))
            for c in pending_ctrl:
                ctrl.extend((c, base + k) for k in range(len(piece.events)))
            for c in piece.ctrl_from:
                pending_ctrl.append(base + c)
                ctrl.extend((base + c, base + k) for k in range(piece.ctrl_to, len(piece.events)))
        threads.append(ids)
    pi = Pi.from_pairs(x.n, len(events), pi_pairs)
    n = len(events)
    po = po_from_threads(n, threads)
    stxn_src = x.rels["stxn"]
    stxn = [0] * n
    satxn = [0] * n
    for i in range(n):
        for j in range(n):
            if (stxn_src[owner[i]] >> owner[j]) & 1:
                stxn[i] |= 1 << j
            if (x.rels["satxn"][owner[i]] >> owner[j]) & 1:
                satxn[i] |= 1 << j
    rels = {
        "po": po,
        "rf": pi.to_y(x.rels["rf"]),
        "co": pi.to_y(x.rels["co"]),
        "rmw": ra.rows_from_pairs(n, rmw),
        "ctrl": ra.rows_from_pairs(n, ctrl),
        "addr": pi.to_y(x.rels["addr"]),
        "data": pi.to_y(x.rels["data"]),
        "stxn": tuple(stxn),
        "satxn": tuple(satxn),
    }
    return Execution(arch, events, rels), pi


def compilation_clauses(x: Execution, y: Execution, pi: Pi) -> list[str]:
    out = []
    inv = pi.inverse_rows()
    mapped = pi.image(ra.full_mask(x.n))
    for a in range(x.n):
        if x.events[a].is_memory and bin(pi.rows[a]).count("1") != 1:
            out.append(f"source event {x.names[a]} is not mapped to exactly one access")
    for b in range(y.n):
        if bin(inv[b]).count("1") > 1:
            out.append(f"target event {b} has several sources")
    for name in ("rf", "co"):
        if tuple(pi.to_y(x.rels[name])) != tuple(y.rels[name]):
            out.append(f"{name}_Y differs from pi^-1;{name}_X;pi")
    # stxn_Y = pi^-1 ; stxn_X ; pi, on the memory images
    want = pi.to_y(x.rels["stxn"])
    got = tuple(r & mapped for r in y.rels["stxn"])
    got = tuple(got[b] if (mapped >> b) & 1 else 0 for b in range(y.n))
    if got != want:
        out.append("stxn_Y differs from pi^-1;stxn_X;pi")
    po_img = pi.to_y(x.rels["po"])
    if any(a & ~b for a, b in zip(po_img, y.rels["po"])):
        out.append("pi does not preserve po")
    for a in range(x.n):
        for b in bits(pi.rows[a]):
            ex, ey = x.events[a], y.events[b]
            if ex.kind != ey.kind or ex.loc != ey.loc:
                out.append(f"{x.names[a]} maps to an event of another kind or location")
    return out


def check_compilation(target: str, bound: int, sig: Signature | None = None, source: Model | str = "cpp-tm",
                      target_model: Model | str | None = None, all_witnesses: bool = False) -> SearchResult:
    """Search for a race-free C++ execution ``X`` that the source model forbids
    while its compiled image is allowed by the hardware TM model."""
    src = get_model(source) if isinstance(source, str) else source
    tgt = target_model or ARCH_MODELS[target]
    tgt = get_model(tgt) if isinstance(tgt, str) else tgt
    sig = sig or Signature("CPP", bound, atomic_txns="none")
    start = time.perf_counter()
    found, n = [], 0
    for x in enumerate_executions(sig):
        n += 1
        if src.is_consistent(x) or not src.is_race_free(x):
            continue
        y, pi = compile_execution(x, target)
        if is_wellformed(y) and tgt.is_consistent(y):
            w = PiWitness("compilation", x, y, pi, src, tgt, detail=f"CPP->{target}")
            found.append(w)
            if not all_witnesses:
                break
    first = found[0] if found else None
    return SearchResult(f"compilation CPP->{target}", bound, first, n, time.perf_counter() - start, found)


# ---------------------------------------------------------------------------
# lock elision

LOCK_LOC = "m"


def _lock_code(arch: str, fixed: bool) -> dict:
    """Target events per lock call kind, with local rmw and ctrl pairs."""
    R, W = Event(READ, LOCK_LOC), Event(WRITE, LOCK_LOC)
    if arch == "X86":
        L = _Piece((R, R, W), (0,), rmw=((1, 2),), ctrl_from=(0,), ctrl_to=1)
        U = _Piece((W,), (0,))
    elif arch == "POWER":
        L = _Piece((R, W, Event(FENCE, fence="isync")), (0,), rmw=((0, 1),), ctrl_from=(0, 1), ctrl_to=1)
        U = _Piece((Event(FENCE, fence="sync"), W), (0,))
    elif arch == "ARMV8":
        evs = (Event(READ, LOCK_LOC, frozenset({"Acq"})), W)
        if fixed:
            evs += (Event(FENCE, fence="dmb"),)
        L = _Piece(evs, (0,), rmw=((0, 1),), ctrl_from=(0,), ctrl_to=1)
        U = _Piece((Event(WRITE, LOCK_LOC, frozenset({"Rel"})),), (0,))
    else:
        raise UnsupportedArch(arch)
    return {"L": L, "U": U, "Lt": _Piece((R,), (0,)), "Ut": _Piece((), ())}


def lock_costs(arch: str, fixed: bool = False) -> dict:
    return {k: len(p.events) for k, p in _lock_code(arch, fixed).items()}


@dataclass
class _Skeleton:
    events: list
    threads: list
    pi: list                      # per X event, list of Y event ids
    introduced: int               # mask of Y events introduced for lock calls
    rmw: list
    ctrl: list
    stxn: list
    lock_reads: list              # (Y read, kind of call) for introduced reads
    lock_writes: list             # (Y write, kind of call)


def _lock_skeleton(x: Execution, arch: str, fixed: bool) -> _Skeleton:
    code = _lock_code(arch, fixed)
    sk = _Skeleton([], [], [[] for _ in range(x.n)], 0, [], [], [], [], [])
    for th in x.threads():
        ids: list[int] = []
        pending: list[int] = []
        txn: list[int] | None = None
        for e in th:
            ev = x.events[e]
            if ev.kind == CALL:
                piece = code[ev.lock]
                local = piece.events
            else:
                piece = None
                local = (ev,)
            base = len(sk.events)
            for k, te in enumerate(local):
                sk.events.append(te)
                ids.append(base + k)
                sk.pi[e].append(base + k)
                if piece is not None:
                    sk.introduced |= 1 << (base + k)
                    if te.kind == READ:
                        sk.lock_reads.append((base + k, ev.lock))
                    elif te.kind == WRITE:
                        sk.lock_writes.append((base + k, ev.lock))
                for c in pending:
                    sk.ctrl.append((c, base + k))
            if ev.kind == CALL and ev.lock == "Lt":
                txn = []
            if txn is not None:
                txn.extend(range(base, base + len(local)))
            if ev.kind == CALL and ev.lock == "Ut":
                if txn:
                    sk.stxn.append(txn)
                txn = None
            if piece is not None:
                for a, b in piece.rmw:
                    sk.rmw.append((base + a, base + b))
                for c in piece.ctrl_from:
                    sk.ctrl.extend((base + c, base + k) for k in range(piece.ctrl_to, len(local)))
                    pending.append(base + c)
        sk.threads.append(ids)
    return sk


def map_lock_execution(x: Execution, arch: str, fixed: bool = False) -> tuple[list, Pi, _Skeleton]:
    """All concrete executions for abstract ``x``: one per choice of ``rf``/``co``
    on the lock variable in which every introduced read sees the lock free
    (it reads the initial value or an unlock's write)."""
    sk = _lock_skeleton(x, arch, fixed)
    n = len(sk.events)
    pi = Pi.from_pairs(x.n, n, [(a, b) for a in range(x.n) for b in sk.pi[a]])
    base = {
        "po": po_from_threads(n, sk.threads),
        "rf": pi.to_y(x.rels["rf"]),
        "co": pi.to_y(x.rels["co"]),
        "addr": pi.to_y(x.rels["addr"]),
        "data": pi.to_y(x.rels["data"]),
        "ctrl": tuple(a | b for a, b in zip(pi.to_y(x.rels["ctrl"]), ra.rows_from_pairs(n, sk.ctrl))),
        "rmw": tuple(a | b for a, b in zip(pi.to_y(x.rels["rmw"]), ra.rows_from_pairs(n, sk.rmw))),
        "stxn": ra.per_from_classes(n, sk.stxn),
    }
    free_writes = [w for w, kind in sk.lock_writes if kind == "U"]
    writes = [w for w, _ in sk.lock_writes]
    out = []
    rf_opts = [[None] + free_writes for _ in sk.lock_reads]
    for rf_choice in itertools.product(*rf_opts):
        rf_extra = [(w, r) for w, (r, _) in zip(rf_choice, sk.lock_reads) if w is not None]
        rf = list(base["rf"])
        for w, r in rf_extra:
            rf[w] |= 1 << r
        for order in itertools.permutations(writes):
            co = list(base["co"])
            for i, a in enumerate(order):
                for b in order[i + 1:]:
                    co[a] |= 1 << b
            rels = dict(base, rf=tuple(rf), co=tuple(co))
            y = Execution(arch, sk.events, rels)
            out.append(y)
    return out, pi, sk


def lock_elision_clauses(x: Execution, y: Execution, pi: Pi) -> list[str]:
    out = []
    calls = x.mask(lambda e: e.kind == CALL)
    I = pi.image(calls)
    inv = pi.inverse_rows()
    n = y.n
    full = ra.full_mask(n)
    # LockVar: sloc_Y = I^2 u ((~I)^2 n pi^-1;sloc_X;pi)
    via = pi.to_y(x.sloc)
    mem = y.mask(lambda e: e.is_memory)
    want = []
    for b in range(n):
        if not (mem >> b) & 1:
            want.append(0)
        elif (I >> b) & 1:
            want.append(I & mem)
        else:
            want.append(via[b] & ~I & mem)
    want = tuple(want)
    if tuple(y.sloc) != want:
        out.append("LockVar: introduced accesses do not exactly share one fresh location")
    # TxnIntro: scr^t restricted to non-Ut events = pi;stxn_Y;pi^-1
    ut = x.mask(lambda e: e.lock == "Ut")
    scrt = tuple(r & ~ut if not (ut >> a) & 1 else 0 for a, r in enumerate(x.rels["scrt"]))
    if scrt != pi.to_x(y.rels["stxn"]):
        out.append("TxnIntro: elided regions and transactions disagree")
    # TxnReadsLockFree: [L];pi;rf;pi^-1;[Lt] empty
    L = x.mask(lambda e: e.lock == "L")
    Lt = x.mask(lambda e: e.lock == "Lt")
    rf_x = pi.to_x(y.rels["rf"])
    if any(rf_x[a] & Lt for a in bits(L)):
        out.append("TxnReadsLockFree: an elided lock reads a value written by a lock acquisition")
    # structure outside lock calls is preserved
    nonI = full & ~I
    for name in ("rf", "co", "addr", "data"):
        got = tuple(y.rels[name][b] & nonI if (nonI >> b) & 1 else 0 for b in range(n))
        if got != tuple(pi.to_y(x.rels[name])):
            out.append(f"{name} of non-lock events is not preserved")
    po_img = pi.to_y(x.rels["po"])
    if any(a & ~b for a, b in zip(po_img, y.rels["po"])):
        out.append("pi does not preserve po")
    for a in range(x.n):
        if x.events[a].kind != CALL:
            if bin(pi.rows[a]).count("1") != 1:
                out.append(f"{x.names[a]} is not mapped to exactly one event")
                continue
            b = next(bits(pi.rows[a]))
            if x.events[a] != y.events[b]:
                out.append(f"{x.names[a]} changes under pi")
        elif x.events[a].lock == "Ut" and pi.rows[a]:
            out.append("Ut events must vanish")
    return out


def _cr_layouts(lengths: Sequence[int], crs: int) -> Iterator[list[list[tuple[int, int]]]]:
    """Ways to place ``crs`` non-empty, non-overlapping regions over threads."""
    spans_per_thread = []
    for L in lengths:
        spans = [(i, j) for i in range(L) for j in range(i + 1, L + 1)]
        opts = [[]]
        for k in range(1, L + 1):
            for combo in itertools.combinations(spans, k):
                ok = all(a[1] <= b[0] for a, b in zip(combo, combo[1:]))
                if ok:
                    opts.append(list(combo))
        spans_per_thread.append(opts)
    for choice in itertools.product(*spans_per_thread):
        if sum(len(c) for c in choice) >= crs:
            yield list(choice)


def abstract_executions(arch: str, bound: int, fixed: bool = False, min_crs: int = 2,
                        fences: bool = False, deps: bool | None = None, mixed: bool = True,
                        annotations: bool = False) -> Iterator[Execution]:
    """Abstract lock executions whose concrete image has at most ``bound`` events.

    Memory skeletons come from the ordinary enumerator (without transactions);
    critical regions are then laid over contiguous, non-empty po-segments and
    each region is either a plain (L/U) or an elided (Lt/Ut) one.  With
    ``mixed`` at least one region of each kind is required.  Fences and
    annotated accesses (acquire/release) are left out unless asked for.
    """
    cost = lock_costs(arch, fixed)
    cheapest = cost["Lt"] + cost["Ut"]
    plain = cost["L"] + cost["U"]
    floor = plain + cheapest + (min_crs - 2) * cheapest if mixed else min_crs * cheapest
    max_mem = bound - floor
    if max_mem < 1:
        return
    seen: set = set()
    events = tuple(e for e in Signature(arch, 1).alphabet()
                   if (fences or e.kind != FENCE) and (annotations or e.kind == FENCE or not e.tags))
    sig = Signature(arch, max_mem, transactions=False, events=events, deps=deps, edge_fences=False)
    for mem in enumerate_executions(sig):
        budget = bound - mem.n
        threads = mem.threads()
        lengths = [len(t) for t in threads]
        for layout in _cr_layouts(lengths, min_crs):
            regions = [(t, span) for t, spans in enumerate(layout) for span in spans]
            if len(regions) < min_crs:
                continue
            for modes in itertools.product(("plain", "elided"), repeat=len(regions)):
                if mixed and len(set(modes)) < 2:
                    continue
                spent = sum(plain if mo == "plain" else cheapest for mo in modes)
                if spent > budget:
                    continue
                x = _insert_calls(mem, threads, regions, modes)
                key = canonical_key(x)
                if key in seen:
                    continue
                seen.add(key)
                yield x


def _insert_calls(mem: Execution, threads, regions, modes) -> Execution:
    opens: dict[tuple[int, int], str] = {}
    closes: dict[tuple[int, int], str] = {}
    for (t, (i, j)), mo in zip(regions, modes):
        opens[(t, i)] = "L" if mo == "plain" else "Lt"
        closes[(t, j - 1)] = "U" if mo == "plain" else "Ut"
    events: list[Event] = []
    new_threads: list[list[int]] = []
    old_to_new: dict[int, int] = {}
    for t, th in enumerate(threads):
        ids = []
        for k, e in enumerate(th):
            if (t, k) in opens:
                ids.append(len(events))
                events.append(Event(CALL, LOCK_LOC, lock=opens[(t, k)]))
            old_to_new[e] = len(events)
            ids.append(len(events))
            events.append(mem.events[e])
            if (t, k) in closes:
                ids.append(len(events))
                events.append(Event(CALL, LOCK_LOC, lock=closes[(t, k)]))
        new_threads.append(ids)

    def remap(name):
        return [(old_to_new[a], old_to_new[b]) for a, b in ra.rows_pairs(mem.rels[name])]

    x = Execution.build(mem.arch, events, new_threads, rf=remap("rf"), co=remap("co"), addr=remap("addr"),
                        ctrl=remap("ctrl"), data=remap("data"), rmw=remap("rmw"))
    # ctrl stays po-closed across the inserted calls
    po = x.rels["po"]
    ctrl = tuple(_seq_row(po, r) | r for r in x.rels["ctrl"])
    return x.replace(ctrl=ctrl)


def check_lock_elision(arch: str, fixed: bool = False, bound: int = 7, all_witnesses: bool = False,
                       min_crs: int = 2, fences: bool = False, deps: bool | None = None,
                       mixed: bool = True, annotations: bool = False,
                       time_limit: float | None = None) -> SearchResult:
    """Search for an abstract execution ``X`` that the architecture's TM model
    with CROrder forbids, whose lock-elided concrete image ``Y`` the TM model
    allows.  ``bound`` limits the number of concrete events."""
    if arch not in ("X86", "POWER", "ARMV8"):
        raise UnsupportedArch(arch)
    if fixed and arch != "ARMV8":
        raise UnsupportedArch("only the ARMv8 lock has a fixed variant")
    tgt = get_model(ARCH_MODELS[arch])
    src = get_model(ARCH_MODELS[arch] + "+crorder")
    start = time.perf_counter()
    found, n = [], 0
    label = f"lock elision {arch}{' (fixed)' if fixed else ''}"
    for x in abstract_executions(arch, bound, fixed, min_crs, fences, deps, mixed, annotations):
        n += 1
        if time_limit is not None and time.perf_counter() - start > time_limit:
            label += " [time limit reached]"
            break
        if src.is_consistent(x):
            continue
        ys, pi, _ = map_lock_execution(x, arch, fixed)
        # the images differ only in rf/co on the lock, which are built
        # well-formed, so one check covers them all
        if not ys or ys[0].n > bound or not is_wellformed(ys[0]):
            continue
        for y in ys:
            if tgt.is_consistent(y):
                found.append(PiWitness("lock-elision", x, y, pi, src, tgt, detail=label))
                break
        if found and not all_witnesses:
            break
    first = found[0] if found else None
    return SearchResult(label, bound, first, n, time.perf_counter() - start, found)
