"""Litmus tests: a small DSL, candidate enumeration and evaluation.

Grammar (one instruction per line; ``#`` starts a comment)::

    arch X86
    name sample                     # optional
    init { x=0; y=1 }               # optional, locations default to 0
    thread 0 {
      txbegin [ok1] [atomic]        # fail handler zeroes the ok flag
      a: store x 1
      b: r0 = load x
      txend
    }
    thread 1 {
      c: store x 2
    }
    exists (ok=1 /\\ r0=2 /\\ x=2)

Instructions are ``rN = load[.mods] x``, ``store[.mods] x v``,
``rN = rmw[.mods] x v``, ``fence FLAVOR`` (or a bare flavor such as
``mfence``), ``lock(m) [@elide]``, ``unlock(m)``, ``txbegin`` and ``txend``.
Modifiers are ``acq``, ``rel``, ``acqrel``, ``sc``, ``rlx``, ``na`` and ``ex``
(exclusive: a ``store.ex`` pairs with the latest unpaired ``load.ex`` of the
same location in its thread, yielding an ``rmw`` edge).  Dependencies are
explicit annotations ``@addr(src)``, ``@data(src)``, ``@ctrl(src)`` where
``src`` is a register or an instruction label; ``ctrl`` extends to every
later instruction of the thread.

Threads may also be written in columns, one row per line::

    P0          | P1          ;
    store x 1   | store x 2   ;
    r0 = load x |             ;
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from . import relalg as ra
from .execution import (ARCH_FENCES, ARCHES, CALL, FENCE, READ, WRITE, Event, Execution, ParseError,
                        default_names, is_wellformed)
from .models import ArchError, Model

FENCE_ALIASES = {"dmb.ld": "dmbld", "dmb.st": "dmbst", "dmb.sy": "dmb", "dmbsy": "dmb"}
MODIFIERS = ("acq", "rel", "acqrel", "sc", "rlx", "na", "ex")


class UnsupportedInstruction(ParseError):
    """An instruction outside the DSL, or one the test's architecture lacks."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Instr:
    op: str                       # load store rmw fence lock unlock txbegin txend
    loc: str | None = None
    reg: str | None = None
    value: int | None = None
    mods: frozenset = frozenset()
    fence: str | None = None
    deps: tuple = ()              # ((kind, source), ...)
    label: str | None = None
    elide: bool = False
    atomic: bool = False
    ok: str | None = None
    line: int = 0


@dataclass(frozen=True)
class Atom:
    kind: str                     # reg, loc, ok
    name: str
    value: int
    thread: int | None = None
    negated: bool = False

    def __str__(self) -> str:
        lhs = f"{self.thread}:{self.name}" if self.thread is not None else self.name
        return f"{lhs}{'!=' if self.negated else '='}{self.value}"


@dataclass(frozen=True)
class Cond:
    op: str                       # and, or, not, atom, true
    args: tuple = ()

    def __str__(self) -> str:
        if self.op == "true":
            return "true"
        if self.op == "atom":
            return str(self.args[0])
        if self.op == "not":
            return f"~({self.args[0]})"
        sep = " /\\ " if self.op == "and" else " \\/ "
        return sep.join(f"({a})" if a.op in ("and", "or") and a.op != self.op else str(a) for a in self.args)

    def atoms(self) -> list[Atom]:
        if self.op == "atom":
            return [self.args[0]]
        return [a for c in self.args if isinstance(c, Cond) for a in c.atoms()]


TRUE = Cond("true")


@dataclass(frozen=True)
class LitmusTest:
    arch: str
    threads: tuple                # tuple of tuples of Instr
    post: Cond = TRUE
    init: Mapping[str, int] = field(default_factory=dict)
    name: str = ""
    warnings: tuple = ()

    @property
    def transactions(self) -> list[tuple[int, int, int, str, bool]]:
        """``(thread, begin index, end index, ok flag, atomic)`` in textual order."""
        out = []
        for t, th in enumerate(self.threads):
            begin = None
            for i, ins in enumerate(th):
                if ins.op == "txbegin":
                    begin = i
                elif ins.op == "txend":
                    b = th[begin]
                    out.append((t, begin, i, b.ok, b.atomic))
        return out

    @property
    def elidable(self) -> list[tuple[int, int, int]]:
        """``(thread, lock index, unlock index)`` of each ``@elide`` region."""
        out = []
        for t, th in enumerate(self.threads):
            start = None
            for i, ins in enumerate(th):
                if ins.op == "lock":
                    start = i
                elif ins.op == "unlock" and start is not None:
                    if th[start].elide:
                        out.append((t, start, i))
                    start = None
        return out

    def locations(self) -> list[str]:
        seen = dict.fromkeys(self.init)
        for th in self.threads:
            for ins in th:
                if ins.op in ("load", "store", "rmw"):
                    seen.setdefault(ins.loc)
        return list(seen)

    def to_text(self) -> str:
        lines = [f"arch {self.arch}"]
        if self.name:
            lines.append(f"name {self.name}")
        if self.init:
            lines.append("init { " + "; ".join(f"{k}={v}" for k, v in self.init.items()) + " }")
        for t, th in enumerate(self.threads):
            lines.append(f"thread {t} {{")
            depth = 1
            for ins in th:
                if ins.op == "txend":
                    depth -= 1
                lines.append("  " * depth + render_instr(ins))
                if ins.op == "txbegin":
                    depth += 1
            lines.append("}")
        lines.append(f"exists ({post_text(self)})")
        return "\n".join(lines) + "\n"


def _mods_text(mods) -> str:
    order = [m for m in MODIFIERS if m in mods]
    return "".join("." + m for m in order)


def render_instr(ins: Instr) -> str:
    lab = f"{ins.label}: " if ins.label else ""
    deps = "".join(f" @{k}({s})" for k, s in ins.deps)
    if ins.op == "load":
        body = f"{ins.reg} = load{_mods_text(ins.mods)} {ins.loc}"
    elif ins.op == "store":
        body = f"store{_mods_text(ins.mods)} {ins.loc} {ins.value}"
    elif ins.op == "rmw":
        body = f"{ins.reg} = rmw{_mods_text(ins.mods)} {ins.loc} {ins.value}"
    elif ins.op == "fence":
        body = f"fence {ins.fence}"
    elif ins.op == "lock":
        body = f"lock({ins.loc})" + (" @elide" if ins.elide else "")
    elif ins.op == "unlock":
        body = f"unlock({ins.loc})"
    elif ins.op == "txbegin":
        body = "txbegin" + (f" {ins.ok}" if ins.ok else "") + (" atomic" if ins.atomic else "")
    else:
        body = "txend"
    return lab + body + deps


# ---------------------------------------------------------------------------
# parsing

_NAME = r"[A-Za-z_][A-Za-z0-9_']*"
_LOAD = re.compile(rf"^({_NAME})\s*=\s*(load|rmw)((?:\.\w+)*)\s+({_NAME})(?:\s+(-?\d+))?$")
_STORE = re.compile(rf"^store((?:\.\w+)*)\s+({_NAME})\s+(-?\d+)$")
_LOCK = re.compile(rf"^(lock|unlock)\s*\(\s*({_NAME})\s*\)$")
_DEP = re.compile(rf"@(addr|data|ctrl)\(\s*({_NAME})\s*\)|@(elide)\b")


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].rstrip()


def _parse_instr(text: str, arch: str, lineno: int, col: int) -> Instr:
    label = None
    m = re.match(rf"^({_NAME})\s*:\s*(.*)$", text)
    if m:
        label, text = m.group(1), m.group(2)
        if not text:
            raise ParseError(f"label {label!r} has no instruction", lineno, col)
    deps, elide = [], False
    for d in _DEP.finditer(text):
        if d.group(3):
            elide = True
        else:
            deps.append((d.group(1), d.group(2)))
    body = _DEP.sub("", text).strip()
    if "@" in body:
        raise ParseError(f"unknown annotation in {text!r}", lineno, col + body.index("@"))
    fences = ARCH_FENCES[arch]

    def mods_of(s: str) -> frozenset:
        ms = frozenset(p for p in s.split(".") if p)
        bad = ms - set(MODIFIERS)
        if bad:
            raise UnsupportedInstruction(f"unknown modifier {sorted(bad)[0]!r}", lineno, col)
        return ms

    if m := _LOAD.match(body):
        reg, op, mods, loc, val = m.groups()
        if op == "rmw" and val is None:
            raise ParseError("rmw needs a value to store", lineno, col)
        if op == "load" and val is not None:
            raise ParseError("load takes no value", lineno, col)
        return Instr(op, loc=loc, reg=reg, value=int(val) if val else None, mods=mods_of(mods),
                     deps=tuple(deps), label=label, line=lineno)
    if m := _STORE.match(body):
        mods, loc, val = m.groups()
        return Instr("store", loc=loc, value=int(val), mods=mods_of(mods), deps=tuple(deps), label=label, line=lineno)
    if m := _LOCK.match(body):
        return Instr(m.group(1), loc=m.group(2), elide=elide, deps=tuple(deps), label=label, line=lineno)
    words = body.split()
    if not words:
        raise ParseError("empty instruction", lineno, col)
    if words[0] == "txbegin":
        rest = words[1:]
        atomic = "atomic" in rest
        rest = [w for w in rest if w != "atomic"]
        if len(rest) > 1:
            raise ParseError("txbegin takes at most an ok-flag name and 'atomic'", lineno, col)
        return Instr("txbegin", ok=rest[0] if rest else None, atomic=atomic, label=label, line=lineno)
    if words == ["txend"]:
        return Instr("txend", label=label, line=lineno)
    flavor = None
    if words[0] == "fence" and len(words) == 2:
        flavor = words[1]
    elif len(words) == 1:
        flavor = words[0]
    if flavor is not None:
        flavor = FENCE_ALIASES.get(flavor.lower(), flavor.lower())
        if flavor in fences:
            return Instr("fence", fence=flavor, deps=tuple(deps), label=label, line=lineno)
        if words[0] == "fence" or flavor in sum(ARCH_FENCES.values(), ()):
            raise UnsupportedInstruction(f"fence {flavor!r} is not available on {arch}", lineno, col)
    raise UnsupportedInstruction(f"unsupported instruction {body!r}", lineno, col)


def _split_cond(text: str, lineno: int, col0: int) -> Cond:
    toks = re.findall(r"/\\|\\/|∧|∨|!=|[()~=:]|-?\d+|[A-Za-z_][A-Za-z0-9_']*|\S", text)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take(want=None):
        nonlocal pos
        tok = peek()
        if tok is None or (want is not None and tok != want):
            raise ParseError(f"expected {want or 'token'} in condition, got {tok!r}", lineno, col0)
        pos += 1
        return tok

    def disj():
        parts = [conj()]
        while peek() in ("\\/", "∨"):
            take()
            parts.append(conj())
        return parts[0] if len(parts) == 1 else Cond("or", tuple(parts))

    def conj():
        parts = [unary()]
        while peek() in ("/\\", "∧"):
            take()
            parts.append(unary())
        return parts[0] if len(parts) == 1 else Cond("and", tuple(parts))

    def unary():
        tok = peek()
        if tok == "~":
            take()
            return Cond("not", (unary(),))
        if tok == "(":
            take()
            c = disj()
            take(")")
            return c
        if tok == "true":
            take()
            return TRUE
        first = take()
        thread = None
        if peek() == ":":
            take()
            if not first.isdigit():
                raise ParseError(f"thread id expected before ':', got {first!r}", lineno, col0)
            thread, first = int(first), take()
        op = take()
        if op not in ("=", "!="):
            raise ParseError(f"expected '=' in condition, got {op!r}", lineno, col0)
        val = take()
        if not re.fullmatch(r"-?\d+", val):
            raise ParseError(f"integer expected, got {val!r}", lineno, col0)
        return Cond("atom", (Atom("?", first, int(val), thread, op == "!="),))

    c = disj()
    if peek() is not None:
        raise ParseError(f"trailing tokens in condition: {' '.join(toks[pos:])}", lineno, col0)
    return c


def _resolve(c: Cond, test_threads, locs, oks, lineno) -> Cond:
    regs: dict[str, set[int]] = {}
    for t, th in enumerate(test_threads):
        for ins in th:
            if ins.reg:
                regs.setdefault(ins.reg, set()).add(t)

    def fix(a: Atom) -> Atom:
        if a.thread is not None:
            if a.name not in regs or a.thread not in regs[a.name]:
                raise ParseError(f"thread {a.thread} has no register {a.name!r}", lineno)
            return Atom("reg", a.name, a.value, a.thread, a.negated)
        kinds = []
        if a.name in locs:
            kinds.append("loc")
        if a.name in oks:
            kinds.append("ok")
        if a.name in regs:
            kinds.append("reg")
        if not kinds:
            raise ParseError(f"unknown name {a.name!r} in condition", lineno)
        if len(kinds) > 1:
            raise ParseError(f"ambiguous name {a.name!r} in condition", lineno)
        if kinds[0] == "reg":
            if len(regs[a.name]) > 1:
                raise ParseError(f"register {a.name!r} is used by several threads; qualify it", lineno)
            return Atom("reg", a.name, a.value, next(iter(regs[a.name])), a.negated)
        return Atom(kinds[0], a.name, a.value, None, a.negated)

    def walk(c: Cond) -> Cond:
        if c.op == "atom":
            return Cond("atom", (fix(c.args[0]),))
        if c.op == "true":
            return c
        return Cond(c.op, tuple(walk(a) for a in c.args))

    return walk(c)


def _check_thread(th: list[Instr], arch: str, t: int) -> None:
    depth, locked = 0, None
    labels: set[str] = set()
    regs: set[str] = set()
    for ins in th:
        for kind, src in ins.deps:
            if src not in labels and src not in regs:
                raise ParseError(f"{kind} dependency on {src!r}, which no earlier instruction of thread {t} defines",
                                 ins.line)
        if ins.op == "txbegin":
            if depth:
                raise ParseError("nested transactions are not supported", ins.line)
            depth = 1
        elif ins.op == "txend":
            if not depth:
                raise ParseError("txend without txbegin", ins.line)
            depth = 0
        elif ins.op == "lock":
            if locked is not None:
                raise ParseError("nested critical regions are not supported", ins.line)
            locked = ins.loc
        elif ins.op == "unlock":
            if locked != ins.loc:
                raise ParseError(f"unlock({ins.loc}) does not match an open lock", ins.line)
            locked = None
        if "ex" in ins.mods and arch in ("X86", "CPP", "SC", "TSC") and ins.op != "rmw":
            raise UnsupportedInstruction(f"exclusive accesses are not available on {arch}", ins.line)
        if ins.label:
            if ins.label in labels:
                raise ParseError(f"duplicate label {ins.label!r}", ins.line)
            labels.add(ins.label)
        if ins.reg:
            regs.add(ins.reg)
    if depth:
        raise ParseError(f"unbalanced txbegin in thread {t}", th[-1].line if th else 0)
    if locked is not None:
        raise ParseError(f"lock({locked}) never released in thread {t}", th[-1].line if th else 0)


def parse(text: str) -> LitmusTest:
    """Parse the litmus DSL; raises :class:`ParseError` or :class:`UnsupportedInstruction`."""
    arch, name, init = None, "", {}
    threads: dict[int, list[Instr]] = {}
    post: tuple[str, int, int] | None = None
    current: int | None = None
    columns: list[int] | None = None
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, 1):
        line = _strip_comment(raw)
        stripped = line.strip()
        if not stripped or stripped.startswith("expect:"):
            continue
        col = len(line) - len(line.lstrip()) + 1
        if current is not None:
            if stripped == "}":
                current = None
                continue
            for piece in stripped.split(";"):
                piece = piece.strip()
                if piece:
                    threads[current].append(_parse_instr(piece, arch, lineno, col))
            continue
        word = stripped.split()[0]
        if word == "arch":
            parts = stripped.split()
            if len(parts) != 2 or parts[1].upper() not in ARCHES:
                raise ParseError(f"unknown architecture line {stripped!r}", lineno, col)
            arch = parts[1].upper()
        elif word == "name":
            name = stripped[4:].strip()
        elif word == "init":
            m = re.fullmatch(r"init\s*\{(.*)\}", stripped)
            if not m:
                raise ParseError("init expects '{ x=0; ... }'", lineno, col)
            for item in filter(None, (s.strip() for s in re.split(r"[;,]", m.group(1)))):
                im = re.fullmatch(rf"({_NAME})\s*=\s*(-?\d+)", item)
                if not im:
                    raise ParseError(f"bad initialiser {item!r}", lineno, col)
                init[im.group(1)] = int(im.group(2))
        elif word == "thread":
            m = re.fullmatch(r"thread\s+(\d+)\s*\{", stripped)
            if not m:
                raise ParseError("thread blocks look like 'thread N {'", lineno, col)
            if arch is None:
                raise ParseError("arch must come before threads", lineno, col)
            current = int(m.group(1))
            if current in threads:
                raise ParseError(f"thread {current} defined twice", lineno, col)
            threads[current] = []
        elif word == "exists" or stripped.startswith("exists("):
            body = stripped[len("exists"):].strip()
            post = (body, lineno, col)
        elif "|" in stripped or re.fullmatch(r"P\d+\s*;", stripped):
            if arch is None:
                raise ParseError("arch must come before threads", lineno, col)
            cells = [c.strip() for c in stripped.rstrip(";").split("|")]
            if columns is None:
                if not all(re.fullmatch(r"P\d+", c) for c in cells):
                    raise ParseError("column header must read 'P0 | P1 | ... ;'", lineno, col)
                columns = [int(c[1:]) for c in cells]
                for t in columns:
                    if t in threads:
                        raise ParseError(f"thread {t} defined twice", lineno, col)
                    threads[t] = []
                continue
            if len(cells) != len(columns):
                raise ParseError(f"expected {len(columns)} columns, found {len(cells)}", lineno, col)
            for t, cell in zip(columns, cells):
                if cell:
                    threads[t].append(_parse_instr(cell, arch, lineno, col))
        else:
            raise ParseError(f"unexpected line {stripped!r}", lineno, col)
    if current is not None:
        raise ParseError(f"thread {current} is not closed", len(lines))
    if arch is None:
        raise ParseError("missing 'arch' line", 1)
    if sorted(threads) != list(range(len(threads))):
        raise ParseError("threads must be numbered 0..N-1", 1)
    ths = tuple(tuple(threads[t]) for t in range(len(threads)))
    for t, th in enumerate(ths):
        _check_thread(list(th), arch, t)
    ths = _name_ok_flags(ths)
    test = LitmusTest(arch, ths, TRUE, init, name)
    if post is not None:
        body, ln, c0 = post
        cond = _split_cond(body, ln, c0)
        oks = {tx[3] for tx in test.transactions}
        cond = _resolve(cond, ths, set(test.locations()), oks, ln)
        test = LitmusTest(arch, ths, cond, init, name)
    return test


def _name_ok_flags(threads: tuple) -> tuple:
    count = sum(1 for th in threads for ins in th if ins.op == "txbegin")
    k = 0
    out = []
    for th in threads:
        new = []
        for ins in th:
            if ins.op == "txbegin" and ins.ok is None:
                ins = Instr("txbegin", ok="ok" if count == 1 else f"ok{k}", atomic=ins.atomic,
                            label=ins.label, line=ins.line)
            if ins.op == "txbegin":
                k += 1
            new.append(ins)
        out.append(tuple(new))
    return tuple(out)


def load(path) -> LitmusTest:
    with open(path) as fh:
        return parse(fh.read())


# ---------------------------------------------------------------------------
# candidate enumeration


def _tags(arch: str, op: str, mods: frozenset, role: str) -> frozenset:
    """Event tags for a read (role "R") or write ("W") produced by ``op``."""
    acq = "acq" in mods or "acqrel" in mods
    rel = "rel" in mods or "acqrel" in mods
    tags = set()
    if arch == "CPP":
        if "na" in mods or not (mods - {"ex"}):
            return frozenset()
        tags.add("Ato")
        if "sc" in mods:
            tags.add("SC")
        elif role == "R" and acq:
            tags.add("Acq")
        elif role == "W" and rel:
            tags.add("Rel")
        return frozenset(tags)
    if arch == "ARMV8":
        if role == "R" and (acq or "sc" in mods):
            tags.add("Acq")
        if role == "W" and (rel or "sc" in mods):
            tags.add("Rel")
    return frozenset(tags)


@dataclass(frozen=True)
class Candidate:
    execution: Execution
    registers: Mapping[tuple, int]
    memory: Mapping[str, int]
    ok: Mapping[str, int]

    def satisfies(self, c: Cond) -> bool:
        if c.op == "true":
            return True
        if c.op == "and":
            return all(self.satisfies(a) for a in c.args)
        if c.op == "or":
            return any(self.satisfies(a) for a in c.args)
        if c.op == "not":
            return not self.satisfies(c.args[0])
        a: Atom = c.args[0]
        if a.kind == "reg":
            got = self.registers.get((a.thread, a.name), 0)
        elif a.kind == "loc":
            got = self.memory.get(a.name, 0)
        else:
            got = self.ok.get(a.name, 1)
        return (got == a.value) != a.negated


@dataclass
class _World:
    events: list
    names: list
    threads: list
    values: list                  # literal value per write, None elsewhere
    regs: list                    # (thread, reg) per read, None elsewhere
    stxn: list
    satxn: list
    addr: list
    ctrl: list
    data: list
    rmw: list
    ok: dict


def _worlds(t: LitmusTest) -> Iterator[_World]:
    txns = t.transactions
    crs = t.elidable
    for success in itertools.product((True, False), repeat=len(txns)):
        for elide in itertools.product((False, True), repeat=len(crs)):
            yield _build_world(t, txns, crs, success, elide)


def _build_world(t: LitmusTest, txns, crs, success, elide) -> _World:
    failed = {(tx[0], i) for tx, ok in zip(txns, success) if not ok for i in range(tx[1], tx[2] + 1)}
    elided = {(cr[0], i) for cr, e in zip(crs, elide) if e for i in (cr[1], cr[2])}
    w = _World([], [], [], [], [], [], [], [], [], [], [], {})
    for tx, ok in zip(txns, success):
        w.ok[tx[3]] = 1 if ok else 0
    used = {ins.label for th in t.threads for ins in th if ins.label}
    spare = iter(n for n in default_names(64) + tuple(f"e{i}" for i in range(64, 4096)) if n not in used)
    for tid, th in enumerate(t.threads):
        ids: list[int] = []
        by_label: dict[str, int] = {}
        by_reg: dict[str, int] = {}
        open_ex: dict[str, int] = {}
        ctrl_src: list[int] = []
        txn_events: list[int] | None = None
        txn_atomic = False

        def emit(ev: Event, name: str, value=None, reg=None):
            i = len(w.events)
            w.events.append(ev)
            w.names.append(name)
            w.values.append(value)
            w.regs.append((tid, reg) if reg else None)
            ids.append(i)
            if txn_events is not None:
                txn_events.append(i)
            return i

        for idx, ins in enumerate(th):
            if (tid, idx) in failed:
                continue
            if ins.op == "txbegin":
                txn_events, txn_atomic = [], ins.atomic
                continue
            if ins.op == "txend":
                if txn_events:
                    w.stxn.append(txn_events)
                    if txn_atomic:
                        w.satxn.append(txn_events)
                txn_events = None
                continue
            sources = {}
            for kind, src in ins.deps:
                s = by_label.get(src, by_reg.get(src))
                if s is not None:
                    sources.setdefault(kind, []).append(s)
            ctrl_src.extend(sources.get("ctrl", []))
            name = ins.label or next(spare)
            first = len(w.events)
            if ins.op == "load":
                e = emit(Event(READ, ins.loc, _tags(t.arch, "load", ins.mods, "R")), name, reg=ins.reg)
                by_reg[ins.reg] = e
                if "ex" in ins.mods:
                    open_ex[ins.loc] = e
            elif ins.op == "store":
                e = emit(Event(WRITE, ins.loc, _tags(t.arch, "store", ins.mods, "W")), name, value=ins.value)
                if "ex" in ins.mods and ins.loc in open_ex:
                    w.rmw.append((open_ex.pop(ins.loc), e))
            elif ins.op == "rmw":
                r = emit(Event(READ, ins.loc, _tags(t.arch, "rmw", ins.mods, "R")), name, reg=ins.reg)
                e = emit(Event(WRITE, ins.loc, _tags(t.arch, "rmw", ins.mods, "W")), name + "_w", value=ins.value)
                w.rmw.append((r, e))
                by_reg[ins.reg] = r
            elif ins.op == "fence":
                e = emit(Event(FENCE, fence=ins.fence), name)
            else:
                kind = {"lock": "L", "unlock": "U"}[ins.op] + ("t" if (tid, idx) in elided else "")
                e = emit(Event(CALL, ins.loc, lock=kind), name)
            if ins.label:
                by_label[ins.label] = e
            for kind in ("addr", "data"):
                for s in sources.get(kind, []):
                    for tgt in range(first, len(w.events)):
                        getattr(w, kind).append((s, tgt))
            for s in ctrl_src:
                for tgt in range(first, len(w.events)):
                    if tgt != s:
                        w.ctrl.append((s, tgt))
        if ids:
            w.threads.append(ids)
    return w


def _rf_co(w: _World) -> Iterator[tuple[list, list]]:
    reads = [i for i, e in enumerate(w.events) if e.kind == READ]
    writes_at: dict[str, list[int]] = {}
    for i, e in enumerate(w.events):
        if e.kind == WRITE:
            writes_at.setdefault(e.loc, []).append(i)
    rf_opts = [[None] + writes_at.get(w.events[r].loc, []) for r in reads]
    co_opts = [list(itertools.permutations(ws)) for ws in writes_at.values()]
    for rf in itertools.product(*rf_opts):
        for co in itertools.product(*co_opts):
            yield [(s, r) for s, r in zip(rf, reads) if s is not None], list(co)


def candidate_count(t: LitmusTest) -> int:
    """Number of raw candidates: per transaction-outcome (and elision) world,
    the product of per-read rf options and per-location co orders."""
    from math import factorial, prod
    total = 0
    for w in _worlds(t):
        per_loc: dict[str, int] = {}
        for e in w.events:
            if e.kind == WRITE:
                per_loc[e.loc] = per_loc.get(e.loc, 0) + 1
        rf = prod(1 + per_loc.get(e.loc, 0) for e in w.events if e.kind == READ)
        total += rf * prod(factorial(k) for k in per_loc.values())
    return total


def candidates(t: LitmusTest) -> list[Candidate]:
    """All well-formed candidate executions of ``t`` with their final states."""
    out = []
    for w in _worlds(t):
        for rf, chains in _rf_co(w):
            x = Execution.build(t.arch, w.events, w.threads, rf=rf, co_chains=chains, stxn=w.stxn,
                                satxn=w.satxn, addr=w.addr, ctrl=w.ctrl, data=w.data, rmw=w.rmw, names=w.names)
            if not is_wellformed(x):
                continue
            src = {r: s for s, r in rf}
            regs = {}
            for i, key in enumerate(w.regs):
                if key is not None:
                    s = src.get(i)
                    regs[key] = w.values[s] if s is not None else t.init.get(w.events[i].loc, 0)
            mem = {loc: t.init.get(loc, 0) for loc in t.locations()}
            for chain in chains:
                if chain:
                    mem[w.events[chain[-1]].loc] = w.values[chain[-1]]
            out.append(Candidate(x, regs, mem, dict(w.ok)))
    return out


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class TestVerdict:
    status: str                   # allowed, forbidden, undefined
    witnesses: tuple = ()
    racy_witnesses: tuple = ()
    consistent: int = 0
    total: int = 0

    @property
    def allowed(self) -> bool:
        return self.status == "allowed"

    def __str__(self) -> str:
        return f"{self.status} ({len(self.witnesses)} witnesses, {self.consistent}/{self.total} consistent)"


def evaluate(t: LitmusTest, m: Model) -> TestVerdict:
    """Decide ``exists post`` under ``m``.  With race axioms (C++), any racy
    consistent candidate makes the whole test undefined."""
    if not m.accepts(t.arch):
        raise ArchError(f"model {m.name} ({m.arch}) cannot evaluate a {t.arch} test")
    cands = candidates(t)
    witnesses, racy = [], []
    consistent = 0
    for c in cands:
        v = m.check(c.execution)
        if not v.consistent:
            continue
        consistent += 1
        if v.racy:
            racy.append(c)
        if c.satisfies(t.post):
            witnesses.append(c)
    if racy:
        status = "undefined"
    else:
        status = "allowed" if witnesses else "forbidden"
    return TestVerdict(status, tuple(witnesses), tuple(racy), consistent, len(cands))


# ---------------------------------------------------------------------------
# executions to tests


def _mods_for(arch: str, e: Event) -> frozenset:
    tags = e.tags
    if arch == "CPP":
        if "SC" in tags:
            return frozenset({"sc"})
        if "Acq" in tags:
            return frozenset({"acq"})
        if "Rel" in tags:
            return frozenset({"rel"})
        return frozenset({"rlx"}) if "Ato" in tags else frozenset()
    out = set()
    if "Acq" in tags:
        out.add("acq")
    if "Rel" in tags:
        out.add("rel")
    return frozenset(out)


def to_litmus(x: Execution, observers: bool = False, name: str = "") -> LitmusTest:
    """A test whose postcondition pins ``x``'s rf, co and transaction outcomes.

    Stores write their co position (unique, non-zero), each read's register is
    checked, and each location with two or more writes has its final value
    checked.  With more than two writes that does not fix co; a warning is
    attached, and ``observers=True`` adds one reader thread per co-adjacent
    pair (which changes the execution being tested).
    """
    vals = x.values()
    rmw = x.rel("rmw")
    rmw_src = {b: a for a, b in rmw.pairs()}
    rmw_dst = {a for a, _ in rmw.pairs()}
    adjacent = x.arch not in ("POWER", "ARMV8")
    deps: dict[int, list] = {}
    for kind in ("addr", "data"):
        for a, b in x.rel(kind).pairs():
            deps.setdefault(b, []).append((kind, x.names[a]))
    ctrl = x.rel("ctrl")
    po = x.rel("po")
    for a, b in ctrl.pairs():
        # annotate only the po-first target; the closure restores the rest
        if not any((a, c) in ctrl and (c, b) in po for c in range(x.n)):
            deps.setdefault(b, []).append(("ctrl", x.names[a]))
    stxn = x.rels["stxn"]
    satxn = x.rels["satxn"]
    ntx = len(x.txn_classes())
    regs: dict[int, str] = {}
    thread_of = {e: t for t, th in enumerate(x.threads()) for e in th}
    threads = []
    tx_index = 0
    atoms: list[Atom] = []
    for th in x.threads():
        body: list[Instr] = []
        prev_cls = 0
        for e in th:
            cls = stxn[e]
            if cls != prev_cls:
                if prev_cls:
                    body.append(Instr("txend"))
                if cls:
                    ok = "ok" if ntx == 1 else f"ok{tx_index}"
                    tx_index += 1
                    body.append(Instr("txbegin", ok=ok, atomic=bool(satxn[e])))
                    atoms.append(Atom("ok", ok, 1))
            prev_cls = cls
            ev = x.events[e]
            label = x.names[e]
            d = tuple(deps.get(e, ()))
            mods = _mods_for(x.arch, ev)
            if ev.kind == READ:
                reg = f"r{len(regs)}"
                regs[e] = reg
                if e in rmw_dst and not adjacent:
                    mods = mods | {"ex"}
                if e in rmw_dst and adjacent:
                    w_ = next(b for a, b in rmw.pairs() if a == e)
                    mods = mods | _mods_for(x.arch, x.events[w_])
                    if x.arch == "CPP" and mods >= {"acq", "rel"}:
                        mods = (mods - {"acq", "rel"}) | {"acqrel"}
                    body.append(Instr("rmw", loc=ev.loc, reg=reg, value=vals[w_], mods=frozenset(mods),
                                      deps=d, label=label))
                    continue
                body.append(Instr("load", loc=ev.loc, reg=reg, mods=frozenset(mods), deps=d, label=label))
            elif ev.kind == WRITE:
                if e in rmw_src:
                    if adjacent:
                        continue
                    mods = mods | {"ex"}
                body.append(Instr("store", loc=ev.loc, value=vals[e], mods=frozenset(mods), deps=d, label=label))
            elif ev.kind == FENCE:
                body.append(Instr("fence", fence=ev.fence, deps=d, label=label))
            else:
                op = "lock" if ev.lock in ("L", "Lt") else "unlock"
                body.append(Instr(op, loc=ev.loc or "m", elide=ev.lock == "Lt", deps=d, label=label))
        if prev_cls:
            body.append(Instr("txend"))
        threads.append(body)
    for e, reg in sorted(regs.items(), key=lambda kv: int(kv[1][1:])):
        atoms.append(Atom("reg", reg, vals[e] or 0, thread_of[e]))
    warnings = []
    next_reg = len(regs)
    co = x.rels["co"]
    for loc in x.locations():
        ws = [i for i, ev in enumerate(x.events) if ev.kind == WRITE and ev.loc == loc]
        if len(ws) < 2:
            continue
        last = next(i for i in ws if co[i] == 0)
        atoms.append(Atom("loc", loc, vals[last]))
        if len(ws) > 2:
            warnings.append(f"location {loc} has {len(ws)} writes; the final value alone does not fix co")
            if observers:
                chain = sorted(ws, key=lambda i: vals[i])
                for a, b in zip(chain, chain[1:]):
                    r1, r2 = f"r{next_reg}", f"r{next_reg + 1}"
                    next_reg += 2
                    tid = len(threads)
                    threads.append([Instr("load", loc=loc, reg=r1), Instr("load", loc=loc, reg=r2)])
                    atoms.append(Atom("reg", r1, vals[a], tid))
                    atoms.append(Atom("reg", r2, vals[b], tid))
    init = {loc: 0 for loc in x.locations()}
    if not atoms:
        post = TRUE
    elif len(atoms) == 1:
        post = Cond("atom", (atoms[0],))
    else:
        post = Cond("and", tuple(Cond("atom", (a,)) for a in atoms))
    return LitmusTest(x.arch, tuple(tuple(th) for th in threads), post, init, name, tuple(warnings))


def _atom_str_unqualified(a: Atom) -> str:
    return f"{a.name}{'!=' if a.negated else '='}{a.value}"


def post_text(t: LitmusTest) -> str:
    """The postcondition with registers unqualified where unambiguous."""
    owners: dict[str, set] = {}
    for tid, th in enumerate(t.threads):
        for ins in th:
            if ins.reg:
                owners.setdefault(ins.reg, set()).add(tid)

    def show(c: Cond) -> str:
        if c.op == "atom":
            a = c.args[0]
            if a.kind == "reg" and len(owners.get(a.name, ())) == 1:
                return _atom_str_unqualified(a)
            return str(a)
        if c.op == "true":
            return "true"
        if c.op == "not":
            return f"~({show(c.args[0])})"
        sep = " /\\ " if c.op == "and" else " \\/ "
        return sep.join(f"({show(a)})" if a.op in ("and", "or") else show(a) for a in c.args)

    return show(t.post)


def witnesses_contain(verdict: TestVerdict, x: Execution) -> bool:
    from .synth import canonical_key
    key = canonical_key(x)
    return any(canonical_key(c.execution) == key for c in verdict.witnesses)


# ---------------------------------------------------------------------------
# assembly-flavoured rendering

_ASM = {
    "X86": {"load": "MOV {r},[{loc}]", "store": "MOV [{loc}],${v}", "rmw": "XCHG [{loc}],{r}  ; ${v}",
            "begin": "XBEGIN {fail}", "end": "XEND", "fence": {"mfence": "MFENCE"}},
    "POWER": {"load": "lwz {r},0({loc})", "store": "li r9,{v} ; stw r9,0({loc})",
              "load.ex": "lwarx {r},0,{loc}", "store.ex": "li r9,{v} ; stwcx. r9,0,{loc}",
              "begin": "tbegin. ; beq {fail}", "end": "tend.",
              "fence": {"sync": "sync", "lwsync": "lwsync", "isync": "isync"}},
    "ARMV8": {"load": "LDR {r},[{loc}]", "load.acq": "LDAR {r},[{loc}]", "store": "MOV W9,#{v} ; STR W9,[{loc}]",
              "store.rel": "MOV W9,#{v} ; STLR W9,[{loc}]", "load.ex": "LDXR {r},[{loc}]",
              "load.acq.ex": "LDAXR {r},[{loc}]", "store.ex": "MOV W9,#{v} ; STXR W8,W9,[{loc}]",
              "store.rel.ex": "MOV W9,#{v} ; STLXR W8,W9,[{loc}]", "begin": "TXBEGIN {fail}", "end": "TXEND",
              "fence": {"dmb": "DMB SY", "dmbld": "DMB LD", "dmbst": "DMB ST", "isb": "ISB"}},
}


def render_asm(t: LitmusTest) -> str:
    """Best-effort assembly listing of ``t`` for an external test runner.

    x86 uses TSX and Power uses HTM mnemonics.  ARMv8 has no transactional
    instructions, so its TXBEGIN/TXEND are unofficial and the listing is not
    executable.  C++ tests are printed as C++ with ``atomic_noexcept`` blocks.
    """
    if t.arch == "CPP":
        return _render_cpp(t)
    table = _ASM.get(t.arch)
    if table is None:
        return t.to_text()
    out = []
    if t.arch == "ARMV8":
        out.append("// UNOFFICIAL: ARMv8 has no transactional memory; TXBEGIN/TXEND are")
        out.append("// representative mnemonics only.  This listing is NOT executable.")
    out.append(f"{t.arch} {t.name or 'test'}")
    out.append("{ " + " ".join(f"{k}={v};" for k, v in (t.init or {l: 0 for l in t.locations()}).items()) + " }")
    for tid, th in enumerate(t.threads):
        out.append(f"P{tid}:")
        fail, ok, k = None, None, 0
        branch = {"ARMV8": "B", "X86": "JMP"}.get(t.arch, "b")
        for ins in th:
            if ins.op == "txbegin":
                fail, ok = f"Lfail{tid}_{k}", ins.ok
                out.append("  " + table["begin"].format(fail=fail))
                continue
            if ins.op == "txend":
                out.append("  " + table["end"])
                out.append(f"  {branch} Lsucc{tid}_{k}")
                out.append(f"{fail}:")
                out.append(f"  ; [{ok}] <- 0")
                out.append(f"Lsucc{tid}_{k}:")
                k += 1
                continue
            if ins.op == "fence":
                out.append("  " + table["fence"][ins.fence])
                continue
            if ins.op in ("lock", "unlock"):
                out.append(f"  ; {ins.op}({ins.loc}){' elided' if ins.elide else ''}")
                continue
            key = ins.op + "".join("." + m for m in ("acq", "rel", "ex") if m in ins.mods)
            fmt = table.get(key) or table.get(ins.op)
            out.append("  " + fmt.format(r=ins.reg, loc=ins.loc, v=ins.value))
    out.append(f"exists ({post_text(t)})")
    return "\n".join(out) + "\n"


def _render_cpp(t: LitmusTest) -> str:
    order = {"rlx": "relaxed", "acq": "acquire", "rel": "release", "acqrel": "acq_rel", "sc": "seq_cst"}
    out = [f"// {t.name or 'test'}"]
    for loc in t.locations():
        out.append(f"std::atomic<int> {loc}{{{t.init.get(loc, 0)}}};")
    for tid, th in enumerate(t.threads):
        out.append(f"void P{tid}() {{")
        depth = 1
        for ins in th:
            pad = "  " * depth
            mode = next((order[m] for m in order if m in ins.mods), None)
            mo = f", std::memory_order_{mode}" if mode else ""
            if ins.op == "txbegin":
                out.append(pad + ("atomic_noexcept {" if ins.atomic else "synchronized {"))
                depth += 1
            elif ins.op == "txend":
                depth -= 1
                out.append("  " * depth + "}")
            elif ins.op == "load":
                out.append(pad + (f"int {ins.reg} = {ins.loc}.load({mo[2:]});" if mode else
                                  f"int {ins.reg} = {ins.loc}_na;"))
            elif ins.op == "store":
                out.append(pad + (f"{ins.loc}.store({ins.value}{mo});" if mode else f"{ins.loc}_na = {ins.value};"))
            elif ins.op == "rmw":
                out.append(pad + f"int {ins.reg} = {ins.loc}.exchange({ins.value}{mo});")
            else:
                out.append(pad + f"// {render_instr(ins)}")
        out.append("}")
    out.append(f"// exists ({post_text(t)})")
    return "\n".join(out) + "\n"
