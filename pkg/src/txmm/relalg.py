"""Finite relational algebra over the events of one execution.

Events are dense integers ``0..n-1``.  A set of events is an ``int`` bitmask
and a relation is a tuple of ``n`` row bitmasks (``rows[i]`` holds the
successors of ``i``).  Executions stay tiny (a dozen events at most), so the
dense encoding beats anything sparse.

The module also hosts the expression language used by model files::

    let hb = po | com
    axiom acyclic TxnOrder stronglift(hb, stxn)

Operators, loosest first: ``|`` union, ``;`` composition, ``\\`` difference,
``&`` intersection, ``*`` cartesian product, prefix ``~`` complement, and the
postfix forms ``^-1`` ``?`` ``+`` ``*``.  ``[S]`` lifts a set to a relation.
A ``*`` directly followed by something that can start an operand is the
binary product, otherwise it is the reflexive-transitive closure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

Rows = tuple  # tuple[int, ...]


# ---------------------------------------------------------------------------
# raw row operations (hot path)


def full_mask(n: int) -> int:
    return (1 << n) - 1


def bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def r_empty(n: int) -> Rows:
    return (0,) * n


def r_id(n: int) -> Rows:
    return tuple(1 << i for i in range(n))


def r_union(a: Rows, b: Rows) -> Rows:
    return tuple(x | y for x, y in zip(a, b))


def r_inter(a: Rows, b: Rows) -> Rows:
    return tuple(x & y for x, y in zip(a, b))


def r_diff(a: Rows, b: Rows) -> Rows:
    return tuple(x & ~y for x, y in zip(a, b))


def r_compl(n: int, a: Rows) -> Rows:
    full = (1 << n) - 1
    return tuple(full ^ x for x in a)


def r_seq(a: Rows, b: Rows) -> Rows:
    out = []
    for r in a:
        acc = 0
        while r:
            low = r & -r
            acc |= b[low.bit_length() - 1]
            r ^= low
        out.append(acc)
    return tuple(out)


def r_inv(n: int, a: Rows) -> Rows:
    cols = [0] * n
    for i, r in enumerate(a):
        bit = 1 << i
        while r:
            low = r & -r
            cols[low.bit_length() - 1] |= bit
            r ^= low
    return tuple(cols)


def r_plus(a: Rows) -> Rows:
    rows = list(a)
    n = len(rows)
    for k in range(n):
        rk = rows[k]
        if not rk:
            continue
        bk = 1 << k
        for i in range(n):
            if rows[i] & bk:
                rows[i] |= rk
    return tuple(rows)


def r_star(a: Rows) -> Rows:
    return tuple(r | (1 << i) for i, r in enumerate(r_plus(a)))


def r_opt(a: Rows) -> Rows:
    return tuple(r | (1 << i) for i, r in enumerate(a))


def r_lift(n: int, s: int) -> Rows:
    return tuple((1 << i) if (s >> i) & 1 else 0 for i in range(n))


def r_cross(n: int, s: int, t: int) -> Rows:
    return tuple(t if (s >> i) & 1 else 0 for i in range(n))


def r_domain(a: Rows) -> int:
    m = 0
    for i, r in enumerate(a):
        if r:
            m |= 1 << i
    return m


def r_range(a: Rows) -> int:
    m = 0
    for r in a:
        m |= r
    return m


def r_restrict(a: Rows, src: int, dst: int) -> Rows:
    """``[src]; a; [dst]``."""
    return tuple((r & dst) if (src >> i) & 1 else 0 for i, r in enumerate(a))


def is_empty(a: Rows) -> bool:
    return not any(a)


def is_irreflexive(a: Rows) -> bool:
    return not any((r >> i) & 1 for i, r in enumerate(a))


def is_acyclic(a: Rows) -> bool:
    # Kahn-style peeling of sources; cheaper than a closure for tiny graphs.
    n = len(a)
    alive = (1 << n) - 1
    while alive:
        sources = 0
        incoming = 0
        for i in bits(alive):
            incoming |= a[i] & alive
        sources = alive & ~incoming
        if not sources:
            return False
        alive &= ~sources
    return True


def weaklift(r: Rows, t: Rows) -> Rows:
    """``t ; (r \\ t) ; t``."""
    return r_seq(r_seq(t, r_diff(r, t)), t)


def stronglift(r: Rows, t: Rows) -> Rows:
    """``t? ; (r \\ t) ; t?``."""
    to = r_opt(t)
    return r_seq(r_seq(to, r_diff(r, t)), to)


def rows_from_pairs(n: int, pairs: Iterable[tuple[int, int]]) -> Rows:
    rows = [0] * n
    for a, b in pairs:
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"pair ({a}, {b}) outside universe of {n} events")
        rows[a] |= 1 << b
    return tuple(rows)


def rows_pairs(a: Rows) -> list[tuple[int, int]]:
    return [(i, j) for i, r in enumerate(a) for j in bits(r)]


def per_from_classes(n: int, classes: Iterable[Iterable[int]]) -> Rows:
    """The partial equivalence relation whose classes are ``classes``."""
    rows = [0] * n
    for cls in classes:
        mask = 0
        for e in cls:
            mask |= 1 << e
        for e in bits(mask):
            rows[e] |= mask
    return tuple(rows)


def per_classes(a: Rows) -> list[int]:
    """Class masks of a PER, ordered by smallest member."""
    seen = 0
    out = []
    for i, r in enumerate(a):
        if r and not (seen >> i) & 1:
            out.append(r)
            seen |= r
    return out


# ---------------------------------------------------------------------------
# public value type


class Rel:
    """An immutable binary relation over the events ``0..n-1``."""

    __slots__ = ("n", "rows")

    def __init__(self, n: int, rows: Sequence[int] | None = None):
        if rows is None:
            rows = (0,) * n
        rows = tuple(rows)
        if len(rows) != n:
            raise ValueError("row count does not match universe size")
        full = (1 << n) - 1
        if any(r & ~full for r in rows):
            raise ValueError("relation mentions an event outside the universe")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "rows", rows)

    def __setattr__(self, name, value):
        raise AttributeError("Rel is immutable")

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]]) -> "Rel":
        return cls(n, rows_from_pairs(n, pairs))

    @classmethod
    def identity(cls, n: int) -> "Rel":
        return cls(n, r_id(n))

    def pairs(self) -> set[tuple[int, int]]:
        return set(rows_pairs(self.rows))

    def __iter__(self):
        return iter(rows_pairs(self.rows))

    def __len__(self) -> int:
        return sum(bin(r).count("1") for r in self.rows)

    def __contains__(self, pair) -> bool:
        a, b = pair
        return 0 <= a < self.n and bool((self.rows[a] >> b) & 1)

    def __eq__(self, other) -> bool:
        return isinstance(other, Rel) and self.n == other.n and self.rows == other.rows

    def __hash__(self) -> int:
        return hash((self.n, self.rows))

    def __repr__(self) -> str:
        return f"Rel({self.n}, {sorted(self.pairs())})"

    def _same(self, other: "Rel") -> None:
        if self.n != other.n:
            raise ValueError("relations over different universes")

    def __or__(self, other: "Rel") -> "Rel":
        self._same(other)
        return Rel(self.n, r_union(self.rows, other.rows))

    def __and__(self, other: "Rel") -> "Rel":
        self._same(other)
        return Rel(self.n, r_inter(self.rows, other.rows))

    def __sub__(self, other: "Rel") -> "Rel":
        self._same(other)
        return Rel(self.n, r_diff(self.rows, other.rows))

    def __invert__(self) -> "Rel":
        return Rel(self.n, r_compl(self.n, self.rows))

    def seq(self, other: "Rel") -> "Rel":
        self._same(other)
        return Rel(self.n, r_seq(self.rows, other.rows))

    __matmul__ = seq

    @property
    def inv(self) -> "Rel":
        return Rel(self.n, r_inv(self.n, self.rows))

    def plus(self) -> "Rel":
        return Rel(self.n, r_plus(self.rows))

    def star(self) -> "Rel":
        return Rel(self.n, r_star(self.rows))

    def opt(self) -> "Rel":
        return Rel(self.n, r_opt(self.rows))

    def domain(self) -> int:
        return r_domain(self.rows)

    def range(self) -> int:
        return r_range(self.rows)

    def acyclic(self) -> bool:
        return is_acyclic(self.rows)

    def irreflexive(self) -> bool:
        return is_irreflexive(self.rows)

    def is_empty(self) -> bool:
        return is_empty(self.rows)


def lift(n: int, s: int) -> Rel:
    return Rel(n, r_lift(n, s))


def acyclic(r: Rel) -> bool:
    return r.acyclic()


def irreflexive(r: Rel) -> bool:
    return r.irreflexive()


def empty(r: Rel) -> bool:
    return r.is_empty()


def weaklift_rel(r: Rel, t: Rel) -> Rel:
    return Rel(r.n, weaklift(r.rows, t.rows))


def stronglift_rel(r: Rel, t: Rel) -> Rel:
    return Rel(r.n, stronglift(r.rows, t.rows))


# ---------------------------------------------------------------------------
# expression AST


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Name(Expr):
    ident: str


@dataclass(frozen=True)
class Zero(Expr):
    pass


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # compl inv opt plus star lift domain range
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # union inter diff seq cross
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple


_BIN_SYMBOL = {"union": "|", "inter": "&", "diff": "\\", "seq": ";", "cross": "*"}
_POSTFIX_SYMBOL = {"inv": "^-1", "opt": "?", "plus": "+", "star": "*"}


def show(e: Expr) -> str:
    """Render an expression back to surface syntax (fully parenthesised)."""
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Zero):
        return "0"
    if isinstance(e, Binary):
        return f"({show(e.left)} {_BIN_SYMBOL[e.op]} {show(e.right)})"
    if isinstance(e, Unary):
        if e.op == "compl":
            return f"~{show(e.arg)}"
        if e.op == "lift":
            return f"[{show(e.arg)}]"
        if e.op in ("domain", "range"):
            return f"{e.op}({show(e.arg)})"
        return f"{show(e.arg)}{_POSTFIX_SYMBOL[e.op]}"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(show(a) for a in e.args)})"
    raise TypeError(e)


class ExprSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int, text: str):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} at line {line}, column {col}")
        self.line = line
        self.column = col


_TOKEN = re.compile(
    r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_.]*)|(?P<inv>\^-1)|(?P<zero>0)|(?P<sym>[|;\\&*~?+()\[\],]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        val = m.group(kind)
        toks.append((kind, val, m.start(kind)))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def sym(self, s: str, k: int = 0) -> bool:
        kind, val, _ = self.peek(k)
        return kind == "sym" and val == s

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, s: str):
        if not self.sym(s):
            kind, val, pos = self.peek()
            raise ExprSyntaxError(f"expected {s!r}, found {val or kind!r}", pos, self.text)
        self.take()

    def starts_operand(self, k: int = 0) -> bool:
        kind, val, _ = self.peek(k)
        return kind in ("name", "zero") or (kind == "sym" and val in "([~")

    def parse(self) -> Expr:
        e = self.union()
        kind, val, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected {val!r}", pos, self.text)
        return e

    def _chain(self, sub, symbol: str, op: str) -> Expr:
        e = sub()
        while self.sym(symbol):
            self.take()
            e = Binary(op, e, sub())
        return e

    def union(self):
        return self._chain(self.seq, "|", "union")

    def seq(self):
        return self._chain(self.diff, ";", "seq")

    def diff(self):
        return self._chain(self.inter, "\\", "diff")

    def inter(self):
        return self._chain(self.cross, "&", "inter")

    def cross(self):
        e = self.unary()
        while self.sym("*") and self.starts_operand(1):
            self.take()
            e = Binary("cross", e, self.unary())
        return e

    def unary(self):
        if self.sym("~"):
            self.take()
            return Unary("compl", self.unary())
        return self.postfix()

    def postfix(self):
        e = self.primary()
        while True:
            kind, val, _ = self.peek()
            if kind == "inv":
                self.take()
                e = Unary("inv", e)
            elif kind == "sym" and val in "?+":
                self.take()
                e = Unary("opt" if val == "?" else "plus", e)
            elif kind == "sym" and val == "*" and not self.starts_operand(1):
                self.take()
                e = Unary("star", e)
            else:
                return e

    def primary(self):
        kind, val, pos = self.peek()
        if kind == "zero":
            self.take()
            return Zero()
        if kind == "name":
            self.take()
            if self.sym("("):
                self.take()
                args = []
                if not self.sym(")"):
                    args.append(self.union())
                    while self.sym(","):
                        self.take()
                        args.append(self.union())
                self.expect(")")
                if val in ("domain", "range"):
                    if len(args) != 1:
                        raise ExprSyntaxError(f"{val} takes one argument", pos, self.text)
                    return Unary(val, args[0])
                return Call(val, tuple(args))
            return Name(val)
        if self.sym("("):
            self.take()
            e = self.union()
            self.expect(")")
            return e
        if self.sym("["):
            self.take()
            e = self.union()
            self.expect("]")
            return Unary("lift", e)
        raise ExprSyntaxError(f"unexpected {val or kind!r}", pos, self.text)


def parse_expr(text: str) -> Expr:
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# compilation to a memoised evaluation plan

SET, REL = "set", "rel"


@dataclass(frozen=True)
class Plugin:
    """A named primitive relation computed in Python from the environment."""

    name: str
    needs: tuple  # names of environment entries the function reads
    fn: Callable  # fn(n, *values) -> rows


# Calls available in every expression: name -> (argument types, result type).
_BUILTIN_CALLS = {
    "weaklift": ((REL, REL), REL),
    "stronglift": ((REL, REL), REL),
    "ext": ((REL,), REL),
    "int": ((REL,), REL),
    "loc": ((REL,), REL),
    "nloc": ((REL,), REL),
}


class Plan:
    """A compiled, CSE'd list of operations over an environment.

    Slots ``0..len(inputs)-1`` hold environment values; every further slot is
    one distinct subexpression.  ``run`` evaluates only the slots a target
    needs, so callers asking for a single axiom do not pay for the rest.
    """

    def __init__(self, inputs: Sequence[str]):
        self.inputs = list(inputs)
        self.ops: list[tuple[Callable, tuple[int, ...], bool]] = []  # (fn, args, wants_n)
        self.types: list[str] = []
        self._cse: dict = {}
        self.deps: list[tuple[int, ...]] = []

    def slot(self, key, fn, args: tuple, typ: str, wants_n: bool) -> int:
        hit = self._cse.get(key)
        if hit is not None:
            return hit
        idx = len(self.inputs) + len(self.ops)
        self.ops.append((fn, args, wants_n))
        self.types.append(typ)
        order = []
        seen = set()
        for a in args:
            if a >= len(self.inputs):
                for d in self.deps[a - len(self.inputs)]:
                    if d not in seen:
                        seen.add(d)
                        order.append(d)
        order.append(idx)
        self.deps.append(tuple(order))
        self._cse[key] = idx
        return idx

    def new_state(self, n: int, env: Mapping[str, object]) -> list:
        vals = [env[name] for name in self.inputs]
        vals.extend([None] * len(self.ops))
        return vals

    def value(self, state: list, n: int, idx: int):
        base = len(self.inputs)
        if idx < base:
            return state[idx]
        v = state[idx]
        if v is not None:
            return v
        ops = self.ops
        for d in self.deps[idx - base]:
            if state[d] is None:
                fn, args, wants_n = ops[d - base]
                if wants_n:
                    state[d] = fn(n, *[state[a] for a in args])
                else:
                    state[d] = fn(*[state[a] for a in args])
        return state[idx]


def _set_union(a, b):
    return a | b


def _set_inter(a, b):
    return a & b


def _set_diff(a, b):
    return a & ~b


def _set_compl(n, a):
    return ((1 << n) - 1) ^ a


def _zero_rel(n):
    return (0,) * n


def _ext(r, sthd):
    return r_diff(r, sthd)


def _int(r, sthd):
    return r_inter(r, sthd)


class Compiler:
    """Type-checks expressions against a name table and adds them to a plan."""

    def __init__(self, plan: Plan, types: dict[str, str], plugins: Mapping[str, Plugin] | None = None):
        self.plan = plan
        self.types = dict(types)
        self.plugins = dict(plugins or {})
        self.bound: dict[str, int] = {}
        for i, name in enumerate(plan.inputs):
            self.bound[name] = i

    def _input(self, name: str) -> int:
        if name not in self.bound:
            if name not in self.types:
                raise NameError(f"unresolved name {name!r}")
            self.plan.inputs.append(name)
            # inputs must precede ops; only allowed before the first op
            if self.plan.ops:
                raise RuntimeError("inputs must be declared before compiling operations")
            self.bound[name] = len(self.plan.inputs) - 1
        return self.bound[name]

    def bind(self, name: str, idx: int, typ: str) -> None:
        self.bound[name] = idx
        self.types[name] = typ

    def type_of(self, e: Expr) -> str:
        if isinstance(e, Name):
            if e.ident in self.types:
                return self.types[e.ident]
            if e.ident in self.plugins:
                return REL
            raise NameError(f"unresolved name {e.ident!r}")
        if isinstance(e, Zero):
            return REL
        if isinstance(e, Unary):
            if e.op in ("domain", "range"):
                return SET
            if e.op == "compl":
                return self.type_of(e.arg)
            return REL
        if isinstance(e, Binary):
            if e.op in ("seq", "cross"):
                return REL
            return self.type_of(e.left)
        if isinstance(e, Call):
            if e.fn in _BUILTIN_CALLS:
                return _BUILTIN_CALLS[e.fn][1]
            if e.fn in self.plugins:
                return REL
            raise NameError(f"unresolved function {e.fn!r}")
        raise TypeError(e)

    def _want(self, e: Expr, typ: str) -> int:
        got = self.type_of(e)
        if got != typ:
            raise TypeError(f"{show(e)} is a {got}, expected a {typ}")
        return self.compile(e)

    def compile(self, e: Expr) -> int:
        p = self.plan
        if isinstance(e, Name):
            if e.ident in self.bound:
                return self.bound[e.ident]
            if e.ident in self.plugins:
                return self._plugin(e.ident)
            if e.ident in self.types:
                raise NameError(f"name {e.ident!r} is not available in this environment")
            raise NameError(f"unresolved name {e.ident!r}")
        if isinstance(e, Zero):
            return p.slot(("zero",), _zero_rel, (), REL, True)
        if isinstance(e, Unary):
            return self._unary(e)
        if isinstance(e, Binary):
            return self._binary(e)
        if isinstance(e, Call):
            return self._call(e)
        raise TypeError(e)

    def _plugin(self, name: str) -> int:
        plug = self.plugins[name]
        args = tuple(self.compile(Name(need)) for need in plug.needs)
        return self.plan.slot(("plugin", name, args), plug.fn, args, REL, True)

    def _unary(self, e: Unary) -> int:
        p = self.plan
        if e.op == "lift":
            a = self._want(e.arg, SET)
            return p.slot(("lift", a), r_lift, (a,), REL, True)
        if e.op == "compl":
            typ = self.type_of(e.arg)
            a = self.compile(e.arg)
            if typ == SET:
                return p.slot(("scompl", a), _set_compl, (a,), SET, True)
            return p.slot(("compl", a), r_compl, (a,), REL, True)
        a = self._want(e.arg, REL)
        table = {
            "inv": (r_inv, True, REL),
            "opt": (r_opt, False, REL),
            "plus": (r_plus, False, REL),
            "star": (r_star, False, REL),
            "domain": (r_domain, False, SET),
            "range": (r_range, False, SET),
        }
        fn, wants_n, typ = table[e.op]
        return p.slot((e.op, a), fn, (a,), typ, wants_n)

    def _binary(self, e: Binary) -> int:
        p = self.plan
        if e.op == "cross":
            a = self._want(e.left, SET)
            b = self._want(e.right, SET)
            return p.slot(("cross", a, b), r_cross, (a, b), REL, True)
        if e.op == "seq":
            a = self._want(e.left, REL)
            b = self._want(e.right, REL)
            return p.slot(("seq", a, b), r_seq, (a, b), REL, False)
        typ = self.type_of(e.left)
        a = self._want(e.left, typ)
        b = self._want(e.right, typ)
        if typ == SET:
            fn = {"union": _set_union, "inter": _set_inter, "diff": _set_diff}[e.op]
        else:
            fn = {"union": r_union, "inter": r_inter, "diff": r_diff}[e.op]
        key = (e.op, typ) + ((min(a, b), max(a, b)) if e.op != "diff" else (a, b))
        return p.slot(key, fn, (a, b), typ, False)

    def _call(self, e: Call) -> int:
        p = self.plan
        if e.fn in self.plugins:
            if e.args:
                raise TypeError(f"plugin {e.fn} takes no arguments")
            return self._plugin(e.fn)
        if e.fn not in _BUILTIN_CALLS:
            raise NameError(f"unresolved function {e.fn!r}")
        argtypes, _ = _BUILTIN_CALLS[e.fn]
        if len(e.args) != len(argtypes):
            raise TypeError(f"{e.fn} takes {len(argtypes)} arguments")
        args = tuple(self._want(a, t) for a, t in zip(e.args, argtypes))
        if e.fn == "weaklift":
            return p.slot(("weaklift",) + args, weaklift, args, REL, False)
        if e.fn == "stronglift":
            return p.slot(("stronglift",) + args, stronglift, args, REL, False)
        helper = {"ext": ("sthd", _ext), "int": ("sthd", _int), "loc": ("sloc", r_inter), "nloc": ("sloc", r_diff)}
        envname, fn = helper[e.fn]
        other = self.compile(Name(envname))
        return p.slot((e.fn,) + args, fn, args + (other,), REL, False)


def evaluate(expr: Expr | str, n: int, env: Mapping[str, object], types: Mapping[str, str] | None = None,
             plugins: Mapping[str, Plugin] | None = None):
    """One-shot evaluation of an expression against an environment.

    ``env`` maps names to set bitmasks or row tuples.  ``types`` defaults to
    guessing from the values (``int`` means set).
    """
    if isinstance(expr, str):
        expr = parse_expr(expr)
    if types is None:
        types = {k: (SET if isinstance(v, int) else REL) for k, v in env.items()}
    plan = Plan(list(env))
    comp = Compiler(plan, dict(types), plugins)
    idx = comp.compile(expr)
    state = plan.new_state(n, env)
    return plan.value(state, n, idx)
