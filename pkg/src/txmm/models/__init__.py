"""Consistency models as declarative axiom lists over relation expressions.

Model files use three statements, one per line (indented lines continue the
previous statement, ``#`` starts a comment)::

    model x86-tm
    arch X86
    let hb = mfence | ppo | implied | rfe | fr | co
    axiom acyclic Order hb
    race-axiom empty NoRace (cnf \\ (Ato*Ato)) \\ (hb | hb^-1)

Every model implicitly starts with the shared definitions of ``prelude.cat``
(``fr``, ``com``, ``rfe``, fence relations, ``tfence``...).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

from .. import relalg as ra
from ..execution import Execution, env_types
from ..relalg import Expr, parse_expr, show
from .plugins import PLUGINS

SHAPES = ("acyclic", "irreflexive", "empty")


class ArchError(ValueError):
    """The execution's architecture is not accepted by the model."""


class ModelSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Axiom:
    name: str
    shape: str
    body: Expr

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown axiom shape {self.shape!r}")

    @classmethod
    def parse(cls, shape: str, name: str, text: str) -> "Axiom":
        return cls(name, shape, parse_expr(text))

    def __str__(self) -> str:
        return f"axiom {self.shape} {self.name} {show(self.body)}"


@dataclass(frozen=True)
class Verdict:
    consistent: bool
    violated: tuple = ()
    racy: bool | None = None

    def __bool__(self) -> bool:
        return self.consistent

    def __str__(self) -> str:
        if self.consistent:
            text = "Consistent"
        else:
            text = "Inconsistent: " + ", ".join(self.violated)
        if self.racy:
            text += " (racy)"
        return text


_HOLDS = {"acyclic": ra.is_acyclic, "irreflexive": ra.is_irreflexive, "empty": ra.is_empty}

# Which execution architectures each model architecture accepts.
_ACCEPTS = {
    "SC": {"SC", "TSC", "X86", "POWER", "ARMV8", "CPP"},
    "X86": {"X86", "SC", "TSC"},
    "POWER": {"POWER", "SC", "TSC"},
    "ARMV8": {"ARMV8", "SC", "TSC"},
    "CPP": {"CPP", "SC", "TSC"},
}


def _read_cat(name: str) -> str:
    return resources.files(__package__).joinpath("cat", name).read_text()


def _statements(text: str) -> list[tuple[int, str]]:
    out: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line[0].isspace() and out:
            out[-1] = (out[-1][0], out[-1][1] + " " + line.strip())
        else:
            out.append((lineno, line.strip()))
    return out


def parse_definitions(text: str):
    """Split model text into (header dict, lets, axioms, race axioms)."""
    header: dict[str, str] = {}
    lets: list[tuple[str, Expr]] = []
    axioms: list[Axiom] = []
    races: list[Axiom] = []
    for lineno, stmt in _statements(text):
        kw, _, rest = stmt.partition(" ")
        try:
            if kw in ("model", "arch"):
                header[kw] = rest.strip()
            elif kw == "let":
                name, eq, body = rest.partition("=")
                if not eq or not name.strip():
                    raise ModelSyntaxError("expected 'let name = expr'")
                lets.append((name.strip(), parse_expr(body)))
            elif kw in ("axiom", "race-axiom"):
                parts = rest.split(None, 2)
                if len(parts) != 3:
                    raise ModelSyntaxError(f"expected '{kw} shape name expr'")
                shape, name, body = parts
                if shape not in SHAPES:
                    raise ModelSyntaxError(f"unknown axiom shape {shape!r}")
                (races if kw == "race-axiom" else axioms).append(Axiom(name, shape, parse_expr(body)))
            else:
                raise ModelSyntaxError(f"unknown statement {kw!r}")
        except ra.ExprSyntaxError as exc:
            raise ModelSyntaxError(f"line {lineno}: {exc}") from None
        except ModelSyntaxError as exc:
            raise ModelSyntaxError(f"line {lineno}: {exc}") from None
    return header, lets, axioms, races


_PRELUDE: list | None = None


def prelude() -> list[tuple[str, Expr]]:
    global _PRELUDE
    if _PRELUDE is None:
        _PRELUDE = parse_definitions(_read_cat("prelude.cat"))[1]
    return _PRELUDE


class Model:
    """A named consistency predicate.

    ``definitions`` are bound in order; the shared prelude precedes them.
    Compilation to an evaluation plan happens once, on first use.
    """

    def __init__(self, name: str, arch: str, definitions: Sequence[tuple[str, Expr]] = (),
                 axioms: Sequence[Axiom] = (), race_axioms: Sequence[Axiom] = ()):
        self.name = name
        self.arch = arch
        self.definitions = tuple(definitions)
        self.axioms = tuple(axioms)
        self.race_axioms = tuple(race_axioms)
        names = [a.name for a in self.axioms + self.race_axioms]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate axiom names in {name}")
        self._plan = None
        self._slots: dict[str, int] = {}
        self._compile()  # fail fast on unresolved names

    @classmethod
    def from_text(cls, text: str, name: str | None = None) -> "Model":
        header, lets, axioms, races = parse_definitions(text)
        return cls(name or header.get("model", "model"), header.get("arch", "SC").upper(), lets, axioms, races)

    def to_text(self) -> str:
        lines = [f"model {self.name}", f"arch {self.arch}"]
        lines += [f"let {n} = {show(e)}" for n, e in self.definitions]
        lines += [str(a) for a in self.axioms]
        lines += ["race-" + str(a) for a in self.race_axioms]
        return "\n".join(lines) + "\n"

    def _compile(self) -> None:
        types = env_types()
        plan = ra.Plan(list(types))
        comp = ra.Compiler(plan, types, PLUGINS)
        for name, expr in list(prelude()) + list(self.definitions):
            typ = comp.type_of(expr)
            comp.bind(name, comp.compile(expr), typ)
        for ax in self.axioms + self.race_axioms:
            if comp.type_of(ax.body) != ra.REL:
                raise TypeError(f"axiom {ax.name} is not over a relation")
            self._slots[ax.name] = comp.compile(ax.body)
        self._bound = dict(comp.bound)
        self._types = dict(comp.types)
        self._plan = plan

    # -- derived models -------------------------------------------------------

    def with_axioms(self, extra: Iterable[Axiom], name: str | None = None) -> "Model":
        return Model(name or self.name, self.arch, self.definitions, self.axioms + tuple(extra), self.race_axioms)

    def without_axioms(self, drop: Iterable[str], name: str | None = None) -> "Model":
        drop = set(drop)
        return Model(name or self.name, self.arch, self.definitions,
                     [a for a in self.axioms if a.name not in drop], self.race_axioms)

    def with_definitions(self, defs: Iterable[tuple[str, Expr]], name: str | None = None) -> "Model":
        return Model(name or self.name, self.arch, self.definitions + tuple(defs), self.axioms, self.race_axioms)

    # -- evaluation -----------------------------------------------------------

    def accepts(self, arch: str) -> bool:
        return arch in _ACCEPTS.get(self.arch, {self.arch})

    def _state(self, x: Execution):
        if not self.accepts(x.arch):
            raise ArchError(f"model {self.name} ({self.arch}) cannot check a {x.arch} execution")
        return self._plan.new_state(x.n, x.env())

    def relation(self, x: Execution, name: str):
        """Value of a named definition (or environment entry) on ``x``."""
        if name not in self._bound:
            raise NameError(f"unresolved name {name!r}")
        st = self._state(x)
        v = self._plan.value(st, x.n, self._bound[name])
        return v if self._types.get(name) == ra.SET else ra.Rel(x.n, v)

    def holds(self, x: Execution, axiom: str, _state=None) -> bool:
        st = _state if _state is not None else self._state(x)
        ax = next(a for a in self.axioms + self.race_axioms if a.name == axiom)
        return _HOLDS[ax.shape](self._plan.value(st, x.n, self._slots[ax.name]))

    def violated(self, x: Execution) -> list[str]:
        st = self._state(x)
        n = x.n
        return [a.name for a in self.axioms if not _HOLDS[a.shape](self._plan.value(st, n, self._slots[a.name]))]

    def is_consistent(self, x: Execution) -> bool:
        st = self._state(x)
        n = x.n
        for a in self.axioms:
            if not _HOLDS[a.shape](self._plan.value(st, n, self._slots[a.name])):
                return False
        return True

    def is_race_free(self, x: Execution) -> bool:
        st = self._state(x)
        return all(_HOLDS[a.shape](self._plan.value(st, x.n, self._slots[a.name])) for a in self.race_axioms)

    def check(self, x: Execution) -> Verdict:
        st = self._state(x)
        n = x.n
        bad = tuple(a.name for a in self.axioms
                    if not _HOLDS[a.shape](self._plan.value(st, n, self._slots[a.name])))
        racy = None
        if self.race_axioms and not bad:
            racy = not all(_HOLDS[a.shape](self._plan.value(st, n, self._slots[a.name]))
                           for a in self.race_axioms)
        return Verdict(not bad, bad, racy)

    def __repr__(self) -> str:
        return f"<Model {self.name}>"


def check(m: Model, x: Execution) -> Verdict:
    return m.check(x)


# ---------------------------------------------------------------------------
# shared axioms


def axiom_weak_isol() -> Axiom:
    return Axiom.parse("acyclic", "WeakIsol", "weaklift(com, stxn)")


def axiom_strong_isol() -> Axiom:
    return Axiom.parse("acyclic", "StrongIsol", "stronglift(com, stxn)")


def axiom_txn_order(hb_expr: str = "hb") -> Axiom:
    return Axiom.parse("acyclic", "TxnOrder", f"stronglift({hb_expr}, stxn)")


def axiom_cr_order() -> Axiom:
    return Axiom.parse("acyclic", "CROrder", "weaklift(po | com, scr)")


# ---------------------------------------------------------------------------
# registry

_FILES = {
    "sc": "sc.cat", "tsc": "tsc.cat",
    "x86": "x86.cat", "x86-tm": "x86-tm.cat",
    "power": "power.cat", "power-tm": "power-tm.cat",
    "armv8": "armv8.cat", "armv8-tm": "armv8-tm.cat",
    "cpp": "cpp.cat", "cpp-tm": "cpp-tm.cat",
}
_CACHE: dict[str, Model] = {}


def load_model_file(path) -> Model:
    with open(path) as fh:
        return Model.from_text(fh.read())


def get_model(name: str) -> Model:
    """Look a model up by name.

    Besides the file-backed names, ``sc+strongisol``, ``sc+weakisol`` and a
    ``+crorder`` suffix on any model are understood.
    """
    key = name.lower()
    if key in _CACHE:
        return _CACHE[key]
    if key.endswith("+crorder"):
        m = get_model(key[: -len("+crorder")]).with_axioms([axiom_cr_order()], name=key)
    elif key == "sc+strongisol":
        m = get_model("sc").with_axioms([axiom_strong_isol()], name=key)
    elif key == "sc+weakisol":
        m = get_model("sc").with_axioms([axiom_weak_isol()], name=key)
    elif key in _FILES:
        m = Model.from_text(_read_cat(_FILES[key]), name=key)
    else:
        raise KeyError(f"unknown model {name!r}; known: {', '.join(model_names())}")
    _CACHE[key] = m
    return m


def model_names() -> list[str]:
    return list(_FILES) + ["sc+strongisol", "sc+weakisol"]


def model_sc() -> Model:
    return get_model("sc")


def model_tsc() -> Model:
    return get_model("tsc")


def model_x86_tm() -> Model:
    return get_model("x86-tm")


def model_power_tm() -> Model:
    return get_model("power-tm")


def model_armv8_tm() -> Model:
    return get_model("armv8-tm")


def model_cpp_tm() -> Model:
    return get_model("cpp-tm")


BASELINES = {"x86-tm": "x86", "power-tm": "power", "armv8-tm": "armv8", "cpp-tm": "cpp", "tsc": "sc"}


def baseline_of(name: str) -> Model:
    return get_model(BASELINES[name.lower()])


__all__ = [
    "Axiom", "Model", "Verdict", "ArchError", "ModelSyntaxError", "check", "get_model", "model_names",
    "model_sc", "model_tsc", "model_x86_tm", "model_power_tm", "model_armv8_tm", "model_cpp_tm",
    "axiom_weak_isol", "axiom_strong_isol", "axiom_txn_order", "axiom_cr_order", "baseline_of",
    "load_model_file", "BASELINES",
]
