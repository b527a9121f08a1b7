"""Command-line front end: ``txmm check|candidates|synth|meta|convert|graph``.

Exit status is 0 on success, 1 when a verdict disagrees with an ``expect:``
annotation and 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import dot, litmus, metatheory, report, synth
from .execution import ParseError, deserialize, serialize
from .models import ArchError, ModelSyntaxError, get_model

DEFAULT_MODEL = {"SC": "sc", "TSC": "tsc", "X86": "x86-tm", "POWER": "power-tm",
                 "ARMV8": "armv8-tm", "CPP": "cpp-tm"}
SUFFIXES = (".exec", ".litmus")


class InputError(Exception):
    pass


@dataclass
class Record:
    path: str
    model: str
    verdict: str
    expected: str | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.expected is None or _matches(self.verdict, self.expected)

    def text(self) -> str:
        line = f"{self.path}\t{self.model}\t{self.verdict}"
        if self.expected is not None:
            line += "\tok" if self.ok else f"\tMISMATCH (expected {self.expected})"
        return line

    def json(self) -> str:
        return json.dumps({"path": self.path, "model": self.model, "verdict": self.verdict,
                           "expected": self.expected, "ok": self.ok}, sort_keys=True)


def _split_verdict(text: str) -> tuple[str, frozenset | None]:
    word, _, rest = text.partition(":")
    axioms = frozenset(a.strip() for a in rest.split(",") if a.strip()) if rest else None
    return word.strip().split()[0].lower(), axioms


def _matches(got: str, want: str) -> bool:
    gw, ga = _split_verdict(got)
    ww, wa = _split_verdict(want)
    return gw == ww and (wa is None or wa == ga)


def _expects(text: str) -> list[tuple[str, str]]:
    out = []
    for ln in text.splitlines():
        s = ln.strip().lstrip("#").strip()
        if s.startswith("expect:"):
            body = s[len("expect:"):].strip()
            model, _, verdict = body.partition(" ")
            if not verdict:
                raise InputError(f"malformed expect line: {ln.strip()!r}")
            out.append((model, verdict.strip()))
    return out


def _read(path: Path):
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        if path.suffix == ".litmus":
            return text, litmus.parse(text)
        return text, deserialize(text)
    except ParseError as exc:
        raise InputError(f"{path}: {exc}") from None


def _model(name: str):
    try:
        return get_model(name)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    except ModelSyntaxError as exc:
        raise InputError(f"model {name}: {exc}") from None


def verdict_text(obj, model) -> str:
    if isinstance(obj, litmus.LitmusTest):
        return litmus.evaluate(obj, model).status.capitalize()
    return str(model.check(obj))


def check_file(path: str, model_name: str | None = None) -> list[Record]:
    p = Path(path)
    text, obj = _read(p)
    expects = _expects(text)
    if model_name:
        wanted = [(model_name, next((v for m, v in expects if m == model_name), None))]
    elif expects:
        wanted = list(expects)
    else:
        wanted = [(DEFAULT_MODEL[obj.arch], None)]
    out = []
    for name, exp in wanted:
        try:
            v = verdict_text(obj, _model(name))
        except ArchError as exc:
            raise InputError(f"{path}: {exc}") from None
        out.append(Record(str(path), name, v, exp))
    return out


def _check_job(args):
    path, model = args
    try:
        return check_file(path, model), None
    except InputError as exc:
        return [], str(exc)


def _expand(paths) -> list[str]:
    out = []
    for p in paths:
        q = Path(p)
        if q.is_dir():
            out += sorted(str(f) for f in q.rglob("*") if f.suffix in SUFFIXES)
        else:
            out.append(p)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(a) -> int:
    files = _expand(a.paths)
    if not files:
        raise InputError("no input files")
    jobs = [(f, a.model) for f in files]
    if a.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(a.jobs) as pool:
            results = list(pool.map(_check_job, jobs))
    else:
        results = [_check_job(j) for j in jobs]
    status = 0
    for recs, err in results:
        if err:
            print(f"error: {err}", file=sys.stderr)
            status = 2
            continue
        for r in recs:
            print(r.json() if a.format == "jsonl" else r.text())
            if not r.ok and status == 0:
                status = 1
    if a.witnesses and len(files) == 1 and files[0].endswith(".litmus"):
        _, t = _read(Path(files[0]))
        v = litmus.evaluate(t, _model(a.model or DEFAULT_MODEL[t.arch]))
        for i, c in enumerate(v.witnesses):
            print(f"# witness {i}")
            print(serialize(c.execution), end="")
    return status


def cmd_candidates(a) -> int:
    _, t = _read(Path(a.path))
    if not isinstance(t, litmus.LitmusTest):
        raise InputError("candidates needs a .litmus file")
    m = _model(a.model or DEFAULT_MODEL[t.arch])
    cands = litmus.candidates(t)
    print(f"# {litmus.candidate_count(t)} raw candidates, {len(cands)} well-formed, model {m.name}")
    for i, c in enumerate(cands):
        v = m.check(c.execution)
        regs = " ".join(f"{tid}:{r}={val}" for (tid, r), val in sorted(c.registers.items()))
        mem = " ".join(f"{k}={val}" for k, val in sorted(c.memory.items()))
        oks = " ".join(f"{k}={val}" for k, val in sorted(c.ok.items()))
        post = "post" if c.satisfies(t.post) else "-"
        fields = [str(i), str(v), post, regs, mem, oks]
        if a.format == "jsonl":
            print(json.dumps({"index": i, "verdict": str(v), "post": post == "post", "registers": regs,
                              "memory": mem, "ok": oks}, sort_keys=True))
        else:
            print("\t".join(fields))
    return 0


def cmd_synth(a) -> int:
    m = _model(a.model)
    base = _model(a.baseline) if a.baseline else None
    sig = synth.Signature(arch=m.arch, max_events=a.max_events, min_events=a.min_events, edge_fences=False)
    t0 = time.perf_counter()
    forbid = synth.min_inconsistent(m, base, sig=sig)
    allow = [] if a.no_allow else synth.max_consistent(m, forbid, edge_fences=False)
    sizes = range(a.min_events, a.max_events + 1)
    rows = synth.summarize(forbid, allow, m.arch, sizes)
    out = Path(a.out) / f"{m.name}-{a.max_events}"
    paths = report.write_suite(out, m.name, forbid, allow, rows)
    print("arch\tevents\tforbid\tallow")
    for r in rows:
        print(f"{r.arch}\t{r.events}\t{r.forbid}\t{r.allow}")
    print(f"# wrote {out} ({len(forbid)} forbid, {len(allow)} allow, "
          f"{time.perf_counter() - t0:.1f}s); figures {paths['counts'].name}, {paths['txns'].name}",
          file=sys.stderr)
    return 0


def cmd_meta(a) -> int:
    arch = a.arch.upper()
    try:
        if a.check == "mono":
            if arch not in metatheory.ARCH_MODELS:
                raise metatheory.UnsupportedArch(arch)
            r = metatheory.check_monotonicity(_model(metatheory.ARCH_MODELS[arch]), a.bound,
                                              variant=a.variant)
        elif a.check == "compile":
            r = metatheory.check_compilation(arch, a.bound)
        else:
            r = metatheory.check_lock_elision(arch, fixed=a.fixed, bound=a.bound, time_limit=a.time_limit)
    except metatheory.UnsupportedArch as exc:
        raise InputError(f"unsupported architecture for this check: {exc}") from None
    print(r)
    if r.found:
        w = r.witness
        print("# X")
        print(serialize(w.x), end="")
        print("# Y")
        print(serialize(w.y), end="")
        print("# pi")
        for x_e, y_e in w.pi.pairs():
            print(f"{w.x.names[x_e]}\t{w.y.names[y_e]}")
        if a.out:
            report.write_witness(a.out, w)
            print(f"# bundle written to {a.out}", file=sys.stderr)
    return 0


def cmd_convert(a) -> int:
    _, obj = _read(Path(a.path))
    if isinstance(obj, litmus.LitmusTest):
        if a.to == "asm":
            print(litmus.render_asm(obj), end="")
            return 0
        m = _model(a.model) if a.model else None
        hits = [c for c in litmus.candidates(obj) if c.satisfies(obj.post)]
        if m is not None:
            hits = [c for c in hits if m.is_consistent(c.execution)]
        for i, c in enumerate(hits):
            if i:
                print()
            print(serialize(c.execution), end="")
        return 0
    t = litmus.to_litmus(obj, observers=a.observers)
    if a.to == "asm":
        print(litmus.render_asm(t), end="")
    else:
        for w in t.warnings:
            print(f"# warning: {w}")
        print(t.to_text(), end="")
    return 0


def cmd_graph(a) -> int:
    _, obj = _read(Path(a.path))
    if isinstance(obj, litmus.LitmusTest):
        hits = [c for c in litmus.candidates(obj) if c.satisfies(obj.post)]
        if not hits:
            raise InputError("no candidate satisfies the postcondition")
        obj = hits[0].execution
    print(dot.to_dot(obj, title=Path(a.path).stem), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="txmm", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0, help="reserved; the core logic is deterministic")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="verdicts for executions and litmus tests")
    c.add_argument("paths", nargs="+", help=".exec/.litmus files or directories")
    c.add_argument("--model", help="model name; default: the file's expect lines or the arch's TM model")
    c.add_argument("--format", choices=("text", "jsonl"), default="text")
    c.add_argument("--witnesses", action="store_true", help="print witness executions (single litmus file)")
    c.add_argument("--jobs", type=int, default=1)
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("candidates", help="list candidate executions of a litmus test")
    c.add_argument("path")
    c.add_argument("--model")
    c.add_argument("--format", choices=("text", "jsonl"), default="text")
    c.set_defaults(func=cmd_candidates)

    c = sub.add_parser("synth", help="synthesize Forbid/Allow suites")
    c.add_argument("--model", required=True)
    c.add_argument("--baseline", help="non-transactional model for the differential Forbid set")
    c.add_argument("--max-events", type=int, default=3)
    c.add_argument("--min-events", type=int, default=1)
    c.add_argument("--out", default="suites")
    c.add_argument("--no-allow", action="store_true")
    c.set_defaults(func=cmd_synth)

    c = sub.add_parser("meta", help="metatheory counterexample search")
    c.add_argument("--check", choices=("mono", "compile", "elision"), required=True)
    c.add_argument("--arch", required=True)
    c.add_argument("--bound", type=int, default=2)
    c.add_argument("--fixed", action="store_true", help="ARMv8 lock with a trailing dmb")
    c.add_argument("--variant", choices=metatheory.MONO_VARIANTS, default="any")
    c.add_argument("--time-limit", type=float)
    c.add_argument("--out", help="directory for a witness bundle")
    c.set_defaults(func=cmd_meta)

    c = sub.add_parser("convert", help="execution to litmus test, or litmus test to executions")
    c.add_argument("path")
    c.add_argument("--to", choices=("text", "asm"), default="text")
    c.add_argument("--model", help="keep only executions consistent under this model")
    c.add_argument("--observers", action="store_true")
    c.set_defaults(func=cmd_convert)

    c = sub.add_parser("graph", help="DOT rendering")
    c.add_argument("path")
    c.set_defaults(func=cmd_graph)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    if getattr(a, "bound", 0) is not None and getattr(a, "bound", 0) < 0:
        parser.error("bounds must be non-negative")
    if getattr(a, "max_events", 1) < 0 or getattr(a, "min_events", 1) < 0:
        parser.error("bounds must be non-negative")
    try:
        return a.func(a)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
