"""Graphviz DOT rendering of executions and witness pairs.

Threads are drawn as columns, successful transactions as solid boxes,
critical regions as dashed boxes.  Only immediate ``po`` and ``co`` edges
are drawn; ``fr`` is derived.
"""

from __future__ import annotations

from . import relalg as ra
from .execution import Execution, _fr_rows

EDGE_STYLE = {
    "po": 'color=black',
    "rf": 'color=red',
    "co": 'color=blue',
    "fr": 'color=orange',
    "addr": 'color=darkgreen, style=dashed',
    "data": 'color=darkgreen, style=dashed',
    "ctrl": 'color=darkgreen, style=dashed',
    "rmw": 'color=purple, style=bold',
}


def _immediate(rows) -> tuple:
    return ra.r_diff(rows, ra.r_seq(rows, rows))


def _quote(s: str) -> str:
    return '"' + s.replace('"', r'\"') + '"'


def _body(x: Execution, prefix: str = "", indent: str = "  ") -> list[str]:
    names = x.names
    vals = x.values()
    out = []

    def node(i: int) -> str:
        return _quote(prefix + names[i])

    boxes = {}
    for k, cls in enumerate(x.txn_classes("stxn")):
        for e in cls:
            boxes[e] = ("txn", k)
    for k, cls in enumerate(ra.per_classes(x.rels["scr"])):
        for e in ra.bits(cls):
            boxes.setdefault(e, ("cr", k))
    for t, th in enumerate(x.threads()):
        out.append(f"{indent}subgraph {_quote('cluster_' + prefix + 'T' + str(t))} {{")
        out.append(f"{indent}  style=invis;")
        current = None
        for e in th:
            box = boxes.get(e)
            if box != current:
                if current is not None:
                    out.append(f"{indent}  }}")
                if box is not None:
                    style = "solid" if box[0] == "txn" else "dashed"
                    out.append(f"{indent}  subgraph {_quote('cluster_' + prefix + box[0] + str(box[1]))} {{")
                    out.append(f"{indent}    style={style}; color=gray40;")
                current = box
            ev = x.events[e]
            label = f"{names[e]}: {ev.label()}"
            if ev.is_memory:
                label += f"={vals[e]}"
            pad = "    " if current is not None else "  "
            out.append(f"{indent}{pad}{node(e)} [label={_quote(label)}];")
        if current is not None:
            out.append(f"{indent}  }}")
        out.append(f"{indent}}}")
    rels = {
        "po": _immediate(x.rels["po"]),
        "rf": x.rels["rf"],
        "co": _immediate(x.rels["co"]),
        "fr": _fr_rows(x),
        "rmw": x.rels["rmw"],
        "addr": x.rels["addr"],
        "data": x.rels["data"],
        "ctrl": _immediate(x.rels["ctrl"]),
    }
    for name, rows in rels.items():
        attrs = EDGE_STYLE[name]
        for a, b in ra.rows_pairs(rows):
            lbl = "" if name == "po" else f", label={name}"
            out.append(f"{indent}{node(a)} -> {node(b)} [{attrs}{lbl}];")
    return out


def to_dot(x: Execution, title: str = "") -> str:
    """DOT text for one execution."""
    lines = ["digraph execution {", "  node [shape=plaintext, fontname=monospace];",
             "  rankdir=TB;"]
    if title:
        lines.append(f"  label={_quote(title)};")
    lines += _body(x)
    lines.append("}")
    return "\n".join(lines) + "\n"


def pair_to_dot(x: Execution, y: Execution, pi_pairs, title: str = "") -> str:
    """Two executions side by side with dotted ``pi`` arrows from X to Y."""
    lines = ["digraph witness {", "  node [shape=plaintext, fontname=monospace];",
             "  compound=true; newrank=true;"]
    if title:
        lines.append(f"  label={_quote(title)};")
    lines.append('  subgraph "cluster_X" {\n    label="X";')
    lines += _body(x, "X_", "    ")
    lines.append("  }")
    lines.append('  subgraph "cluster_Y" {\n    label="Y";')
    lines += _body(y, "Y_", "    ")
    lines.append("  }")
    for a, b in pi_pairs:
        lines.append(f"  {_quote('X_' + x.names[a])} -> {_quote('Y_' + y.names[b])} "
                     "[style=dotted, color=gray50, constraint=false];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def witness_to_dot(w) -> str:
    return pair_to_dot(w.x, w.y, w.pi.pairs(), title=w.summary())
