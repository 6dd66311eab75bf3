"""Graphviz text for the static, ordered and behavioral views of a model.

Only the graph is described; layout is left to ``dot`` or any other tool
that reads the format.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby

from .behavior import BModel
from .core import SModel, Thimac
from .statics import DModel

KIND_COLORS = {
    "init": "#d9d9d9",
    "ready": "#b3de69",
    "stimulus": "#80b1d3",
    "shift": "#fdb462",
    "condition": "#fb8072",
    "part": "#ffffb3",
}


@dataclass(frozen=True)
class DiagramDoc:
    text: str
    kind: str


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def render_s(m: SModel) -> DiagramDoc:
    """Nested clusters per thimac, one node per stage; flows solid, triggers dashed."""
    out = [f"digraph {_q(m.name)} {{", "  compound=true;", "  node [shape=box, fontsize=10];"]

    def cluster(t: Thimac, depth: int) -> None:
        pad = "  " * depth
        out.append(f"{pad}subgraph {_q('cluster_' + t.id)} {{")
        out.append(f"{pad}  label={_q(t.display)};")
        for s in t.stages:
            out.append(f"{pad}  {_q(s.id)} [label={_q(s.kind.value)}];")
        for sub in t.subthimacs:
            cluster(sub, depth + 1)
        out.append(f"{pad}}}")

    cluster(m.root, 1)
    for a in m.flows:
        attrs = f" [label={_q(a.annotation)}]" if a.annotation else ""
        out.append(f"  {_q(a.src)} -> {_q(a.dst)}{attrs};")
    for t in m.triggers:
        out.append(f"  {_q(t.src)} -> {_q(t.dst)} [style=dashed];")
    out.append("}")
    return DiagramDoc("\n".join(out) + "\n", "s-model")


def render_d(d: DModel) -> DiagramDoc:
    """One node per static change, colored by kind; one edge per precedence pair."""
    out = [
        f"digraph {_q(d.source.name + '_D')} {{",
        "  node [shape=box, style=\"rounded,filled\", fontsize=10];",
    ]
    for c in d.changes:
        color = KIND_COLORS.get(c.kind, "#ffffff")
        out.append(f"  {_q(c.id)} [label={_q(c.label or c.id)}, fillcolor={_q(color)}];")
    for a, b in sorted(d.precedence):
        out.append(f"  {_q(a)} -> {_q(b)};")
    out.append("}")
    return DiagramDoc("\n".join(out) + "\n", "d-model")


def render_b(b: BModel, name: str = "run") -> DiagramDoc:
    """Events ranked left to right by tick, linked along their causal chains."""
    out = [
        f"digraph {_q(name + '_B')} {{",
        "  rankdir=LR;",
        "  node [shape=box, fontsize=10];",
    ]
    for e in b.events:
        out.append(f"  {_q(e.id)} [label={_q(f'{e.id} @{e.tick}: {e.name}')}];")
    groups = [(tick, [e.id for e in evs]) for tick, evs in groupby(b.events, key=lambda e: e.tick)]
    for tick, ids in groups:
        members = " ".join(_q(i) + ";" for i in ids)
        out.append(f"  subgraph {_q(f't{tick}')} {{ rank=same; {members} }}")
    # invisible spine keeps tick groups in order even where no causal edge does
    for (_, left), (_, right) in zip(groups, groups[1:]):
        out.append(f"  {_q(left[0])} -> {_q(right[0])} [style=invis];")
    for e in b.events:
        if e.cause:
            out.append(f"  {_q(e.cause)} -> {_q(e.id)};")
    out.append("}")
    return DiagramDoc("\n".join(out) + "\n", "b-model")
