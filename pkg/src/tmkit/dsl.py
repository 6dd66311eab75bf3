"""The ``.tm`` model language and the dotted flow-string notation.

A flow string such as ``Flow.create.process.release.transfer.output`` lists
the stages of one path inside a thimac; the arrows between stages are the
dots. Model files nest thimac blocks and connect stages across thimacs with
``flow`` and ``trigger`` statements. See ``docs/grammar.ebnf``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from .core import (
    FlowArc,
    ModelBuilder,
    ModelError,
    SModel,
    Stage,
    StageKind,
    Thimac,
    maximal_paths,
    split_stage_id,
    stage_id,
)

FLOW_PREFIX = "Flow"
FLOW_TOKENS = frozenset(
    {"create", "process", "release", "transfer", "receive", "arrive", "accept", "input", "output"}
)


class FlowStringError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class SourceDiagnostic:
    line: int
    column: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.code}: {self.message}"


class DslError(Exception):
    """A model file could not be parsed; carries every diagnostic found."""

    def __init__(self, diagnostics: list[SourceDiagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))

    @property
    def code(self) -> str:
        return self.diagnostics[0].code


def flow_kinds(text: str) -> list[StageKind]:
    """Tokenize a flow string into stage kinds."""
    if not text or not text.strip():
        raise FlowStringError("EmptyFlowString", "flow string is empty")
    parts = text.strip().split(".")
    if parts[0] != FLOW_PREFIX:
        raise FlowStringError("MissingPrefix", f"flow string must start with {FLOW_PREFIX!r}")
    tokens = parts[1:]
    if not tokens:
        raise FlowStringError("EmptyFlowString", "flow string has no stages")
    kinds: list[StageKind] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok not in FLOW_TOKENS:
            raise FlowStringError("UnknownToken", f"unknown token {tok!r}")
        if tok in ("input", "output"):
            raise FlowStringError("MisplacedDirection", f"{tok!r} must follow 'transfer'")
        if tok == "transfer":
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if nxt not in ("input", "output"):
                raise FlowStringError("MissingDirection", "'transfer' must be followed by input or output")
            kinds.append(StageKind.TRANSFER_IN if nxt == "input" else StageKind.TRANSFER_OUT)
            i += 2
            continue
        kinds.append(StageKind(tok))
        i += 1
    return kinds


def parse_flow_string(text: str, owner: str) -> tuple[list[Stage], list[FlowArc]]:
    """Stages of one path owned by ``owner`` plus the arcs joining them.

    Stage ids are numbered per kind from zero. The result is not checked
    against the flow templates; ``validate_s`` does that.
    """
    kinds = flow_kinds(text)
    counts: dict[StageKind, int] = {}
    stages = []
    for k in kinds:
        n = counts.get(k, 0)
        counts[k] = n + 1
        stages.append(Stage(stage_id(owner, k, n), k, owner))
    arcs = [FlowArc(a.id, b.id) for a, b in zip(stages, stages[1:])]
    return stages, arcs


def format_flow_string(kinds) -> str:
    return ".".join([FLOW_PREFIX, *(t for k in kinds for t in k.tokens)])


def to_flow_strings(m: SModel) -> list[str]:
    """One flow string per maximal intra-thimac path, in model order."""
    paths, _ = maximal_paths(m)
    return [format_flow_string(m.stage(s).kind for s in p) for p in paths]


# ---------------------------------------------------------------------------
# model files

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_KIND = r"(?:create|process|release|receive|arrive|accept|transfer\((?:input|output)\))"
_REF = rf"{_IDENT}(?:\.{_IDENT})*:{_KIND}(?:#\d+)?"
_STRING = r'"(?:[^"\\]|\\.)*"'

_STATEMENTS = [
    ("model", re.compile(rf"model\s+(?P<name>{_IDENT})")),
    ("thimac", re.compile(rf"thimac\s+(?P<name>{_IDENT})\s*\{{")),
    ("close", re.compile(r"\}")),
    ("label", re.compile(rf"label\s+(?P<text>{_STRING})")),
    ("role", re.compile(rf"role\s+(?P<name>{_IDENT})")),
    ("stage", re.compile(rf"stage\s+(?P<kind>{_KIND})")),
    ("path", re.compile(r"path\s+(?P<flow>\S+)")),
    ("flow", re.compile(rf"flow\s+(?P<src>{_REF})\s*->\s*(?P<dst>{_REF})(?:\s+(?P<text>{_STRING}))?")),
    ("trigger", re.compile(rf"trigger\s+(?P<src>{_REF})\s*->\s*(?P<dst>{_REF})")),
]


def _strip_comment(line: str) -> str:
    in_str = False
    escaped = False
    for i, ch in enumerate(line):
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#" and (i == 0 or line[i - 1].isspace()):
            return line[:i]
    return line


def _ref_to_stage_id(ref: str) -> str:
    owner, rest = ref.split(":", 1)
    kind, _, index = rest.partition("#")
    return stage_id(owner, StageKind.parse(kind), int(index or 0))


def _stage_ref(sid: str) -> str:
    try:
        owner, kind, index = split_stage_id(sid)
    except ValueError:
        return sid
    return f"{owner}:{kind.value}" + (f"#{index}" if index else "")


def try_parse_model(text: str) -> tuple[Optional[SModel], list[SourceDiagnostic]]:
    """Parse model source; never raises. Returns ``(model, [])`` or ``(None, diags)``."""
    diags: list[SourceDiagnostic] = []

    def err(line: int, col: int, code: str, msg: str) -> None:
        diags.append(SourceDiagnostic(line, col, code, msg))

    name: Optional[str] = None
    builder: Optional[ModelBuilder] = None
    stack: list[tuple[str, int]] = []
    arcs: list[tuple[str, int, int, str, str, Optional[str]]] = []
    saw_statement = False
    skip_depth = 0  # blocks opened while the parser is recovering

    for lineno, raw in enumerate(text.split("\n"), start=1):
        body = _strip_comment(raw).rstrip()
        stripped = body.lstrip()
        if not stripped:
            continue
        col = len(body) - len(stripped) + 1
        saw_statement = True
        kind = match = None
        for k, pattern in _STATEMENTS:
            match = pattern.fullmatch(stripped)
            if match:
                kind = k
                break
        if kind is None:
            word = stripped.split()[0]
            if word in {k for k, _ in _STATEMENTS}:
                err(lineno, col, "SyntaxError", f"malformed {word!r} statement")
            else:
                err(lineno, col, "SyntaxError", f"unexpected {word!r}")
            if stripped.endswith("{"):
                skip_depth += 1
            continue

        if kind == "model":
            if name is not None or builder is not None:
                err(lineno, col, "SyntaxError", "'model' header must appear once, first")
            else:
                name = match["name"]
            continue
        if name is None and builder is None:
            err(lineno, col, "MissingHeader", "file must start with 'model <name>'")
            name = ""

        if kind == "thimac":
            seg = match["name"]
            if skip_depth:
                skip_depth += 1
                continue
            if not stack:
                if builder is not None:
                    err(lineno, col, "SyntaxError", "only one top-level thimac is allowed")
                    skip_depth += 1
                    continue
                builder = ModelBuilder(seg)
                stack.append((seg, lineno))
                continue
            parent = stack[-1][0]
            try:
                tid = builder.thimac(parent, seg)
            except ModelError:
                err(lineno, col, "DuplicateId", f"duplicate thimac id {parent}.{seg!s}")
                skip_depth += 1
                continue
            stack.append((tid, lineno))
        elif kind == "close":
            if skip_depth:
                skip_depth -= 1
            elif stack:
                stack.pop()
            else:
                err(lineno, col, "UnbalancedBrace", "'}' without an open thimac block")
        elif kind in ("flow", "trigger"):
            note = json.loads(match["text"]) if kind == "flow" and match["text"] else None
            arcs.append((kind, lineno, col, match["src"], match["dst"], note))
        elif skip_depth:
            continue
        elif not stack:
            err(lineno, col, "SyntaxError", f"{kind!r} statement outside a thimac block")
        else:
            owner = stack[-1][0]
            if kind == "label":
                builder.set_label(owner, json.loads(match["text"]))
            elif kind == "role":
                builder.set_role(owner, match["name"])
            elif kind == "stage":
                builder.stage(owner, StageKind.parse(match["kind"]))
            elif kind == "path":
                try:
                    kinds = flow_kinds(match["flow"])
                except FlowStringError as exc:
                    err(lineno, col + 5, exc.code, str(exc))
                else:
                    builder.path(owner, kinds)

    for tid, lineno in stack:
        err(lineno, 1, "UnbalancedBrace", f"thimac block {tid!r} is never closed")
    if not saw_statement:
        err(1, 1, "EmptyModel", "model file has no statements")
    elif builder is None and not diags:
        err(1, 1, "EmptyModel", "model file declares no thimac")
    if diags:
        return None, diags

    seen: set[tuple[str, str, str]] = set()
    for kind, lineno, col, src_ref, dst_ref, note in arcs:
        src, dst = _ref_to_stage_id(src_ref), _ref_to_stage_id(dst_ref)
        bad = [r for r, s in ((src_ref, src), (dst_ref, dst)) if not builder.has_stage(s)]
        if bad:
            err(lineno, col, "UnresolvedReference", f"no stage {bad[0]!r}")
            continue
        if (kind, src, dst) in seen:
            err(lineno, col, "DuplicateArc", f"duplicate {kind} {src_ref} -> {dst_ref}")
            continue
        seen.add((kind, src, dst))
        if kind == "flow":
            builder.flow(src, dst, note)
        else:
            builder.trigger(src, dst)
    if diags:
        return None, diags
    try:
        return builder.build(name=name), []
    except ModelError as exc:
        return None, [SourceDiagnostic(1, 1, type(exc).__name__, str(exc))]


def parse_model(text: str) -> SModel:
    """Parse model source, raising :class:`DslError` with positions on failure."""
    model, diags = try_parse_model(text)
    if model is None:
        raise DslError(diags)
    return model


def _chains(t: Thimac, path_arcs: set[tuple[str, str]]) -> list[list[Stage]]:
    """Split a thimac's stage list into runs joined by consecutive plain arcs."""
    runs: list[list[Stage]] = []
    for s in t.stages:
        if runs and (runs[-1][-1].id, s.id) in path_arcs:
            runs[-1].append(s)
        else:
            runs.append([s])
    return runs


def print_model(m: SModel) -> str:
    """Render a model as ``.tm`` source.

    Stage order is preserved. Arcs that join consecutive stages of a thimac
    are folded into ``path`` statements; the rest are emitted sorted.
    Stage ids must be canonical (``owner:kind#index``) to survive a reparse.
    """
    plain = {(a.src, a.dst) for a in m.flows if a.annotation is None}
    folded: set[tuple[str, str]] = set()
    lines = [f"model {m.name}", ""]

    def emit(t: Thimac, indent: int) -> None:
        pad = "  " * indent
        lines.append(f"{pad}thimac {t.segment} {{")
        inner = pad + "  "
        if t.label:
            lines.append(f"{inner}label {json.dumps(t.label, ensure_ascii=False)}")
        if t.role:
            lines.append(f"{inner}role {t.role}")
        for run in _chains(t, plain):
            folded.update((a.id, b.id) for a, b in zip(run, run[1:]))
            lines.append(f"{inner}path {format_flow_string(s.kind for s in run)}")
        for sub in t.subthimacs:
            emit(sub, indent + 1)
        lines.append(f"{pad}}}")

    emit(m.root, 0)
    rest = [a for a in m.flows if (a.src, a.dst) not in folded]
    if rest or m.triggers:
        lines.append("")
    for a in sorted(rest, key=lambda a: (a.src, a.dst)):
        note = f" {json.dumps(a.annotation, ensure_ascii=False)}" if a.annotation is not None else ""
        lines.append(f"flow {_stage_ref(a.src)} -> {_stage_ref(a.dst)}{note}")
    for t in sorted(m.triggers, key=lambda a: (a.src, a.dst)):
        lines.append(f"trigger {_stage_ref(t.src)} -> {_stage_ref(t.dst)}")
    return "\n".join(lines) + "\n"
