"""Thinging-machine domain types, model construction and the flow grammar.

A model is a tree of thimacs. Each thimac owns an ordered list of stages
(the five generic actions, with reception optionally refined into arrive and
accept). Stages are joined by solid flow arcs and dashed trigger arcs.
"""

from __future__ import annotations

import enum
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional


class ModelError(Exception):
    """Raised when a model cannot be assembled."""


class DuplicateId(ModelError):
    pass


class UnresolvedReference(ModelError):
    pass


class StageKind(enum.Enum):
    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER_IN = "transfer(input)"
    TRANSFER_OUT = "transfer(output)"
    RECEIVE = "receive"
    ARRIVE = "arrive"
    ACCEPT = "accept"

    @property
    def base(self) -> str:
        """Action name without the direction tag."""
        return self.value.split("(")[0]

    @property
    def direction(self) -> Optional[str]:
        if self is StageKind.TRANSFER_IN:
            return "input"
        if self is StageKind.TRANSFER_OUT:
            return "output"
        return None

    @property
    def is_reception(self) -> bool:
        return self in RECEPTION

    @property
    def tokens(self) -> tuple[str, ...]:
        """Dotted flow-string tokens, e.g. ``("transfer", "output")``."""
        if self.direction:
            return (self.base, self.direction)
        return (self.base,)

    @classmethod
    def parse(cls, text: str) -> "StageKind":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown stage kind {text!r}") from None


RECEPTION = frozenset({StageKind.RECEIVE, StageKind.ARRIVE, StageKind.ACCEPT})
TRIGGERABLE = frozenset({StageKind.CREATE, StageKind.PROCESS})


@dataclass(frozen=True)
class TimeTag:
    """Logical tick plus an optional wall-clock label."""

    tick: int
    wall_label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.tick < 0:
            raise ValueError("tick must be non-negative")


@dataclass(frozen=True)
class Stage:
    id: str
    kind: StageKind
    owner: str

    @property
    def refined(self) -> bool:
        """True for the expanded arrive/accept form of reception."""
        return self.kind in (StageKind.ARRIVE, StageKind.ACCEPT)


@dataclass(frozen=True)
class Thimac:
    id: str
    label: str = ""
    stages: tuple[Stage, ...] = ()
    subthimacs: tuple["Thimac", ...] = ()
    role: Optional[str] = None
    time_sub: Optional[TimeTag] = None

    @property
    def segment(self) -> str:
        return self.id.rsplit(".", 1)[-1]

    @property
    def depth(self) -> int:
        return self.id.count(".")

    @property
    def display(self) -> str:
        return self.label or self.segment

    def walk(self) -> Iterator["Thimac"]:
        """Pre-order traversal of this thimac and its descendants."""
        yield self
        for sub in self.subthimacs:
            yield from sub.walk()


@dataclass(frozen=True)
class FlowArc:
    src: str
    dst: str
    annotation: Optional[str] = None

    @property
    def key(self) -> tuple[str, str, str]:
        return ("flow", self.src, self.dst)


@dataclass(frozen=True)
class TriggerArc:
    src: str
    dst: str

    @property
    def key(self) -> tuple[str, str, str]:
        return ("trigger", self.src, self.dst)


@dataclass(frozen=True)
class SModel:
    """The static model. Arcs are kept sorted by (src, dst)."""

    name: str
    root: Thimac
    flows: tuple[FlowArc, ...] = ()
    triggers: tuple[TriggerArc, ...] = ()
    _thimacs: dict = field(default=None, compare=False, repr=False)
    _stages: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        thimacs = {t.id: t for t in self.root.walk()}
        stages = {s.id: s for t in thimacs.values() for s in t.stages}
        object.__setattr__(self, "_thimacs", thimacs)
        object.__setattr__(self, "_stages", stages)

    def thimacs(self) -> list[Thimac]:
        return list(self._thimacs.values())

    def thimac(self, thimac_id: str) -> Thimac:
        return self._thimacs[thimac_id]

    def has_thimac(self, thimac_id: str) -> bool:
        return thimac_id in self._thimacs

    def stages(self) -> list[Stage]:
        """All stages in model order (pre-order thimacs, declared stage order)."""
        return list(self._stages.values())

    def stage(self, stage_id: str) -> Stage:
        return self._stages[stage_id]

    def has_stage(self, stage_id: str) -> bool:
        return stage_id in self._stages

    def owner(self, stage_id: str) -> Thimac:
        return self._thimacs[self._stages[stage_id].owner]

    def arcs(self) -> list["FlowArc | TriggerArc"]:
        return [*self.flows, *self.triggers]

    def parent_of(self, thimac_id: str) -> Optional[Thimac]:
        if "." not in thimac_id:
            return None
        return self._thimacs[thimac_id.rsplit(".", 1)[0]]


def build_model(
    root: Thimac,
    flows: Iterable[FlowArc] = (),
    triggers: Iterable[TriggerArc] = (),
    name: Optional[str] = None,
) -> SModel:
    """Assemble an SModel, resolving every id. Does not validate structure."""
    seen_thimacs: set[str] = set()
    seen_stages: set[str] = set()

    def visit(t: Thimac, parent: Optional[str]) -> None:
        if not t.id or any(not seg for seg in t.id.split(".")):
            raise ModelError(f"malformed thimac id {t.id!r}")
        if parent is not None and t.id.rsplit(".", 1)[0] != parent:
            raise ModelError(f"thimac {t.id!r} is not a child path of {parent!r}")
        if parent is None and "." in t.id:
            raise ModelError(f"root thimac id {t.id!r} must be a single segment")
        if t.id in seen_thimacs:
            raise DuplicateId(f"duplicate thimac id {t.id!r}")
        seen_thimacs.add(t.id)
        for s in t.stages:
            if s.owner != t.id:
                raise ModelError(f"stage {s.id!r} owner {s.owner!r} != {t.id!r}")
            if s.id in seen_stages:
                raise DuplicateId(f"duplicate stage id {s.id!r}")
            seen_stages.add(s.id)
        for sub in t.subthimacs:
            visit(sub, t.id)

    visit(root, None)

    def check(arcs, what):
        out = sorted(arcs, key=lambda a: (a.src, a.dst))
        keys = set()
        for a in out:
            for end in (a.src, a.dst):
                if end not in seen_stages:
                    raise UnresolvedReference(f"{what} endpoint {end!r} not found")
            if (a.src, a.dst) in keys:
                raise DuplicateId(f"duplicate {what} {a.src} -> {a.dst}")
            keys.add((a.src, a.dst))
        return tuple(out)

    return SModel(
        name=name or root.id,
        root=root,
        flows=check(flows, "flow"),
        triggers=check(triggers, "trigger"),
    )


def stage_id(owner: str, kind: StageKind, index: int) -> str:
    return f"{owner}:{kind.value}#{index}"


_STAGE_ID = re.compile(r"^(?P<owner>[^:]+):(?P<kind>[a-z]+(?:\((?:input|output)\))?)#(?P<index>\d+)$")


def split_stage_id(sid: str) -> tuple[str, StageKind, int]:
    """Inverse of :func:`stage_id`; raises ValueError on foreign ids."""
    m = _STAGE_ID.match(sid)
    if not m:
        raise ValueError(f"not a canonical stage id: {sid!r}")
    return m["owner"], StageKind.parse(m["kind"]), int(m["index"])


class ModelBuilder:
    """Mutable helper that assigns canonical stage ids and emits an SModel."""

    def __init__(self, root: str, label: str = "", role: Optional[str] = None):
        self._order: list[str] = [root]
        self._info: dict[str, dict] = {root: {"label": label, "role": role}}
        self._children: dict[str, list[str]] = defaultdict(list)
        self._stages: dict[str, list[Stage]] = defaultdict(list)
        self.flows: list[FlowArc] = []
        self.triggers: list[TriggerArc] = []
        self.root = root

    def thimac(self, parent: str, segment: str, label: str = "", role: Optional[str] = None) -> str:
        if parent not in self._info:
            raise UnresolvedReference(f"no thimac {parent!r}")
        tid = f"{parent}.{segment}"
        if tid in self._info:
            raise DuplicateId(f"duplicate thimac id {tid!r}")
        self._info[tid] = {"label": label, "role": role}
        self._children[parent].append(tid)
        self._order.append(tid)
        return tid

    def has(self, thimac_id: str) -> bool:
        return thimac_id in self._info

    def has_stage(self, sid: str) -> bool:
        owner = sid.split(":", 1)[0]
        return any(s.id == sid for s in self._stages.get(owner, ()))

    def set_label(self, thimac_id: str, label: str) -> None:
        self._info[thimac_id]["label"] = label

    def set_role(self, thimac_id: str, role: str) -> None:
        self._info[thimac_id]["role"] = role

    def stage(self, owner: str, kind: StageKind) -> str:
        if owner not in self._info:
            raise UnresolvedReference(f"no thimac {owner!r}")
        index = sum(1 for s in self._stages[owner] if s.kind is kind)
        sid = stage_id(owner, kind, index)
        self._stages[owner].append(Stage(sid, kind, owner))
        return sid

    def path(self, owner: str, kinds: Iterable[StageKind]) -> list[str]:
        """Append a chain of stages joined by consecutive flow arcs."""
        ids = [self.stage(owner, k) for k in kinds]
        self.flows.extend(FlowArc(a, b) for a, b in zip(ids, ids[1:]))
        return ids

    def flow(self, src: str, dst: str, annotation: Optional[str] = None) -> None:
        self.flows.append(FlowArc(src, dst, annotation))

    def trigger(self, src: str, dst: str) -> None:
        self.triggers.append(TriggerArc(src, dst))

    def build(self, name: Optional[str] = None) -> SModel:
        def make(tid: str) -> Thimac:
            info = self._info[tid]
            return Thimac(
                id=tid,
                label=info["label"],
                stages=tuple(self._stages[tid]),
                subthimacs=tuple(make(c) for c in self._children[tid]),
                role=info["role"],
            )

        return build_model(make(self.root), self.flows, self.triggers, name=name)


# ---------------------------------------------------------------------------
# structural validation

@dataclass(frozen=True)
class Diagnostic:
    rule: str
    message: str
    stages: tuple[str, ...] = ()

    def __str__(self) -> str:
        where = ", ".join(self.stages)
        return f"{self.rule}: {self.message}" + (f" [{where}]" if where else "")


RULE_PATH_SHAPE = "RULE_PATH_SHAPE"
RULE_PATH_CYCLE = "RULE_PATH_CYCLE"
RULE_CROSS_FLOW = "RULE_CROSS_FLOW"
RULE_TRIGGER_TARGET = "RULE_TRIGGER_TARGET"
RULE_TRIGGER_FLOW = "RULE_TRIGGER_FLOW"

_TOKEN = {
    StageKind.CREATE: "c",
    StageKind.PROCESS: "p",
    StageKind.RELEASE: "l",
    StageKind.TRANSFER_IN: "i",
    StageKind.TRANSFER_OUT: "o",
    StageKind.RECEIVE: "r",
    StageKind.ARRIVE: "a",
    StageKind.ACCEPT: "k",
}

# generative: create [process] [release transfer(output)]
# inbound:    transfer(input) reception [process] [release transfer(output)]
#             reception = receive [arrive [accept]] | arrive [accept]
_GENERATIVE = re.compile(r"cp?(?:lo)?")
_INBOUND = re.compile(r"i(?:r(?:ak?)?|ak?)p?(?:lo)?")
# a triggered process may open a path: process [release transfer(output)]
_TRIGGERED = re.compile(r"p(?:lo)?")


def matches_template(kinds: Iterable[StageKind], triggered_head: bool = False) -> bool:
    """Whether a stage sequence is a complete generative or inbound flow."""
    word = "".join(_TOKEN[k] for k in kinds)
    if _GENERATIVE.fullmatch(word) or _INBOUND.fullmatch(word):
        return True
    return triggered_head and bool(_TRIGGERED.fullmatch(word))


def is_path_arc(m: SModel, arc: FlowArc) -> bool:
    """Flow arcs that stay inside one machine and continue its path.

    A transfer(output) -> transfer(input) arc always leaves the machine, even
    when both ends share an owner (a self-loop through the environment).
    """
    src, dst = m.stage(arc.src), m.stage(arc.dst)
    if src.owner != dst.owner:
        return False
    return not (src.kind is StageKind.TRANSFER_OUT and dst.kind is StageKind.TRANSFER_IN)


def maximal_paths(m: SModel, limit: int = 100_000) -> tuple[list[list[str]], list[list[str]]]:
    """Enumerate maximal intra-thimac paths.

    Returns ``(paths, cycles)``: every source-to-sink stage sequence, and one
    representative per strongly connected loop found along the way.
    """
    succ: dict[str, list[str]] = defaultdict(list)
    indeg: dict[str, int] = defaultdict(int)
    for a in m.flows:
        if is_path_arc(m, a):
            succ[a.src].append(a.dst)
            indeg[a.dst] += 1
    order = {sid: i for i, sid in enumerate(m._stages)}
    for v in succ.values():
        v.sort(key=order.__getitem__)

    paths: list[list[str]] = []
    cycles: list[list[str]] = []
    reached: set[str] = set()

    def extend(path: list[str], on_path: set[str]) -> None:
        if len(paths) >= limit:
            return
        tail = path[-1]
        reached.add(tail)
        nxt = succ.get(tail, [])
        if not nxt:
            paths.append(list(path))
            return
        for n in nxt:
            if n in on_path:
                cycles.append(path[path.index(n):] + [n])
                continue
            path.append(n)
            on_path.add(n)
            extend(path, on_path)
            on_path.discard(n)
            path.pop()

    for sid in m._stages:
        if indeg[sid] == 0:
            extend([sid], {sid})
    # stages sitting only on loops have no source to start from
    for sid in m._stages:
        if sid not in reached:
            extend([sid], {sid})
    return paths, cycles


def validate_s(m: SModel) -> list[Diagnostic]:
    """Check the flow grammar, cross-machine discipline and trigger rules.

    Returns diagnostics in a fixed order; an empty list means the model is
    well formed.
    """
    diags: list[Diagnostic] = []
    trigger_targets = {t.dst for t in m.triggers}

    paths, cycles = maximal_paths(m)
    for cyc in cycles:
        diags.append(Diagnostic(RULE_PATH_CYCLE, "flow path loops inside one thimac", tuple(cyc)))
    for path in paths:
        kinds = [m.stage(s).kind for s in path]
        if not matches_template(kinds, triggered_head=path[0] in trigger_targets):
            shape = ".".join(t for k in kinds for t in k.tokens)
            diags.append(Diagnostic(RULE_PATH_SHAPE, f"path Flow.{shape} matches no template", tuple(path)))

    for a in m.flows:
        src, dst = m.stage(a.src), m.stage(a.dst)
        leaves = src.owner != dst.owner or not is_path_arc(m, a)
        if leaves and not (src.kind is StageKind.TRANSFER_OUT and dst.kind is StageKind.TRANSFER_IN):
            diags.append(Diagnostic(
                RULE_CROSS_FLOW,
                f"cross-thimac flow must be transfer(output) -> transfer(input), got {src.kind.value} -> {dst.kind.value}",
                (a.src, a.dst),
            ))

    flow_pairs = {(a.src, a.dst) for a in m.flows}
    for t in m.triggers:
        if m.stage(t.dst).kind not in TRIGGERABLE:
            diags.append(Diagnostic(
                RULE_TRIGGER_TARGET,
                f"trigger must land on create or process, not {m.stage(t.dst).kind.value}",
                (t.src, t.dst),
            ))
        if (t.src, t.dst) in flow_pairs or (t.dst, t.src) in flow_pairs:
            diags.append(Diagnostic(RULE_TRIGGER_FLOW, "trigger duplicates an existing flow", (t.src, t.dst)))
    return diags
