"""Decomposition of a static model into static changes, and their ordering.

The default cut follows two boundaries that a thing crosses when control is
handed over without any work being done on it:

* a trigger arc, which links subdiagrams that share no flow;
* a reception stage feeding a release stage directly, where a machine only
  relays what it received.

Everything still joined by flow after those cuts is one static change.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import Diagnostic, SModel, StageKind, Thimac, validate_s
from .fsm import (
    ROLE_CONDITION,
    ROLE_CONTROLLER,
    ROLE_START,
    ROLE_STATE,
    ROLE_STIMULUS,
)

INIT, READY, STIMULUS, SHIFT, CONDITION, PART = (
    "init", "ready", "stimulus", "shift", "condition", "part",
)
KINDS = (INIT, READY, STIMULUS, SHIFT, CONDITION, PART)


class UnvalidatedModel(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__(f"model has {len(diagnostics)} diagnostic(s); run validate_s first")


class RegionError(ValueError):
    def __init__(self, message: str, stages: Iterable[str] = ()):
        self.stages = tuple(sorted(stages))
        super().__init__(f"{message}: {', '.join(self.stages)}" if self.stages else message)


class OverlappingRegions(RegionError):
    pass


class UncoveredStage(RegionError):
    pass


class DisconnectedRegion(RegionError):
    pass


class UnknownStage(RegionError):
    pass


@dataclass(frozen=True)
class StaticChange:
    id: str
    kind: str
    stages: frozenset[str]
    arcs: frozenset[tuple[str, str, str]]
    label: str = ""


@dataclass(frozen=True)
class DModel:
    changes: tuple[StaticChange, ...]
    precedence: frozenset[tuple[str, str]]
    source: SModel = field(compare=False, repr=False)

    def change(self, change_id: str) -> StaticChange:
        for c in self.changes:
            if c.id == change_id:
                return c
        raise KeyError(change_id)

    def change_of(self, stage_id: str) -> StaticChange:
        for c in self.changes:
            if stage_id in c.stages:
                return c
        raise KeyError(stage_id)

    def successors(self, change_id: str) -> list[str]:
        return sorted(b for a, b in self.precedence if a == change_id)

    def closure(self) -> set[tuple[str, str]]:
        """Transitive closure of the precedence relation."""
        succ: dict[str, set[str]] = defaultdict(set)
        for a, b in self.precedence:
            succ[a].add(b)
        out = set()
        for start in (c.id for c in self.changes):
            stack = list(succ[start])
            seen: set[str] = set()
            while stack:
                n = stack.pop()
                if n in seen:
                    continue
                seen.add(n)
                out.add((start, n))
                stack.extend(succ[n])
        return out

    def simultaneous(self) -> set[frozenset[str]]:
        """Pairs of changes triggered from one and the same source stage."""
        by_source: dict[str, set[str]] = defaultdict(set)
        for t in self.source.triggers:
            by_source[t.src].add(self.change_of(t.dst).id)
        out = set()
        for targets in by_source.values():
            ts = sorted(targets)
            out.update(frozenset((a, b)) for i, a in enumerate(ts) for b in ts[i + 1:])
        return out


def is_relay_arc(m: SModel, src: str, dst: str) -> bool:
    """A reception handing its thing straight to a release."""
    return m.stage(src).kind.is_reception and m.stage(dst).kind is StageKind.RELEASE


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _require_valid(m: SModel) -> None:
    diags = validate_s(m)
    if diags:
        raise UnvalidatedModel(diags)


def decompose(m: SModel) -> list[StaticChange]:
    _require_valid(m)
    order = [s.id for s in m.stages()]
    uf = _UnionFind(order)
    for a in m.flows:
        if not is_relay_arc(m, a.src, a.dst):
            uf.union(a.src, a.dst)
    groups: dict[str, list[str]] = defaultdict(list)
    for sid in order:
        groups[uf.find(sid)].append(sid)
    return _label(m, list(groups.values()))


def decompose_with_regions(m: SModel, regions: list[Iterable[str]]) -> list[StaticChange]:
    """Accept a user-chosen division of the model, checking it is a partition
    into weakly connected pieces."""
    _require_valid(m)
    regions = [list(dict.fromkeys(r)) for r in regions]
    unknown = {s for r in regions for s in r if not m.has_stage(s)}
    if unknown:
        raise UnknownStage("no such stage(s)", unknown)
    owner: dict[str, int] = {}
    overlap = set()
    for i, r in enumerate(regions):
        for s in r:
            if s in owner:
                overlap.add(s)
            owner[s] = i
    if overlap:
        raise OverlappingRegions("stage(s) in more than one region", overlap)
    uncovered = {s.id for s in m.stages()} - owner.keys()
    if uncovered:
        raise UncoveredStage("stage(s) in no region", uncovered)
    for r in regions:
        if not r:
            raise DisconnectedRegion("empty region")
        if not _connected(m, set(r)):
            raise DisconnectedRegion("region is not connected", r)
    stage_pos = {s.id: i for i, s in enumerate(m.stages())}
    return _label(m, [sorted(r, key=stage_pos.__getitem__) for r in regions])


def _connected(m: SModel, region: set[str]) -> bool:
    adj: dict[str, set[str]] = defaultdict(set)
    for a in m.arcs():
        if a.src in region and a.dst in region:
            adj[a.src].add(a.dst)
            adj[a.dst].add(a.src)
    start = next(iter(region))
    seen = {start}
    stack = [start]
    while stack:
        for n in adj[stack.pop()]:
            if n not in seen:
                seen.add(n)
                stack.append(n)
    return seen == region


def order_changes(m: SModel, changes: list[StaticChange]) -> DModel:
    """Attach the atemporal precedence relation: ``(a, b)`` whenever some arc
    leaves a stage of ``a`` and enters a stage of ``b``."""
    where = {s: c.id for c in changes for s in c.stages}
    prec = {
        (where[a.src], where[a.dst])
        for a in m.arcs()
        if where[a.src] != where[a.dst]
    }
    return DModel(
        changes=tuple(sorted(changes, key=lambda c: c.id)),
        precedence=frozenset(prec),
        source=m,
    )


def build_dmodel(m: SModel, regions: Optional[list[Iterable[str]]] = None) -> DModel:
    changes = decompose(m) if regions is None else decompose_with_regions(m, regions)
    return order_changes(m, changes)


def parse_regions(text: str) -> list[list[str]]:
    """Region file: one region per line, comma-separated stage references."""
    from .dsl import _ref_to_stage_id

    regions = []
    for raw in text.splitlines():
        line = _drop_comment(raw)
        refs = [r.strip() for r in line.split(",") if r.strip()]
        if refs:
            try:
                regions.append([_ref_to_stage_id(r) for r in refs])
            except ValueError as exc:
                raise UnknownStage(str(exc)) from None
    return regions


def format_regions(changes: list[StaticChange], m: SModel) -> str:
    from .dsl import _stage_ref

    pos = {s.id: i for i, s in enumerate(m.stages())}
    lines = []
    for c in sorted(changes, key=lambda c: c.id):
        lines.append(f"# {c.id}")
        lines.append(", ".join(_stage_ref(s) for s in sorted(c.stages, key=pos.__getitem__)))
    return "\n".join(lines) + "\n"


def _drop_comment(line: str) -> str:
    # '#' introduces a comment only after whitespace; 'kind#2' is an index
    for i, ch in enumerate(line):
        if ch == "#" and (i == 0 or line[i - 1].isspace()):
            return line[:i]
    return line


# ---------------------------------------------------------------------------
# naming

def _lca(m: SModel, thimacs: list[Thimac]) -> Thimac:
    parts = [t.id.split(".") for t in thimacs]
    common = []
    for segs in zip(*parts):
        if len(set(segs)) != 1:
            break
        common.append(segs[0])
    return m.thimac(".".join(common))


def _pred(m: SModel, sid: str) -> list[str]:
    return [a.src for a in m.flows if a.dst == sid]


def _succ(m: SModel, sid: str) -> list[str]:
    return [a.dst for a in m.flows if a.src == sid]


def _cap(text: str) -> str:
    return text[:1].upper() + text[1:]


def _classify(m: SModel, stages: list[str]) -> tuple[str, str, str]:
    owners = list(dict.fromkeys(m.stage(s).owner for s in stages))
    thimacs = [m.thimac(o) for o in owners]
    roles = {t.role for t in thimacs}
    kinds = [m.stage(s).kind for s in stages]
    by_role = defaultdict(list)
    for t in thimacs:
        by_role[t.role].append(t)

    if roles <= {ROLE_START, ROLE_CONTROLLER} and ROLE_START in roles:
        start = by_role[ROLE_START][0]
        return INIT, "init", f"Starting the {start.display}"
    if roles == {ROLE_CONDITION} and len(thimacs) == 1:
        cond = thimacs[0]
        return CONDITION, f"condition.{cond.segment}", f"Driving in {cond.display}"
    if roles == {ROLE_STIMULUS, ROLE_STATE} and len(by_role[ROLE_STIMULUS]) == 1 and len(by_role[ROLE_STATE]) == 1:
        stim, src = by_role[ROLE_STIMULUS][0], by_role[ROLE_STATE][0]
        event = m.parent_of(stim.id).segment
        receive = next(s for s in stages if m.stage(s).kind is StageKind.RECEIVE and m.stage(s).owner == src.id)
        release = _succ(m, receive)[0]
        out = _succ(m, release)[0]
        dst = m.owner(_succ(m, out)[0])
        return (
            STIMULUS,
            f"stimulus.{src.segment}.{event}",
            f"Selecting from {src.display} to {dst.display}",
        )
    if roles == {ROLE_STATE}:
        releases = [s for s in stages if m.stage(s).kind is StageKind.RELEASE]
        if len(releases) == 1:
            release = releases[0]
            src = m.owner(release)
            receives = [s for s in stages if m.stage(s).kind is StageKind.RECEIVE]
            dst = m.owner(receives[0]) if receives else src
            entry = _pred(m, _pred(m, release)[0])[0]
            stim = m.owner(_pred(m, entry)[0])
            event = m.parent_of(stim.id).segment
            return (
                SHIFT,
                f"shift.{src.segment}.{event}.{dst.segment}",
                f"Shifting from {src.display} to {dst.display}",
            )
        if kinds == [StageKind.PROCESS] and len(thimacs) == 1:
            st = thimacs[0]
            return READY, f"ready.{st.segment}", f"{_cap(st.display)} is ready"
    raise LookupError


def _label(m: SModel, groups: list[list[str]]) -> list[StaticChange]:
    keyed = []
    for g in groups:
        try:
            kind, cid, label = _classify(m, g)
        except (LookupError, IndexError, StopIteration, AttributeError):
            kind, cid, label = PART, "", _lca(m, [m.owner(s) for s in g]).display
        keyed.append((kind, cid, label, g))
    width = len(str(len(groups)))
    seen: dict[str, int] = {}
    out = []
    for n, (kind, cid, label, g) in enumerate(keyed, start=1):
        if kind == PART:
            cid = f"part.{n:0{width}d}"
        if cid in seen:
            seen[cid] += 1
            cid = f"{cid}~{seen[cid]}"
        else:
            seen[cid] = 1
        members = set(g)
        arcs = frozenset(a.key for a in m.arcs() if a.src in members and a.dst in members)
        out.append(StaticChange(cid, kind, frozenset(g), arcs, label))
    return out
