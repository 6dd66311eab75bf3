"""Events and the behavior model.

A static state becomes an event once a time tag is attached to it. The
simulator walks a compiled model's static changes on a logical clock: one
change fires per tick along each causal chain, so the resulting chronology
can be compared tick by tick.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Union

from .core import TimeTag
from .fsm import FsmError, FsmSpec, FsmState, FsmTransition, relays
from .statics import CONDITION, INIT, READY, SHIFT, STIMULUS, DModel, StaticChange

log = logging.getLogger(__name__)

# regionless events (waiting, warnings) attach to this placeholder state
EMPTY_CHANGE = StaticChange("empty", "empty", frozenset(), frozenset(), "")


class UnknownStimulus(KeyError):
    pass


class NotAnFsmModel(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    id: str
    state: str
    time: TimeTag
    name: str
    cause: Optional[str] = None

    @property
    def tick(self) -> int:
        return self.time.tick


def _with_time(label: str, wall: str) -> str:
    date, sep, clock = wall.rpartition(",")
    if sep:
        return f"{label} on {date.strip()}, at {clock.strip()}"
    return f"{label} at {wall}"


def attach_time(state: StaticChange, t: TimeTag, event_id: str = "E1") -> Event:
    """Pair a static state with a time tag."""
    name = state.label or state.id
    if t.wall_label:
        name = _with_time(name, t.wall_label)
    return Event(event_id, state.id, t, name)


# ---------------------------------------------------------------------------
# FSM-shaped view of a compiled D model

class Route(NamedTuple):
    event: str
    src: str
    dst: str
    stimulus: str
    shift: str
    condition: Optional[str]


@dataclass(frozen=True)
class MachineView:
    initial: str
    init: str
    ready: str
    ready_condition: Optional[str]
    routes: tuple[Route, ...]
    states: tuple[str, ...]

    def route(self, state: str, event: str) -> Optional[Route]:
        for r in self.routes:
            if r.src == state and r.event == event:
                return r
        return None


def machine_view(d: DModel) -> MachineView:
    """Read the FSM wiring back out of a compiled model's changes."""
    m = d.source
    kinds = {c.id: c.kind for c in d.changes}
    inits = [c for c in d.changes if c.kind == INIT]
    readies = [c for c in d.changes if c.kind == READY]
    if len(inits) != 1 or len(readies) != 1:
        raise NotAnFsmModel("expected exactly one init and one ready change")
    try:
        rel = relays(m)
    except FsmError as exc:
        raise NotAnFsmModel(str(exc)) from None

    def condition_after(change_id: str) -> Optional[str]:
        conds = [b for b in d.successors(change_id) if kinds[b] == CONDITION]
        return conds[0] if conds else None

    routes = []
    for r in rel:
        stim = d.change_of(r.entry[0])
        shift = d.change_of(r.shift[0])
        if stim.kind != STIMULUS or shift.kind != SHIFT:
            raise NotAnFsmModel(f"transition {r.src} --{r.event}--> {r.dst} is not split into stimulus and shift")
        routes.append(Route(r.event, r.src, r.dst, stim.id, shift.id, condition_after(shift.id)))
    ready = readies[0]
    (ready_stage,) = ready.stages
    states = tuple(t.segment for t in m.thimacs() if t.role == "state")
    return MachineView(
        initial=m.owner(ready_stage).segment,
        init=inits[0].id,
        ready=ready.id,
        ready_condition=condition_after(ready.id),
        routes=tuple(routes),
        states=states,
    )


def fsm_of(d: DModel) -> FsmSpec:
    """An FSM equivalent to the compiled model, for oracle comparisons."""
    view = machine_view(d)
    return FsmSpec(
        states=tuple(FsmState(s) for s in view.states),
        initial=view.initial,
        transitions=tuple(FsmTransition(r.src, r.event, r.dst) for r in view.routes),
        name=d.source.root.id,
    )


# ---------------------------------------------------------------------------
# catalog

class CatalogEntry(NamedTuple):
    change: str
    name: str
    kind: str
    src: Optional[str]
    dst: Optional[str]


def event_catalog(d: DModel, regionless: Iterable[str] = ()) -> list[CatalogEntry]:
    """One entry per static change, plus any ``regionless`` event names
    (waiting, interruptions) bound to :data:`EMPTY_CHANGE`.

    For compiled models the order follows the chronology: start, the ready
    initial state, then a depth-first tour of states where each state's
    transitions are listed select-then-shift, followed by the condition the
    shift first brings about. Other models are listed by change id.
    """
    by_id = {c.id: c for c in d.changes}
    extra = [CatalogEntry(EMPTY_CHANGE.id, name, EMPTY_CHANGE.kind, None, None) for name in regionless]
    try:
        view = machine_view(d)
    except NotAnFsmModel:
        return [CatalogEntry(c.id, c.label or c.id, c.kind, None, None) for c in d.changes] + extra

    out: list[CatalogEntry] = []
    listed: set[str] = set()

    def add(cid: Optional[str], src=None, dst=None) -> None:
        if cid is None or cid in listed:
            return
        listed.add(cid)
        c = by_id[cid]
        out.append(CatalogEntry(cid, c.label or cid, c.kind, src, dst))

    add(view.init)
    add(view.ready, view.initial, view.initial)
    add(view.ready_condition, view.initial, view.initial)
    stack = [view.initial]
    visited = {view.initial}
    while stack:
        state = stack.pop()
        for r in view.routes:
            if r.src != state:
                continue
            add(r.stimulus, r.src, r.dst)
            add(r.shift, r.src, r.dst)
            add(r.condition, r.dst, r.dst)
            if r.dst not in visited:
                visited.add(r.dst)
                stack.append(r.dst)
    for c in d.changes:
        add(c.id)
    return out + extra


# ---------------------------------------------------------------------------
# simulation

class ScriptEntry(NamedTuple):
    tick: int
    stimulus: str


@dataclass(frozen=True)
class BModel:
    events: tuple[Event, ...]
    precedence: frozenset[tuple[str, str]]
    truncated: bool = False
    dropped: tuple[ScriptEntry, ...] = ()
    dropped_positions: tuple[int, ...] = field(default=(), repr=False)

    @property
    def result(self) -> str:
        return "truncated" if self.truncated else "quiescent"


def parse_script(text: str) -> list[ScriptEntry]:
    """Script file: ``<tick> <stimulusName>`` per line, ``#`` comments."""
    out = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or not parts[0].isdigit():
            raise ValueError(f"script line {n}: expected '<tick> <stimulus>', got {raw!r}")
        out.append(ScriptEntry(int(parts[0]), parts[1]))
    check_script(out)
    return out


def check_script(script: Iterable[tuple[int, str]]) -> None:
    last = -1
    for tick, _ in script:
        if tick < 0:
            raise ValueError("script ticks must be non-negative")
        if tick < last:
            raise ValueError("script ticks must be non-decreasing")
        last = tick


def load_script(path: Union[str, Path]) -> list[ScriptEntry]:
    return parse_script(Path(path).read_text(encoding="utf-8"))


def simulate(d: DModel, script: Iterable[tuple[int, str]], max_ticks: int = 10_000) -> BModel:
    """Run a stimulus script against a compiled D model.

    The start change fires at tick 0 and the initial state's ready change at
    tick 1. A stimulus is considered at its scripted tick (or the first tick
    after start-up, if earlier) against the state left by every earlier
    stimulus, and never before the previous shift has landed. When its source
    state is current, the stimulus change fires at that tick, the shift one
    tick later and the destination's condition, if any, one tick after that.
    Otherwise it is dropped.
    Events past ``max_ticks`` are cut and the result is flagged truncated.
    """
    if max_ticks <= 0:
        raise ValueError("max_ticks must be positive")
    script = [ScriptEntry(*e) for e in script]
    check_script(script)
    view = machine_view(d)
    events_known = {r.event for r in view.routes}
    for e in script:
        if e.stimulus not in events_known:
            raise UnknownStimulus(e.stimulus)

    raw: list[tuple[int, str, Optional[int]]] = []  # (tick, change, index of cause)

    def fire(tick: int, change: str, cause: Optional[int]) -> int:
        raw.append((tick, change, cause))
        return len(raw) - 1

    first = fire(0, view.init, None)
    ready = fire(1, view.ready, first)
    settle = 2
    if view.ready_condition:
        fire(2, view.ready_condition, ready)
        settle = 3

    state = view.initial
    dropped = []
    dropped_at = []
    for pos, entry in enumerate(script):
        tick = max(entry.tick, settle)
        route = view.route(state, entry.stimulus)
        if route is None:
            log.info("tick %d: %s dropped in state %s", tick, entry.stimulus, state)
            dropped.append(entry)
            dropped_at.append(pos)
            continue
        s = fire(tick, route.stimulus, None)
        h = fire(tick + 1, route.shift, s)
        if route.condition:
            fire(tick + 2, route.condition, h)
        state = route.dst
        # the next stimulus is judged once the destination has been entered
        settle = tick + 2

    truncated = any(t > max_ticks for t, _, _ in raw)
    kept = [i for i, (t, _, _) in enumerate(raw) if t <= max_ticks]
    kept.sort(key=lambda i: (raw[i][0], raw[i][1], i))
    ids = {i: f"E{n}" for n, i in enumerate(kept, start=1)}
    labels = {c.id: c.label or c.id for c in d.changes}
    events = tuple(
        Event(
            id=ids[i],
            state=raw[i][1],
            time=TimeTag(raw[i][0]),
            name=labels[raw[i][1]],
            cause=ids.get(raw[i][2]) if raw[i][2] is not None else None,
        )
        for i in kept
    )
    occurred = {e.state for e in events}
    prec = frozenset((a, b) for a, b in d.precedence if a in occurred and b in occurred)
    return BModel(events, prec, truncated, tuple(dropped), tuple(dropped_at))


def project_to_fsm_trace(b: BModel, d: DModel) -> list[str]:
    """Initial state, then the destination of every shift that occurred."""
    view = machine_view(d)
    dest = {r.shift: r.dst for r in view.routes}
    return [view.initial, *(dest[e.state] for e in b.events if e.state in dest)]


def format_trace(b: BModel) -> str:
    lines = [
        f'tick={e.tick} id={e.id} change={e.state} name="{_escape(e.name)}"'
        for e in b.events
    ]
    lines.append(f"result={b.result}")
    return "\n".join(lines) + "\n"


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')
