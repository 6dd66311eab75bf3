"""Finite state machines: the definition format, a reference interpreter and
the compiler that recasts an FSM as a thinging-machine static model.

The interpreter is deliberately naive (a dictionary lookup per event). It is
the oracle the simulator is checked against, so it must not share code with
the compiled-model path.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Union

from .core import ModelBuilder, SModel, StageKind

C, P, L = StageKind.CREATE, StageKind.PROCESS, StageKind.RELEASE
TI, TO, R = StageKind.TRANSFER_IN, StageKind.TRANSFER_OUT, StageKind.RECEIVE

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class FsmError(ValueError):
    """The FSM definition is malformed or ambiguous."""


class _NotEnabled:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NotEnabled"

    def __bool__(self) -> bool:
        return False


NotEnabled = _NotEnabled()


@dataclass(frozen=True)
class FsmState:
    name: str
    parent: Optional[str] = None
    label: Optional[str] = None
    condition: Optional[bool] = None

    @property
    def display(self) -> str:
        return self.label or self.name

    @property
    def has_condition(self) -> bool:
        """States inside a superstate drive a condition unless told otherwise."""
        if self.condition is not None:
            return self.condition
        return self.parent is not None


@dataclass(frozen=True)
class FsmTransition:
    src: str
    event: str
    dst: str


@dataclass(frozen=True)
class FsmSpec:
    states: tuple[FsmState, ...]
    initial: str
    transitions: tuple[FsmTransition, ...]
    name: str = "System"
    label: Optional[str] = None
    controller: str = "Controller"
    _table: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        errors = check_fsm(self)
        if errors:
            raise FsmError("; ".join(errors))
        table = {(t.src, t.event): t.dst for t in self.transitions}
        object.__setattr__(self, "_table", table)

    @property
    def state_names(self) -> list[str]:
        return [s.name for s in self.states]

    @property
    def events(self) -> list[str]:
        return list(dict.fromkeys(t.event for t in self.transitions))

    def state(self, name: str) -> FsmState:
        for s in self.states:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        states = []
        for s in self.states:
            d = {"name": s.name}
            if s.parent:
                d["parent"] = s.parent
            if s.label:
                d["label"] = s.label
            if s.condition is not None:
                d["condition"] = s.condition
            states.append(d)
        out = {"name": self.name}
        if self.label:
            out["label"] = self.label
        if self.controller != "Controller":
            out["controller"] = self.controller
        out["states"] = states
        out["initial"] = self.initial
        out["transitions"] = [{"from": t.src, "event": t.event, "to": t.dst} for t in self.transitions]
        return out


def check_fsm(spec: FsmSpec) -> list[str]:
    errors: list[str] = []
    names = [s.name for s in spec.states]
    known = set(names)
    for ident in [spec.name, spec.controller, *names, *(t.event for t in spec.transitions)]:
        if not _IDENT.fullmatch(ident):
            errors.append(f"{ident!r} is not an identifier")
    if spec.controller in ("Start", "Signals", "Conditions"):
        errors.append(f"controller name {spec.controller!r} is reserved")
    if len(known) != len(names):
        errors.append("duplicate state name")
    if not names:
        errors.append("no states")
    if spec.initial not in known:
        errors.append(f"unknown initial state {spec.initial!r}")
    parents = {s.parent for s in spec.states if s.parent}
    for p in sorted(parents):
        if p in known:
            # one superstate level only: a superstate is never itself a leaf state
            errors.append(f"superstate {p!r} is also a state")
        elif not _IDENT.fullmatch(p):
            errors.append(f"{p!r} is not an identifier")
    seen: dict[tuple[str, str], str] = {}
    for t in spec.transitions:
        for end in (t.src, t.dst):
            if end not in known:
                errors.append(f"unknown state {end!r} in transition {t.src} --{t.event}--> {t.dst}")
        key = (t.src, t.event)
        if key in seen:
            if seen[key] == t.dst:
                errors.append(f"duplicate transition {t.src} --{t.event}--> {t.dst}")
            else:
                errors.append(f"ambiguous transition on {t.event!r} from {t.src!r}")
        seen[key] = t.dst
    return errors


def fsm_from_dict(data: dict) -> FsmSpec:
    if not isinstance(data, dict):
        raise FsmError("FSM definition must be a JSON object")
    missing = [k for k in ("states", "initial", "transitions") if k not in data]
    if missing:
        raise FsmError(f"missing key(s): {', '.join(missing)}")
    try:
        states = tuple(
            FsmState(s["name"], s.get("parent"), s.get("label"), s.get("condition"))
            for s in data["states"]
        )
        transitions = tuple(
            FsmTransition(t["from"], t["event"], t["to"]) for t in data["transitions"]
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise FsmError(f"malformed state or transition entry: {exc}") from None
    return FsmSpec(
        states=states,
        initial=data["initial"],
        transitions=transitions,
        name=data.get("name", "System"),
        label=data.get("label"),
        controller=data.get("controller", "Controller"),
    )


def load_fsm(path: Union[str, Path]) -> FsmSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FsmError(f"{path}: invalid JSON: {exc}") from None
    return fsm_from_dict(data)


def dump_fsm(spec: FsmSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2) + "\n"


# ---------------------------------------------------------------------------
# reference interpreter

class Step(NamedTuple):
    event: str
    state: str
    enabled: bool


@dataclass(frozen=True)
class FsmRun:
    current: str
    history: tuple[Step, ...] = ()
    initial: str = ""

    def trace(self) -> list[str]:
        """Initial state followed by the state entered at each enabled step."""
        return [self.initial, *(s.state for s in self.history if s.enabled)]

    @property
    def dropped(self) -> list[int]:
        """Script positions whose event was not enabled."""
        return [i for i, s in enumerate(self.history) if not s.enabled]


def fsm_step(spec: FsmSpec, current: str, event: str):
    """Target state of the transition on ``event``, or ``NotEnabled``."""
    if current not in spec.state_names:
        raise FsmError(f"unknown state {current!r}")
    return spec._table.get((current, event), NotEnabled)


def fsm_run(spec: FsmSpec, script: Iterable[str]) -> FsmRun:
    current = spec.initial
    history = []
    for ev in script:
        nxt = fsm_step(spec, current, ev)
        if nxt is NotEnabled:
            history.append(Step(ev, current, False))
        else:
            current = nxt
            history.append(Step(ev, current, True))
    return FsmRun(current, tuple(history), spec.initial)


# ---------------------------------------------------------------------------
# compilation to a static model

ROLE_SYSTEM = "system"
ROLE_START = "start"
ROLE_CONTROLLER = "controller"
ROLE_SUPERSTATE = "superstate"
ROLE_STATE = "state"
ROLE_SIGNALS = "signals"
ROLE_EVENT = "event"
ROLE_STIMULUS = "stimulus"
ROLE_CONDITIONS = "conditions"
ROLE_CONDITION = "condition"


def _camel(text: str) -> str:
    return "".join(w[:1].upper() + w[1:] for w in re.split(r"[^A-Za-z0-9]+", text) if w)


def compile_fsm_to_s(spec: FsmSpec) -> SModel:
    """Recast an FSM as a static model.

    Layout, for a system ``Sys`` with controller ``Ctl``::

        Sys.Start            create -> release -> transfer(output)
        Sys.Ctl              transfer(input) -> receive -> process
        Sys.Ctl[.Super].S    one thimac per state
        Sys.Signals.e.S      one stimulus thimac per transition (S --e--> T)
        Sys.Conditions.X     one condition thimac per condition state

    The controller's process triggers the initial state's process. Each
    stimulus flows into its source state, which passes the signal straight
    on (receive -> release) to the target state, where it is received and
    processed. Processing inside a condition state triggers its condition.
    """
    root_label = spec.label or spec.name.lower()
    b = ModelBuilder(spec.name, label=root_label, role=ROLE_SYSTEM)

    start = b.thimac(spec.name, "Start", label=root_label, role=ROLE_START)
    ctl = b.thimac(spec.name, spec.controller, role=ROLE_CONTROLLER)
    start_path = b.path(start, [C, L, TO])
    ctl_path = b.path(ctl, [TI, R, P])
    b.flow(start_path[-1], ctl_path[0], "signal")

    state_ids: dict[str, str] = {}
    for s in spec.states:
        parent = ctl
        if s.parent:
            parent = f"{ctl}.{s.parent}"
            if not b.has(parent):
                b.thimac(ctl, s.parent, role=ROLE_SUPERSTATE)
        state_ids[s.name] = b.thimac(parent, s.name, label=s.label or "", role=ROLE_STATE)

    signals = b.thimac(spec.name, "Signals", role=ROLE_SIGNALS)
    conditions = b.thimac(spec.name, "Conditions", role=ROLE_CONDITIONS)
    cond_create: dict[str, str] = {}
    used: set[str] = set()
    for s in spec.states:
        if not s.has_condition:
            continue
        seg = _camel(s.display)
        if not _IDENT.fullmatch(seg) or seg in used:
            seg = s.name
        base, n = seg, 2
        while seg in used:
            seg, n = f"{base}_{n}", n + 1
        used.add(seg)
        cid = b.thimac(conditions, seg, label=s.display, role=ROLE_CONDITION)
        cond_create[s.name] = b.path(cid, [C, P])[0]

    ready = b.stage(state_ids[spec.initial], P)
    b.trigger(ctl_path[-1], ready)
    if spec.initial in cond_create:
        b.trigger(ready, cond_create[spec.initial])

    for t in spec.transitions:
        group = f"{signals}.{t.event}"
        if not b.has(group):
            b.thimac(signals, t.event, role=ROLE_EVENT)
        stim = b.thimac(group, t.src, role=ROLE_STIMULUS)
        signal = b.path(stim, [C, L, TO])
        relay = b.path(state_ids[t.src], [TI, R, L, TO])
        landing = b.path(state_ids[t.dst], [TI, R, P])
        b.flow(signal[-1], relay[0], t.event)
        b.flow(relay[-1], landing[0])
        if t.dst in cond_create:
            b.trigger(landing[-1], cond_create[t.dst])

    return b.build(name=spec.name)


def fsm_from_model(m: SModel) -> FsmSpec:
    """Recover the FSM a compiled model was built from, using thimac roles."""
    root = m.root
    if root.role != ROLE_SYSTEM:
        raise FsmError("model was not compiled from an FSM (root has no 'system' role)")
    ctl = [t for t in m.thimacs() if t.role == ROLE_CONTROLLER]
    if len(ctl) != 1:
        raise FsmError("compiled model must have exactly one controller thimac")
    controller = ctl[0]
    states = []
    for t in m.thimacs():
        if t.role != ROLE_STATE:
            continue
        parent = m.parent_of(t.id)
        sup = parent.segment if parent is not None and parent.role == ROLE_SUPERSTATE else None
        states.append((t, sup))
    cond_states = set()
    for trig in m.triggers:
        if m.owner(trig.dst).role == ROLE_CONDITION and m.owner(trig.src).role == ROLE_STATE:
            cond_states.add(m.owner(trig.src).segment)
    initial = None
    for trig in m.triggers:
        if m.owner(trig.src).id == controller.id and m.owner(trig.dst).role == ROLE_STATE:
            initial = m.owner(trig.dst).segment
    if initial is None:
        raise FsmError("compiled model has no initial-state trigger")
    transitions = [
        FsmTransition(r.src, r.event, r.dst) for r in relays(m)
    ]
    fsm_states = []
    for t, sup in states:
        flag = t.segment in cond_states
        explicit = None if flag == (sup is not None) else flag
        fsm_states.append(FsmState(t.segment, sup, t.label or None, explicit))
    return FsmSpec(
        states=tuple(fsm_states),
        initial=initial,
        transitions=tuple(transitions),
        name=root.id,
        label=root.label or None,
        controller=controller.segment,
    )


class Relay(NamedTuple):
    """Stages a compiled transition threads through, by role."""

    src: str
    event: str
    dst: str
    signal: tuple[str, ...]   # stimulus create/release/transfer(output)
    entry: tuple[str, ...]    # source-state transfer(input)/receive
    shift: tuple[str, ...]    # source release/transfer(output), target transfer(input)/receive
    landing: str              # target-state process


def relays(m: SModel) -> list[Relay]:
    """Compiled transitions in source-state order, then declaration order."""
    succ: dict[str, list[str]] = {}
    pred: dict[str, list[str]] = {}
    for a in m.flows:
        succ.setdefault(a.src, []).append(a.dst)
        pred.setdefault(a.dst, []).append(a.src)

    def one(table, sid):
        nxt = table.get(sid, [])
        if len(nxt) != 1:
            raise FsmError(f"compiled model is malformed near {sid!r}")
        return nxt[0]

    out = []
    for t in m.thimacs():
        if t.role != ROLE_STATE:
            continue
        for st in t.stages:
            if st.kind is not TI or st.id not in pred:
                continue
            stim = m.owner(one(pred, st.id))
            if stim.role != ROLE_STIMULUS:
                continue
            rec = one(succ, st.id)
            rel = one(succ, rec)
            out_ = one(succ, rel)
            land_in = one(succ, out_)
            land_rec = one(succ, land_in)
            land_proc = one(succ, land_rec)
            out.append(Relay(
                src=t.segment,
                event=m.parent_of(stim.id).segment,
                dst=m.owner(land_in).segment,
                signal=tuple(s.id for s in stim.stages),
                entry=(st.id, rec),
                shift=(rel, out_, land_in, land_rec),
                landing=land_proc,
            ))
    return out
