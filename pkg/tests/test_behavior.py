import pytest
from hypothesis import given, settings, strategies as st

from tmkit import corpus_path
from tmkit.behavior import (
    EMPTY_CHANGE,
    NotAnFsmModel,
    UnknownStimulus,
    attach_time,
    event_catalog,
    format_trace,
    fsm_of,
    load_script,
    parse_script,
    project_to_fsm_trace,
    simulate,
)
from tmkit.core import TimeTag
from tmkit.dsl import parse_model
from tmkit.fsm import compile_fsm_to_s, fsm_run, load_fsm
from tmkit.statics import build_dmodel, decompose

from .oracles import REFERENCE_EVENTS, STATE, VERB_RELAXED, normalize
from .strategies import fsm_specs, scripts

@pytest.fixture(scope="module")
def d():
    return build_dmodel(compile_fsm_to_s(load_fsm(corpus_path("transmission.fsm.json"))))


@pytest.fixture(scope="module")
def d_speed():
    return build_dmodel(compile_fsm_to_s(load_fsm(corpus_path("transmission_speed.fsm.json"))))


def test_catalog_matches_reference_events(d):
    cat = event_catalog(d)
    assert len(cat) == 22
    for n, (entry, (kind, src, dst, name)) in enumerate(zip(cat, REFERENCE_EVENTS), start=1):
        assert entry.kind == kind, n
        assert entry.src == (STATE[src] if src else None), n
        assert entry.dst == (STATE[dst] if dst else None), n
        relaxed = n in VERB_RELAXED
        assert normalize(entry.name, relaxed) == normalize(name, relaxed), n


def test_catalog_regionless_extension(d):
    cat = event_catalog(d, regionless=["Waiting at a light"])
    assert len(cat) == 23
    assert cat[-1].change == EMPTY_CHANGE.id and cat[-1].name == "Waiting at a light"


@settings(max_examples=100, deadline=None)
@given(fsm_specs())
def test_catalog_lists_every_change_once(spec):
    dm = build_dmodel(compile_fsm_to_s(spec))
    cat = event_catalog(dm)
    assert sorted(e.change for e in cat) == sorted(c.id for c in dm.changes)


def test_catalog_of_plain_model():
    dm = build_dmodel(parse_model(corpus_path("phone.tm").read_text()))
    (entry,) = event_catalog(dm)
    assert entry.kind == "part" and entry.name == "A phoned B"
    with pytest.raises(NotAnFsmModel):
        simulate(dm, [])


def test_attach_time_phone_call():
    m = parse_model(corpus_path("phone.tm").read_text())
    (change,) = decompose(m)
    e = attach_time(change, TimeTag(0, "May 23, 2012, 2:11 pm"))
    assert e.name == "A phoned B on May 23, 2012, at 2:11 pm"
    assert e.state == change.id and e.tick == 0 and e.id == "E1"
    assert attach_time(change, TimeTag(4)).name == "A phoned B"
    assert attach_time(change, TimeTag(4, "noon")).name == "A phoned B at noon"


def test_empty_script(d):
    b = simulate(d, [])
    assert [(e.id, e.tick, e.state) for e in b.events] == [("E1", 0, "init"), ("E2", 1, "ready.Neutral")]
    assert b.events[1].cause == "E1"
    assert b.result == "quiescent"
    assert format_trace(b) == (
        'tick=0 id=E1 change=init name="Starting the car"\n'
        'tick=1 id=E2 change=ready.Neutral name="Neutral is ready"\n'
        "result=quiescent\n"
    )


def test_single_stimulus_chain(d):
    b = simulate(d, [(5, "selectFirst")])
    assert [(e.tick, e.state) for e in b.events][2:] == [
        (5, "stimulus.Neutral.selectFirst"),
        (6, "shift.Neutral.selectFirst.FirstGear"),
        (7, "condition.First"),
    ]
    assert [e.cause for e in b.events][2:] == [None, "E3", "E4"]


def test_disabled_stimulus_dropped(d, caplog):
    with caplog.at_level("INFO", logger="tmkit.behavior"):
        b = simulate(d, [(3, "selectThird"), (4, "selectReverse")])
    assert [e.tick for e in b.dropped] == [3]
    assert b.dropped_positions == (0,)
    assert "selectThird dropped" in caplog.text
    assert project_to_fsm_trace(b, d) == ["Neutral", "Reverse"]


def test_early_stimulus_waits_for_start_up(d):
    b = simulate(d, [(0, "selectFirst")])
    assert b.events[2].tick == 2


def test_back_to_back_stimuli_do_not_overlap(d):
    b = simulate(d, [(2, "selectFirst"), (2, "selectSecond"), (2, "selectThird")])
    ticks = [e.tick for e in b.events if e.state.startswith("shift.")]
    assert ticks == sorted(set(ticks))
    assert project_to_fsm_trace(b, d) == ["Neutral", "FirstGear", "SecondGear", "ThirdGear"]


def test_full_tour(d):
    b = simulate(d, load_script(corpus_path("tour.script")))
    assert len(b.events) == 24
    assert len({e.name for e in b.events}) == 22
    assert {e.state for e in b.events} == {c.id for c in d.changes}
    assert project_to_fsm_trace(b, d) == [
        "Neutral", "FirstGear", "SecondGear", "ThirdGear", "SecondGear",
        "FirstGear", "Neutral", "Reverse", "Neutral",
    ]


def test_truncation(d):
    b = simulate(d, [(2, "selectFirst")], max_ticks=3)
    assert b.truncated and b.result == "truncated"
    assert max(e.tick for e in b.events) <= 3
    assert format_trace(b).endswith("result=truncated\n")
    with pytest.raises(ValueError):
        simulate(d, [], max_ticks=0)


def test_unknown_stimulus(d):
    with pytest.raises(UnknownStimulus):
        simulate(d, [(1, "selectWarp")])


def test_script_parsing():
    assert parse_script("# tour\n2 go\n\n5 stop  # late\n") == [(2, "go"), (5, "stop")]
    for bad in ["go", "x go", "2 go extra", "5 go\n2 stop"]:
        with pytest.raises(ValueError):
            parse_script(bad)


def test_fsm_of_matches_fixture(d):
    spec = load_fsm(corpus_path("transmission.fsm.json"))
    view = fsm_of(d)
    assert view.initial == spec.initial
    assert set(view.transitions) == set(spec.transitions)


def _check_oracle(dm, spec, script):
    b = simulate(dm, script)
    run = fsm_run(spec, [s for _, s in script])
    assert project_to_fsm_trace(b, dm) == run.trace()
    assert list(b.dropped_positions) == run.dropped
    assert [e.stimulus for e in b.dropped] == [run.history[i].event for i in run.dropped]
    return b


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_oracle_both_fixtures(d, d_speed, data):
    for dm, name in ((d, "transmission"), (d_speed, "transmission_speed")):
        spec = load_fsm(corpus_path(f"{name}.fsm.json"))
        _check_oracle(dm, spec, data.draw(scripts(spec)))


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_oracle_random_fsms(data):
    spec = data.draw(fsm_specs())
    if not spec.transitions:
        return
    dm = build_dmodel(compile_fsm_to_s(spec))
    b = _check_oracle(dm, spec, data.draw(scripts(spec, max_len=20)))
    # causes always come earlier in time
    ticks = {e.id: e.tick for e in b.events}
    for e in b.events:
        if e.cause:
            assert ticks[e.cause] < e.tick
    assert [e.id for e in b.events] == [f"E{i}" for i in range(1, len(b.events) + 1)]
    assert [e.tick for e in b.events] == sorted(e.tick for e in b.events)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_simulate_is_deterministic_and_pure(d, data):
    spec = load_fsm(corpus_path("transmission.fsm.json"))
    script = data.draw(scripts(spec))
    before = repr(d)
    first = format_trace(simulate(d, script))
    assert all(format_trace(simulate(d, script)) == first for _ in range(3))
    assert repr(d) == before
