from collections import Counter

import pytest
from hypothesis import given, settings

from tmkit import corpus_path
from tmkit.core import ModelBuilder
from tmkit.dsl import parse_model
from tmkit.fsm import compile_fsm_to_s, load_fsm
from tmkit.statics import (
    DisconnectedRegion,
    OverlappingRegions,
    UncoveredStage,
    UnknownStage,
    UnvalidatedModel,
    build_dmodel,
    decompose,
    decompose_with_regions,
    format_regions,
    order_changes,
    parse_regions,
)

from .oracles import C, L, P, R, TI, TO, brute_precedence, weakly_connected
from .strategies import fsm_specs


@pytest.fixture(scope="module")
def transmission():
    return compile_fsm_to_s(load_fsm(corpus_path("transmission.fsm.json")))


def test_transmission_has_22_changes(transmission):
    changes = decompose(transmission)
    assert len(changes) == 22
    assert Counter(c.kind for c in changes) == {
        "init": 1, "ready": 1, "stimulus": 8, "shift": 8, "condition": 4,
    }


def test_transmission_change_contents(transmission):
    d = build_dmodel(transmission)
    init = d.change("init")
    assert {transmission.owner(s).segment for s in init.stages} == {"Start", "Transmission"}
    shift = d.change("shift.Neutral.selectFirst.FirstGear")
    assert shift.label == "Shifting from neutral to first"
    assert Counter(transmission.stage(s).kind for s in shift.stages) == Counter([L, TO, TI, R, P])
    assert d.change("ready.Neutral").label == "Neutral is ready"
    assert d.change("condition.Reverse").label == "Driving in reverse"
    assert d.change("stimulus.SecondGear.selectThird").label == "Selecting from second to third"


def test_transmission_precedence_examples(transmission):
    d = build_dmodel(transmission)
    p = d.precedence
    assert ("init", "ready.Neutral") in p
    assert ("stimulus.Neutral.selectFirst", "shift.Neutral.selectFirst.FirstGear") in p
    assert ("shift.Neutral.selectFirst.FirstGear", "condition.First") in p
    assert ("shift.SecondGear.selectFirst.FirstGear", "condition.First") in p
    assert ("init", "stimulus.Neutral.selectFirst") not in p
    assert d.successors("ready.Neutral") == []


def _check_invariants(m, d):
    all_stages = {s.id for s in m.stages()}
    # partition
    seen: list[str] = [s for c in d.changes for s in c.stages]
    assert len(seen) == len(set(seen)) and set(seen) == all_stages
    # connectivity
    for c in d.changes:
        assert weakly_connected(m, set(c.stages)), c.id
    # reconstruction: internal arcs plus crossing arcs give back every arc
    where = {s: c.id for c in d.changes for s in c.stages}
    internal = {k for c in d.changes for k in c.arcs}
    crossing = {a.key for a in m.arcs() if where[a.src] != where[a.dst]}
    assert internal | crossing == {a.key for a in m.arcs()}
    assert not internal & crossing
    # precedence equals a brute-force scan
    assert d.precedence == brute_precedence(m, d.changes)
    assert len({c.id for c in d.changes}) == len(d.changes)


def test_transmission_invariants(transmission):
    _check_invariants(transmission, build_dmodel(transmission))


@settings(max_examples=200, deadline=None)
@given(fsm_specs())
def test_random_fsm_decomposition(spec):
    m = compile_fsm_to_s(spec)
    d = build_dmodel(m)
    _check_invariants(m, d)
    conditions = sum(1 for s in spec.states if s.has_condition)
    assert len(d.changes) == 2 + 2 * len(spec.transitions) + conditions
    assert {c.kind for c in d.changes} <= {"init", "ready", "stimulus", "shift", "condition"}


def _triggered_chain():
    b = ModelBuilder("M")
    a = b.path(b.thimac("M", "A"), [C, P])
    bb = b.path(b.thimac("M", "B"), [C, P])
    c = b.path(b.thimac("M", "C"), [C])
    b.trigger(a[-1], bb[0])
    b.trigger(bb[-1], c[0])
    return b.build()


def test_three_chain_closure():
    d = build_dmodel(_triggered_chain())
    ids = [c.id for c in d.changes]
    assert len(ids) == 3 and all(i.startswith("part.") for i in ids)
    assert len(d.precedence) == 2
    assert len(d.closure()) == 3
    labels = sorted(c.label for c in d.changes)
    assert labels == ["A", "B", "C"]


def test_simultaneous_from_one_source():
    b = ModelBuilder("M")
    a = b.path(b.thimac("M", "A"), [C, P])
    x = b.path(b.thimac("M", "X"), [C])
    y = b.path(b.thimac("M", "Y"), [C])
    b.trigger(a[-1], x[0])
    b.trigger(a[-1], y[0])
    d = build_dmodel(b.build())
    (pair,) = d.simultaneous()
    assert {d.change(i).label for i in pair} == {"X", "Y"}


def test_invalid_model_rejected():
    b = ModelBuilder("M")
    b.path(b.thimac("M", "A"), [P, C])
    with pytest.raises(UnvalidatedModel):
        decompose(b.build())


def test_phone_is_one_change():
    m = parse_model(corpus_path("phone.tm").read_text())
    (change,) = decompose(m)
    assert change.label == "A phoned B"
    assert len(change.stages) == 6


def test_regions_round_trip(transmission):
    changes = decompose(transmission)
    text = format_regions(changes, transmission)
    again = decompose_with_regions(transmission, parse_regions(text))
    assert {c.stages for c in again} == {c.stages for c in changes}
    assert sorted(c.id for c in again) == sorted(c.id for c in changes)


def test_coarser_regions_accepted():
    m = _triggered_chain()
    stages = [s.id for s in m.stages()]
    d = order_changes(m, decompose_with_regions(m, [stages[:3], stages[3:]]))
    assert len(d.changes) == 2
    assert d.precedence == brute_precedence(m, d.changes)


def test_region_errors():
    m = _triggered_chain()
    stages = [s.id for s in m.stages()]
    with pytest.raises(OverlappingRegions):
        decompose_with_regions(m, [stages, stages[:1]])
    with pytest.raises(UncoveredStage):
        decompose_with_regions(m, [stages[:-1]])
    with pytest.raises(DisconnectedRegion):
        # A's create and C's create share no arc
        decompose_with_regions(m, [[stages[0], stages[-1]], stages[1:-1]])
    with pytest.raises(UnknownStage):
        decompose_with_regions(m, [stages, ["M.Q:create#0"]])
    with pytest.raises(UnknownStage):
        parse_regions("M.A:explode\n")


def test_region_file_comments():
    regions = parse_regions("# header\nM.A:create, M.A:process#0  # tail\n\nM.B:create\n")
    assert regions == [["M.A:create#0", "M.A:process#0"], ["M.B:create#0"]]
