"""
Temporal relaxed planning graph
"""
from fractions import Fraction

from models.core_model import INFINITY
from models.trpg import achievers_in, build_trpg, earliest_time

from .conftest import P


def test_earliest_times_follow_the_shortest_route(task25):
    trpg = build_trpg(task25)
    assert earliest_time(trpg, P("at T0 D0")) == 0
    assert earliest_time(trpg, P("at T0 D3")) == 10
    assert earliest_time(trpg, P("at T0 D1")) == 15
    assert earliest_time(trpg, P("at T0 D2")) == 20
    assert earliest_time(trpg, P("in C0 T0")) == 2
    # 20 (shortest route) + 2 (unload)
    assert earliest_time(trpg, P("at C0 D2")) == 22


def test_excluding_a_proposition_removes_its_achievers(task25):
    trpg = build_trpg(task25, exclude=[P("at T0 D3")])
    assert P("at T0 D3") not in trpg
    assert earliest_time(trpg, P("at T0 D2")) == 30
    assert earliest_time(trpg, P("at C0 D2")) == 32


def test_excluding_the_truck_position_strands_the_crate(task25):
    trpg = build_trpg(task25, exclude=[P("at T0 D0")])
    assert earliest_time(trpg, P("in C0 T0")) == INFINITY
    assert earliest_time(trpg, P("at C0 D2")) == INFINITY


def test_custom_state_and_pending_effects(task25):
    state = (task25.init - {P("at T0 D0")}) | {P("in C0 T0")}
    trpg = build_trpg(task25, state=state, now=Fraction(5), pending=[(Fraction(12), P("at T0 D3"))])
    assert earliest_time(trpg, P("at T0 D3")) == 12
    assert earliest_time(trpg, P("at T0 D2")) == 22
    assert earliest_time(trpg, P("at C0 D2")) == 24
    assert trpg.now == 5


def test_horizon_cuts_late_events(task25):
    trpg = build_trpg(task25, horizon=Fraction(15))
    assert P("at T0 D1") in trpg
    assert P("at T0 D2") not in trpg


def test_applicable_achievers(task25):
    trpg = build_trpg(task25)
    labels = sorted(a.label for a in achievers_in(task25, trpg, P("at T0 D2")))
    assert labels == ["(drive T0 D1 D2)", "(drive T0 D3 D2)"]
    assert trpg.action_start[task25.find_action("(drive T0 D3 D2)")] == 10
