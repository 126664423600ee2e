import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastbus.model import (BusCandidate, Frequency, InfeasibleQuotaError, Instance,
                           InstanceError, Passenger, Route, coverage, objective,
                           serve_indicator)

from helpers import random_small_instance


# -- types ----------------------------------------------------------------

@pytest.mark.parametrize("stops, cum", [
    (("A",), (0,)),
    (("A", "B", "A"), (0, 10, 20)),
    (("A", "B"), (5, 10)),
    (("A", "B", "C"), (0, 20, 10)),
    (("A", "B"), (0, 1.5)),
    (("A", "B"), (0,)),
])
def test_route_rejects_bad_shapes(stops, cum):
    with pytest.raises(InstanceError):
        Route("r", stops, cum)


def test_route_allows_zero_travel_segment():
    r = Route("r", ("A", "B", "C"), (0, 0, 60))
    assert r.covers("A", "C") and not r.covers("C", "A") and r.offset("B") == 0


@pytest.mark.parametrize("board, alight, arrival", [
    ("A", "A", 10), ("A", "B", -1), ("A", "B", 86400), ("A", "B", 10.0),
])
def test_passenger_rejects_bad_values(board, alight, arrival):
    with pytest.raises(InstanceError):
        Passenger(board, alight, arrival)


def test_passengers_compare_by_trip_not_id():
    assert Passenger("A", "B", 5, pid=1) == Passenger("A", "B", 5, pid=2)


# -- serve predicate ------------------------------------------------------

def test_serve_inside_threshold(abc):
    assert serve_indicator(BusCandidate("L", 400), Passenger("B", "C", 600), abc, 180) == 1


def test_bus_passed_before_arrival(abc):
    assert serve_indicator(BusCandidate("L", 100), Passenger("B", "C", 600), abc, 180) == 0


def test_order_violation_never_serves(abc):
    for d in range(0, 2000, 50):
        assert serve_indicator(BusCandidate("L", d), Passenger("C", "A", 0), abc, 10_000) == 0


def test_threshold_edges_are_inclusive(abc):
    p = Passenger("B", "C", 600)
    assert serve_indicator(BusCandidate("L", 300), p, abc, 180) == 1      # wait 0
    assert serve_indicator(BusCandidate("L", 480), p, abc, 180) == 1      # wait 180
    assert serve_indicator(BusCandidate("L", 481), p, abc, 180) == 0
    assert serve_indicator(BusCandidate("L", 299), p, abc, 180) == 0


def test_boarding_at_first_stop(abc):
    assert serve_indicator(BusCandidate("L", 50), Passenger("A", "C", 50), abc, 0) == 1


def test_unknown_route_is_an_instance_error(abc):
    with pytest.raises(InstanceError):
        serve_indicator(BusCandidate("X", 0), Passenger("A", "B", 0), abc, 60)


def test_stop_off_route_is_not_served(abc):
    assert serve_indicator(BusCandidate("L", 0), Passenger("A", "Z", 0), abc, 60) == 0


# -- coverage / objective -------------------------------------------------

def test_coverage_cases(abc):
    p = Passenger("B", "C", 600)
    assert coverage([], p, abc, 180) == 0
    assert coverage([BusCandidate("L", 400)], p, abc, 180) == 1
    assert coverage([BusCandidate("L", 0), BusCandidate("L", 1000)], p, abc, 180) == 0


def enumerate_objective(buses, passengers, routes, theta):
    """Reference: count passengers with at least one serving bus, pair by pair."""
    return sum(any(serve_indicator(b, p, routes, theta) for b in buses) for p in passengers)


def test_toy_objective_by_enumeration(toy):
    pairs = {(b.depart, p.pid): serve_indicator(b, p, toy.routes, 50)
             for b in toy.candidates for p in toy.passengers}
    assert pairs == {(0, 1): 1, (0, 2): 0, (0, 3): 0,
                     (10, 1): 1, (10, 2): 1, (10, 3): 0,
                     (200, 1): 0, (200, 2): 0, (200, 3): 1}
    assert toy.objective([BusCandidate("R", 10), BusCandidate("R", 200)], 50) == 3
    assert toy.objective([BusCandidate("R", 0), BusCandidate("R", 200)], 50) == 2
    assert toy.objective([], 50) == 0


def test_duplicate_passengers_each_count(toy):
    dup = toy.with_passengers(toy.passengers + [Passenger("A", "B", 200, 9)])
    assert dup.objective([BusCandidate("R", 200)], 50) == 2


def test_objective_matches_enumeration_on_random_instances(rng):
    for _ in range(150):
        inst = random_small_instance(rng)
        theta = int(rng.integers(0, 400))
        for size in range(0, 4):
            for combo in itertools.islice(itertools.combinations(inst.candidates, size), 20):
                assert objective(combo, inst.passengers, inst.routes, theta) == \
                    enumerate_objective(combo, inst.passengers, inst.routes, theta)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.integers(0, 400))
def test_objective_bounded_by_passenger_count(seed, theta):
    inst = random_small_instance(np.random.default_rng(seed))
    assert 0 <= inst.objective(inst.candidates, theta) <= len(inst.passengers)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.integers(0, 400), data=st.data())
def test_monotone_and_submodular(seed, theta, data):
    inst = random_small_instance(np.random.default_rng(seed))
    cands = inst.candidates
    t_mask = data.draw(st.lists(st.booleans(), min_size=len(cands), max_size=len(cands)))
    T = [b for b, m in zip(cands, t_mask) if m]
    V = [b for b in T if data.draw(st.booleans())]
    rest = [b for b in cands if b not in T]
    if not rest:
        return
    b = data.draw(st.sampled_from(rest))
    g = lambda s: inst.objective(s, theta)
    assert g(T + [b]) >= g(T)
    assert g(V + [b]) - g(V) >= g(T + [b]) - g(T)


def test_serve_indicator_is_pure(abc):
    p = Passenger("B", "C", 600)
    b = BusCandidate("L", 400)
    before = serve_indicator(b, p, abc, 180)
    objective([BusCandidate("L", d) for d in range(0, 900, 60)],
              [p, Passenger("A", "B", 5)], abc, 180)
    assert serve_indicator(b, p, abc, 180) == before


# -- frequency / instance -------------------------------------------------

def test_frequency_sorted_and_deduplicated():
    f = Frequency((BusCandidate("R", 200), BusCandidate("R", 10)))
    assert [b.depart for b in f] == [10, 200]
    with pytest.raises(InstanceError):
        Frequency((BusCandidate("R", 10), BusCandidate("R", 10)))


def test_frequency_validation(toy):
    Frequency((BusCandidate("R", 10), BusCandidate("R", 200))).validate(toy)
    with pytest.raises(InstanceError):
        Frequency((BusCandidate("R", 10),)).validate(toy)
    with pytest.raises(InstanceError):
        Frequency((BusCandidate("R", 10), BusCandidate("R", 11))).validate(toy)
    Frequency((BusCandidate("R", 10), BusCandidate("R", 11))).validate(toy, require_candidates=False)


def test_instance_validation(toy):
    route = toy.routes["R"]
    with pytest.raises(InstanceError):
        Instance([route], [], [BusCandidate("X", 0)], {"R": 1})
    with pytest.raises(InstanceError):
        Instance([route], [], [BusCandidate("R", 0)], {})
    with pytest.raises(InstanceError):
        Instance([route], [], [BusCandidate("R", 0)], {"R": 0})
    with pytest.raises(InstanceError):
        Instance([route], [], [BusCandidate("R", 0), BusCandidate("R", 0)], {"R": 1})
    with pytest.raises(InstanceError):
        Instance([route, route], [], [BusCandidate("R", 0)], {"R": 1})


def test_infeasible_quota_names_route(toy):
    with pytest.raises(InfeasibleQuotaError) as err:
        toy.with_quotas({"R": 4}).check_quotas()
    assert err.value.route_id == "R" and err.value.available == 3


def test_unservable_count(toy):
    inst = toy.with_passengers(toy.passengers + [Passenger("B", "A", 0), Passenger("A", "Q", 0)])
    assert inst.unservable() == 2
    assert inst.report().candidates_per_route == {"R": 3}
