import hashlib

import pytest

from conftest import FIXTURES
from fastbus.io import (FormatError, GeneratorConfig, generate_candidates, generate_instance,
                        load_instance, read_departures, save_instance, write_schedule)
from fastbus.model import BusCandidate, Frequency, InfeasibleQuotaError, Route
from fastbus.partition import passenger_pool

TOY = FIXTURES / "toy"


def toy_files(**override):
    files = {k: TOY / f"{k}.csv" for k in ("routes", "passengers", "quotas")}
    files.update(override)
    return files


def write(path, text):
    path.write_text(text)
    return path


def digest(directory):
    h = hashlib.sha256()
    for p in sorted(directory.iterdir()):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def small_cfg(**kw):
    base = dict(route_count=6, passenger_count=300, window=(20000, 30000), step=300, seed=4)
    base.update(kw)
    return GeneratorConfig(**base)


def test_toy_fixture_loads():
    inst, report = load_instance(**toy_files(), window=(0, 300), step=10)
    assert report.unservable == 0
    assert report.candidates_per_route == {"R": 31}
    assert inst.quotas == {"R": 2}
    assert inst.routes["R"].cum_time == (0, 120)
    assert [p.pid for p in inst.passengers] == [1, 2, 3]


def test_minimal_fixture(tmp_path):
    r = write(tmp_path / "r.csv", "route_id,seq,stop_id,segment_seconds\n7,0,1,0\n7,1,2,30\n")
    p = write(tmp_path / "p.csv", "passenger_id,board_stop,alight_stop,arrival_seconds\n0,1,2,5\n")
    q = write(tmp_path / "q.csv", "route_id,n\n7,1\n")
    inst, report = load_instance(r, p, q, window=(0, 60), step=60)
    assert report.unservable == 0
    assert list(inst.candidates) == [BusCandidate(7, 0), BusCandidate(7, 60)]


def test_unknown_stop_names_row(tmp_path):
    p = write(tmp_path / "p.csv",
              "passenger_id,board_stop,alight_stop,arrival_seconds\n1,A,B,0\n2,A,Z,5\n")
    with pytest.raises(FormatError, match=r"p\.csv:3: unknown stop 'Z'"):
        load_instance(**toy_files(passengers=p))


def test_quota_exceeding_candidates_names_route(tmp_path):
    q = write(tmp_path / "q.csv", "route_id,n\nR,5\n")
    with pytest.raises(InfeasibleQuotaError, match="'R'"):
        load_instance(**toy_files(quotas=q), window=(0, 120), step=60)


@pytest.mark.parametrize("routes, line, msg", [
    ("route_id,seq,stop_id,segment_seconds\nR,0,A,0\nR,1,B,1.5\n", 3, "integer"),
    ("route_id,seq,stop_id,segment_seconds\nR,0,A,0\nR,1,B,-4\n", 3, "non-negative"),
    ("route_id,seq,stop_id,segment_seconds\nR,0,A,0\nR,2,B,5\n", 2, "seq must run"),
    ("route_id,seq,stop_id,segment_seconds\nR,0,A,0\nR,1,B\n", 3, "expected 4 fields"),
    ("route,seq,stop,segment\nR,0,A,0\n", 1, "expected header"),
])
def test_malformed_routes(tmp_path, routes, line, msg):
    r = write(tmp_path / "routes.csv", routes)
    with pytest.raises(FormatError, match=msg) as exc:
        load_instance(**toy_files(routes=r))
    assert exc.value.line == line


def test_fractional_arrival_rejected(tmp_path):
    p = write(tmp_path / "p.csv", "passenger_id,board_stop,alight_stop,arrival_seconds\n1,A,B,0.5\n")
    with pytest.raises(FormatError, match=":2: arrival_seconds must be an integer"):
        load_instance(**toy_files(passengers=p))


def test_dangling_quota_and_candidate(tmp_path):
    q = write(tmp_path / "q.csv", "route_id,n\nR,1\nX,1\n")
    with pytest.raises(FormatError, match=":3: unknown route 'X'"):
        load_instance(**toy_files(quotas=q))
    c = write(tmp_path / "c.csv", "route_id,depart_seconds\nR,0\nQ,5\n")
    with pytest.raises(FormatError, match=":3: unknown route 'Q'"):
        load_instance(**toy_files(candidates=c))


def test_candidate_generation_rules():
    r = [Route(1, ("A", "B"), (0, 10))]
    assert [b.depart for b in generate_candidates(r, (0, 120), 60)] == [0, 60, 120]
    assert [b.depart for b in generate_candidates(r, (100, 150), 500)] == [100]
    assert len(generate_candidates(r)) == 1140
    # a 396-route network at the default rule
    assert 396 * len(generate_candidates(r)) == 451_440
    with pytest.raises(ValueError):
        generate_candidates(r, (0, 100), 0)
    with pytest.raises(ValueError):
        generate_candidates(r, (200, 100), 60)


def test_round_trip(tmp_path):
    inst = generate_instance(small_cfg(overlap=0.5))
    paths = save_instance(inst, tmp_path)
    back, _ = load_instance(paths["routes"], paths["passengers"], paths["quotas"],
                            paths["candidates"])
    assert back == inst


def test_round_trip_string_ids(tmp_path):
    inst, _ = load_instance(**toy_files(), window=(0, 300), step=10)
    paths = save_instance(inst, tmp_path)
    back, _ = load_instance(paths["routes"], paths["passengers"], paths["quotas"],
                            paths["candidates"])
    assert back == inst


def test_generator_is_byte_deterministic(tmp_path):
    cfg = small_cfg()
    save_instance(generate_instance(cfg), tmp_path / "a")
    save_instance(generate_instance(cfg), tmp_path / "b")
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    save_instance(generate_instance(small_cfg(seed=5)), tmp_path / "c")
    assert digest(tmp_path / "a") != digest(tmp_path / "c")


@pytest.mark.parametrize("seed", range(5))
def test_zero_overlap_gives_disjoint_pools(seed):
    inst = generate_instance(small_cfg(overlap=0.0, seed=seed, route_count=10))
    pools = [passenger_pool(inst.passengers, [r]) for r in inst.routes.values()]
    for i in range(len(pools)):
        for j in range(i + 1, len(pools)):
            assert not pools[i] & pools[j]


def test_zero_passengers(tmp_path):
    inst = generate_instance(small_cfg(passenger_count=0))
    paths = save_instance(inst, tmp_path)
    assert paths["passengers"].read_text().strip().count("\n") == 0
    back, report = load_instance(paths["routes"], paths["passengers"], paths["quotas"],
                                 paths["candidates"])
    assert len(back.passengers) == 0 and report.unservable == 0


def test_generator_envelopes():
    cfg = small_cfg(route_count=9, stops_per_route=(5, 7), segment_seconds=(30, 40),
                    passenger_count=777, overlap=0.4)
    inst = generate_instance(cfg)
    assert len(inst.routes) == 9 and len(inst.passengers) == 777
    for r in inst.routes.values():
        assert 5 <= len(r.stops) <= 7
        segs = [b - a for a, b in zip(r.cum_time, r.cum_time[1:])]
        assert all(30 <= s <= 40 for s in segs)
    assert inst.unservable() == 0
    assert all(0 <= p.arrival < 86400 for p in inst.passengers)
    assert set(inst.quotas.values()) == {cfg.quota}


def test_generator_config_json(tmp_path):
    cfg = small_cfg(overlap=0.25)
    path = write(tmp_path / "g.json", cfg.to_json())
    assert GeneratorConfig.from_json(path) == cfg
    with pytest.raises(ValueError):
        GeneratorConfig(overlap=2)


def test_schedule_written_sorted(tmp_path):
    freq = Frequency((BusCandidate("R", 200), BusCandidate("R", 10)))
    write_schedule(freq, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == "route_id,depart_seconds\nR,10\nR,200\n"
    assert read_departures(tmp_path / "s.csv") == [BusCandidate("R", 10), BusCandidate("R", 200)]
