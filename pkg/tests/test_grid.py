import json

import numpy as np
import pytest

from ucreduce import grid
from ucreduce.errors import DimensionMismatch, ParseError, ValidationError


def _doc(six_bus):
    return json.loads(json.dumps(six_bus.to_dict()))


def test_bundled_fixture_shape(six_bus):
    assert (six_bus.n_buses, len(six_bus.branches), six_bus.n_generators, six_bus.n_periods) == (6, 7, 8, 24)
    assert six_bus.reserve_requirement


def test_base_profile_matches_bus_fields(six_bus):
    prof = grid.base_profile(six_bus)
    assert prof.shape == (6, 24)
    for row, bus in zip(prof.values, six_bus.buses):
        assert np.array_equal(row, bus.base_demand)


def test_base_profile_equals_file_demand_block(six_bus):
    doc = json.loads(grid.bundled_system_path().read_text())
    block = np.array([b["base_demand"] for b in doc["buses"]])
    assert np.array_equal(grid.base_profile(six_bus).values, block)


def test_zero_demand_bus_row_preserved(six_bus):
    # bus 1 carries no load in the fixture
    assert np.all(grid.base_profile(six_bus).values[0] == 0.0)


def test_zero_reactance_names_branch(six_bus, tmp_path):
    doc = _doc(six_bus)
    doc["branches"][3]["reactance"] = 0.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError, match="branch 4: reactance"):
        grid.load_system(path)


def test_generator_on_missing_bus(six_bus):
    doc = _doc(six_bus)
    doc["generators"][0]["bus"] = 99
    with pytest.raises(ValidationError, match="generator 1: bus 99"):
        grid.system_from_dict(doc)


@pytest.mark.parametrize("mutate, pattern", [
    (lambda d: d["generators"][2].update(p_min=500.0), "p_min exceeds p_max"),
    (lambda d: d["generators"][2].update(cost_energy=-1.0), "cost_energy"),
    (lambda d: d["branches"][0].update(to=d["branches"][0]["from"]), "from and to bus"),
    (lambda d: d["branches"][0].update(flow_limit=0.0), "flow_limit"),
    (lambda d: d.update(reference_bus=42), "reference_bus"),
    (lambda d: d["buses"][1]["base_demand"].__setitem__(0, -1.0), "base_demand"),
    (lambda d: d["buses"][1]["base_demand"].pop(), "length 23"),
    (lambda d: d["generators"].clear(), "at least one generator"),
    (lambda d: d["buses"][2].update(id=2), "duplicate bus id"),
    (lambda d: d["generators"][0].pop("p_max"), "missing field 'p_max'"),
    (lambda d: d["generators"][0].update(initial_status=2), "initial_status"),
])
def test_invariant_violations(six_bus, mutate, pattern):
    doc = _doc(six_bus)
    mutate(doc)
    with pytest.raises(ValidationError, match=pattern):
        grid.system_from_dict(doc)


def test_capacity_below_peak_rejected(six_bus):
    doc = _doc(six_bus)
    for g in doc["generators"]:
        g["p_max"] = 10.0
        g["p_min"] = 0.0
    with pytest.raises(ValidationError, match="below peak"):
        grid.system_from_dict(doc)


def test_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        grid.load_system(path)


def test_round_trip_identity(six_bus, tmp_path):
    path = tmp_path / "sys.json"
    grid.save_system(six_bus, path)
    again = grid.load_system(path)
    assert again == six_bus
    assert again.digest() == six_bus.digest()
    grid.validate(again)


def test_reserve_flag_round_trips(tmp_path):
    sys_ = grid.GridSystem([grid.Bus(1, [10.0])], [], [grid.Generator(1, 1, 0, 20, 20, 5, 1, 0, 0)],
                           1, 1, reserve_requirement=False)
    path = tmp_path / "toy.json"
    grid.save_system(sys_, path)
    assert grid.load_system(path).reserve_requirement is False


def test_system_is_immutable(six_bus):
    with pytest.raises(Exception):
        six_bus.n_periods = 3
    with pytest.raises(ValueError):
        six_bus.buses[1].base_demand[0] = 1.0


def test_profile_csv_round_trip(six_bus, tmp_path):
    prof = grid.base_profile(six_bus)
    path = tmp_path / "d.csv"
    grid.save_profile_csv(six_bus, prof, path)
    assert grid.load_profile_csv(six_bus, path) == prof


def test_profile_dimension_check(six_bus):
    with pytest.raises(DimensionMismatch):
        grid.check_profile(six_bus, grid.DemandProfile(np.zeros((5, 24))))
    with pytest.raises(ValidationError):
        grid.DemandProfile([[1.0, -2.0]])
