import itertools
import json
import os
from pathlib import Path

import pytest

import fleetdspl

DATA = Path(os.environ.get("FLEETDSPL_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))
MODEL = (DATA / "models" / "irrigation.json").read_text()
SCENARIO = (DATA / "scenarios" / "irrigation.json").read_text()


@pytest.fixture(scope="module")
def model():
    return fleetdspl.parse_model(MODEL)


def test_parse_model(model):
    assert len(model) == 8
    assert model.features[0] == "Fleet"
    assert model.needs("Sprinkler") == ["water.sprinkle"]


def test_parse_errors():
    with pytest.raises(fleetdspl.SemanticError):
        fleetdspl.parse_model(
            json.dumps({"name": "x", "root": {"name": "Fleet"},
                        "constraints": [{"kind": "requires", "from": "Fleet", "to": "X"}]})
        )
    with pytest.raises(fleetdspl.SyntaxError):
        fleetdspl.parse_model("{")


def test_check_selection(model):
    assert fleetdspl.check_selection(model, {"Fleet", "Sensing", "SoilMoisture"}) == []
    violations = fleetdspl.check_selection(model, {"Fleet", "Sensing", "AirTemp", "Sprinkler", "Fertilizing"})
    assert violations == ["requires Fertilizing->SoilMoisture"]
    with pytest.raises(fleetdspl.UnknownFeature):
        fleetdspl.check_selection(model, {"Fleet", "Nope"})


def test_enumerate_matches_check(model):
    selections, total, truncated = fleetdspl.enumerate_configurations(model)
    assert total == len(selections) == 15 and not truncated
    # Every valid subset is listed exactly once.
    names = model.features
    valid = set()
    for r in range(len(names) + 1):
        for combo in itertools.combinations(names, r):
            if not fleetdspl.check_selection(model, set(combo)):
                valid.add(tuple(sorted(combo)))
    assert valid == {tuple(s) for s in selections}
    few, total, truncated = fleetdspl.enumerate_configurations(model, limit=2)
    assert len(few) == 2 and total == 15 and truncated


def test_derive(model):
    registry = [
        fleetdspl.DeviceDescriptor("sprk9", ["water.sprinkle"]),
        fleetdspl.DeviceDescriptor("sprk1", ["water.sprinkle"]),
        fleetdspl.DeviceDescriptor("soil1", ["sense.soil"]),
    ]
    cfg = fleetdspl.derive_fconfig(model, {"Fleet", "Sensing", "SoilMoisture", "Fertilizing", "Sprinkler"}, registry)
    assert cfg["bindings"] == {"Sprinkler": "sprk1", "SoilMoisture": "soil1"}
    with pytest.raises(fleetdspl.UnsatisfiedCapability):
        fleetdspl.derive_fconfig(model, {"Fleet", "Sensing", "AirTemp"}, registry)
    with pytest.raises(fleetdspl.FleetError):
        fleetdspl.DeviceDescriptor("d1", [], battery=120)


def test_diff():
    assert fleetdspl.diff_selections({"A", "B"}, {"B", "C"}) == ({"C"}, {"A"})


def test_run_scenario_deterministic():
    a = fleetdspl.run_scenario(SCENARIO, 3, 150, str(DATA / "scenarios"))
    b = fleetdspl.run_scenario(SCENARIO, 3, 150, str(DATA / "scenarios"))
    assert a["trace"] == b["trace"]
    assert a["trace"].count('"kind":"Analyze"') == 30
    assert fleetdspl.verify_trace(a["trace"]) == (True, "")
    assert 0.0 <= a["effective"] <= 1.0


def test_run_errors():
    with pytest.raises(fleetdspl.PreconditionError):
        fleetdspl.run_scenario(SCENARIO, 1, 0, str(DATA / "scenarios"))
    with pytest.raises(fleetdspl.ScenarioError):
        fleetdspl.run_scenario("{}", 1, 10)
    with pytest.raises(fleetdspl.TraceFormatError):
        fleetdspl.verify_trace('{"t":0,"kind":"Reading"')
