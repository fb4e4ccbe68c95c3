import copy
import json

import pytest

from gfmdac.events import EventKind
from gfmdac.scenario import ScenarioValidationError, load_scenario, parse_and_validate, validate_document, with_overrides

from helpers import two_bus_doc


def test_bundled_device_counts(bundled):
    a, b, c = bundled("scenario_a"), bundled("scenario_b"), bundled("scenario_c")
    assert (len(a.dgs), len(a.gfms), len(a.gfls)) == (2, 3, 2)
    assert sum(g.params.s_inv for g in a.gfms) == 1300.0
    assert sum(d.params.rating for d in a.dgs) == 2000.0
    assert sum(g.state.rating for g in a.gfls) == 220.0
    assert (len(b.dgs), len(b.gfms), len(b.gfls)) == (3, 1, 3)
    assert b.gfms[0].params.s_inv == 75.0
    assert b.network.loads[6][0] * b.network.s_base == pytest.approx(920.0)
    assert c.attack.targets == frozenset({"gfm2", "gfm3"}) and (c.attack.t_on, c.attack.t_off) == (2.0, 16.0)


def test_even_q_rejected_with_reason():
    doc = two_bus_doc()
    doc["dac"]["q"] = 2
    with pytest.raises(ScenarioValidationError) as exc:
        validate_document(doc)
    assert "odd" in str(exc.value) and exc.value.issues[0].path == "/dac/q"


def test_all_issues_reported():
    doc = two_bus_doc()
    doc["dac"].update(omega_min=60.2, omega_max=60.1)
    doc["devices"][0]["bus"] = 7
    doc["events"] = [{"at": 1.0, "kind": "breaker_open", "target": "missing"}]
    with pytest.raises(ScenarioValidationError) as exc:
        validate_document(doc)
    paths = {i.path for i in exc.value.issues}
    assert {"/dac", "/devices/0/bus", "/events/0/target"} <= paths


def test_schema_errors_have_paths():
    doc = two_bus_doc()
    doc["sim"]["dt"] = 0.5
    doc["devices"][1]["m_p"] = -1
    with pytest.raises(ScenarioValidationError) as exc:
        validate_document(doc)
    paths = {i.path for i in exc.value.issues}
    assert "/sim/dt" in paths and "/devices/1/m_p" in paths


@pytest.mark.parametrize("text", ["", "[]", "{", '{"network": 3}', "null"])
def test_malformed_documents_never_crash(text):
    with pytest.raises(ScenarioValidationError):
        parse_and_validate(text)


def test_two_sources_on_one_bus_rejected():
    doc = two_bus_doc()
    doc["devices"][1]["bus"] = 0
    with pytest.raises(ScenarioValidationError, match="already hosts"):
        validate_document(doc)


def test_redispatch_needs_dg_target():
    doc = two_bus_doc()
    doc["events"] = [{"at": 1.0, "kind": "dg_redispatch", "targets": ["gfm1"], "value": 0.5}]
    with pytest.raises(ScenarioValidationError, match="not a dg"):
        validate_document(doc)


def test_events_sorted_with_stable_ties():
    doc = two_bus_doc()
    doc["events"] = [
        {"at": 1.0, "kind": "load_step", "target": 1, "value": 0.1},
        {"at": 0.5, "kind": "breaker_open", "target": "l01"},
        {"at": 1.0, "kind": "breaker_close", "target": "l01"},
    ]
    sc = validate_document(doc)
    assert [(e.at, e.kind) for e in sc.events] == [(0.5, EventKind.BREAKER_OPEN), (1.0, EventKind.LOAD_STEP),
                                                   (1.0, EventKind.BREAKER_CLOSE)]


def test_overrides(bundled):
    sc = with_overrides(bundled("scenario_b"), dac=False, dt=5e-4, t_end=3.0, params={"gfm1.s_inv": 60.0})
    assert not sc.gfms[0].dac.enabled and sc.sim.dt == 5e-4 and sc.sim.t_end == 3.0
    assert sc.gfms[0].params.s_inv == 60.0
    with pytest.raises(ScenarioValidationError):
        with_overrides(bundled("scenario_b"), params={"nobody.s_inv": 1.0})
    with pytest.raises(ScenarioValidationError):
        with_overrides(bundled("scenario_b"), params={"gfm1.kind": 1.0})


def test_unknown_scenario_is_io_error():
    with pytest.raises(FileNotFoundError):
        load_scenario("/no/such/file.json")


def test_raw_document_round_trips(bundled):
    sc = bundled("scenario_a")
    again = parse_and_validate(json.dumps(sc.raw))
    assert again.raw == sc.raw and copy.deepcopy(again.raw) == sc.raw
