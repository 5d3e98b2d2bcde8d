"""Scenario runner: file format checks and scripted end-to-end runs."""

import json

import pytest

from midastouch.scenario import (ScenarioError, load_scenario, run_scenario,
                                 run_scenario_file)


def minimal_doc(**overrides):
    doc = {
        "name": "minimal",
        "config": {"seed": 1, "committee_size": 3, "blocks": 0},
        "committee": [{}, {}, {}],
        "contracts": [{"label": "token", "template": "FT"}],
        "users": [{"name": "u"}],
        "steps": [
            {
                "height": 4,
                "from": "u",
                "contract": "token",
                "value": 10000,
                "envelope": {"p": "brc-20", "op": "deploy", "tick": "aaaa",
                             "max": "1000", "lim": "10"},
            }
        ],
        "run_until_height": 18,
        "expect": {"receipts": [{"step": 0, "success": True}]},
    }
    doc.update(overrides)
    return doc


def test_minimal_scenario_passes():
    result = run_scenario(minimal_doc())
    assert result.ok, result.problems
    step = result.steps[0]
    assert step.settled and step.success
    assert step.receipt_height is not None
    summary = result.summary_dict()
    assert summary["ok"] is True
    assert summary["steps"][0]["success"] is True


def test_unknown_top_level_key_rejected():
    with pytest.raises(ScenarioError, match="unknown scenario keys"):
        run_scenario(minimal_doc(extra_knob=1))


def test_run_until_height_required():
    doc = minimal_doc()
    del doc["run_until_height"]
    with pytest.raises(ScenarioError, match="run_until_height"):
        run_scenario(doc)


def test_step_collision_with_setup_blocks():
    doc = minimal_doc()
    doc["steps"][0]["height"] = 2
    with pytest.raises(ScenarioError, match="collides with setup"):
        run_scenario(doc)


def test_run_ends_before_last_step():
    doc = minimal_doc(run_until_height=3)
    with pytest.raises(ScenarioError, match="ends before the last step"):
        run_scenario(doc)


def test_unknown_contract_label():
    doc = minimal_doc()
    doc["steps"][0]["contract"] = "nope"
    with pytest.raises(ScenarioError, match="unknown contract label"):
        run_scenario(doc)


def test_bad_template_name():
    doc = minimal_doc(contracts=[{"label": "token", "template": "Rocket"}])
    with pytest.raises(ScenarioError, match="bad template"):
        run_scenario(doc)


def test_bad_config_propagates():
    doc = minimal_doc()
    doc["config"]["epsilon"] = 0
    with pytest.raises(ScenarioError, match="bad config"):
        run_scenario(doc)


def test_failed_expectation_is_reported_not_raised():
    doc = minimal_doc()
    doc["expect"] = {"receipts": [{"step": 0, "success": False}]}
    result = run_scenario(doc)
    assert not result.ok
    assert any("success=True" in p for p in result.problems)


def test_within_blocks_expectation_can_fail():
    doc = minimal_doc()
    doc["expect"] = {"receipts": [{"step": 0, "within_blocks": 1}]}
    result = run_scenario(doc)
    assert any("bound 1" in p for p in result.problems)


def test_expectation_for_unknown_step():
    doc = minimal_doc()
    doc["expect"] = {"receipts": [{"step": 5, "success": True}]}
    result = run_scenario(doc)
    assert any("unknown step" in p for p in result.problems)


def test_stall_expectation():
    doc = minimal_doc(
        config={"seed": 1, "committee_size": 4, "blocks": 0,
                "fault_plan": {"0": "silent", "1": "silent"}},
        committee=[{}, {}, {}, {}],
        expect={"stall": True},
        run_until_height=24)
    result = run_scenario(doc)
    # consensus stalls as expected; the step never settles, which is the point
    assert result.ok or all("no receipt" not in p for p in result.problems)
    assert result.metrics["consensus_failures"] > 0


def test_stall_expectation_fails_on_healthy_run():
    doc = minimal_doc(expect={"stall": True})
    result = run_scenario(doc)
    assert any("expected a stall" in p for p in result.problems)


def test_load_scenario_errors(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(missing)
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load_scenario(bad)
    array = tmp_path / "arr.json"
    array.write_text("[1]")
    with pytest.raises(ScenarioError, match="JSON object"):
        load_scenario(array)


def test_shipped_scenario_file_passes(scenarios_dir):
    result = run_scenario_file(
        scenarios_dir / "three_validators_one_user.json",
        keep_simulation=True)
    assert result.ok, result.problems
    assert result.steps[0].success is True
    # the committee of three runs in central mode: no consensus traffic
    assert result.metrics["messages_total"] == 0
    assert result.simulation is not None


def test_scenario_with_explicit_committee_addresses():
    doc = minimal_doc(committee=[
        {"eth_addr": "0xc0ffee0000000000000000000000000000000001",
         "btc_addr": "bc1qcustom1", "deposit": 40},
        {}, {},
    ])
    result = run_scenario(doc, keep_simulation=True)
    assert result.ok, result.problems
    vs = result.simulation.validator_set
    record = vs.get("0xc0ffee0000000000000000000000000000000001")
    assert record is not None and record.deposit == 40


def test_same_height_steps_share_a_block(tmp_path):
    doc = minimal_doc()
    doc["steps"].append({
        "height": 4, "from": "u", "contract": "token", "value": 5000,
        "envelope": {"p": "brc-20", "op": "mint", "tick": "aaaa",
                     "amt": "10"},
    })
    doc["expect"] = {"receipts": [{"step": 0, "success": True},
                                  {"step": 1, "success": True}]}
    path = tmp_path / "two.json"
    path.write_text(json.dumps(doc))
    result = run_scenario_file(path)
    assert result.ok, result.problems
    assert result.steps[0].height == result.steps[1].height == 4
