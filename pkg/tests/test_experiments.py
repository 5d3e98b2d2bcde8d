"""Experiment drivers: scalability model, gas survey, epsilon sweep, CSV."""

import csv
import math

import pytest

from midastouch.experiments import (EPSILON_COLUMNS, GAS_COLUMNS,
                                    SCALABILITY_COLUMNS, epsilon_sweep_rows,
                                    gas_survey_rows, loglog_slope,
                                    modeled_ops_per_sec, run_epsilon_sweep,
                                    run_gas_survey, run_scalability,
                                    scalability_rows, throughput_ceiling,
                                    write_rows_csv)


def test_throughput_ceiling_is_platform_bound():
    # 15 tx/s with a 64x speedup = 960, well under the 10000 chain cap
    assert throughput_ceiling() == 960


def test_modeled_ops_per_sec_shape():
    for n in (1, 2, 3):
        assert modeled_ops_per_sec(n) == 960.0
    assert modeled_ops_per_sec(4) == 960.0  # 12 ordered pairs normalize out
    values = [modeled_ops_per_sec(n) for n in range(4, 21)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert modeled_ops_per_sec(20) == pytest.approx(960 * 12 / 380)


def test_loglog_slope_recovers_exact_power_laws():
    quadratic = [(float(n), float(n * n)) for n in range(4, 21)]
    assert loglog_slope(quadratic) == pytest.approx(2.0, abs=1e-12)
    linear = [(float(n), 3.0 * n) for n in range(4, 21)]
    assert loglog_slope(linear) == pytest.approx(1.0, abs=1e-12)


def test_scalability_rows_count_messages_exactly():
    rows = scalability_rows(seed=0, max_n=8)
    assert [r["n"] for r in rows] == list(range(1, 9))
    for row in rows:
        n = row["n"]
        expected = 0 if n < 4 else 3 * n * (n - 1)
        assert row["messages_per_round"] == expected
        assert row["btc_tps_cap"] == 10_000
        assert row["eth_tps_cap"] == 960


def test_gas_survey_rows_order_and_costs():
    rows = gas_survey_rows(seed=0)
    templates = [r["template"] for r in rows]
    assert templates == ["FT", "Stablecoin", "NFT", "Loan", "Auction",
                         "Insurance", "DAO"]
    gas = {r["template"]: r["gas_units"] for r in rows}
    assert (gas["FT"] < gas["Stablecoin"] < gas["NFT"] <= gas["Loan"]
            <= gas["Auction"] < gas["Insurance"] <= gas["DAO"])
    for row in rows:
        assert row["inscription_value"] == 10_000
        assert row["bridge_fee"] == 500  # 5% of the carried value
        assert row["total_cost_sats"] == 500 + row["gas_units"]
        expected_pct = round(100 * (500 + row["gas_units"]) / 10_000, 4)
        assert row["cost_pct"] == expected_pct


def test_epsilon_sweep_monotonicity_single_seed():
    rows = epsilon_sweep_rows(seeds=[3], epsilons=(1, 2, 5, 10, 20))
    assert [r["epsilon"] for r in rows] == [1, 2, 5, 10, 20]
    bundled = {r["bundled_inscriptions"] for r in rows}
    assert len(bundled) == 1  # same arrivals regardless of epoch geometry
    overheads = [r["time_overhead"] for r in rows]
    assert all(a > b for a, b in zip(overheads, overheads[1:]))
    sizes = [r["avg_bundle_size"] for r in rows]
    assert all(a < b for a, b in zip(sizes, sizes[1:]))
    for row in rows:
        assert row["epochs"] == 500 // row["epsilon"]


def test_epsilon_sweep_span_must_divide():
    with pytest.raises(ValueError, match="not divisible"):
        epsilon_sweep_rows(seeds=[0], epsilons=(3,), span=500)


def test_write_rows_csv_bytes(tmp_path):
    path = tmp_path / "out" / "rows.csv"
    rows = [{"a": 1, "b": "x"}, {"a": 2, "b": "y"}]
    write_rows_csv(path, ("a", "b"), rows)
    assert path.read_bytes() == b"a,b\r\n1,x\r\n2,y\r\n"


def test_run_wrappers_write_matching_csv(tmp_path):
    rows = run_scalability(tmp_path / "sc.csv", seed=1, max_n=6)
    with open(tmp_path / "sc.csv", newline="") as fh:
        parsed = list(csv.DictReader(fh))
    assert list(parsed[0]) == list(SCALABILITY_COLUMNS)
    assert len(parsed) == len(rows) == 6

    rows = run_gas_survey(tmp_path / "gas.csv", seed=1)
    with open(tmp_path / "gas.csv", newline="") as fh:
        parsed = list(csv.DictReader(fh))
    assert list(parsed[0]) == list(GAS_COLUMNS)
    assert len(parsed) == 7

    rows = run_epsilon_sweep(tmp_path / "eps.csv", seeds=[0],
                             epsilons=(10, 20))
    with open(tmp_path / "eps.csv", newline="") as fh:
        parsed = list(csv.DictReader(fh))
    assert list(parsed[0]) == list(EPSILON_COLUMNS)
    assert len(parsed) == len(rows) == 2


def test_scalability_slope_lands_near_two():
    rows = scalability_rows(seed=0, max_n=20)
    points = [(float(r["n"]), float(r["messages_per_round"]))
              for r in rows if r["n"] >= 4]
    slope = loglog_slope(points)
    assert math.isclose(slope, 2.13, abs_tol=0.01)
