from __future__ import annotations

import numpy as np
import pytest

from asynccd.async_sim import Schedule, SpanModel, generate_schedule, interference_report, scc_order
from asynccd.harness.acceptance import scc_worked_example


def test_worked_example_positions():
    ex = scc_worked_example()
    order = scc_order(ex)
    assert [ex.commit[order[i]] for i in (2, 8, 11)] == [9.25, 12.25, 18.25]
    assert [ex.start[order[i]] for i in (2, 8, 11)] == [2.0, 11.0, 8.0]


def test_single_core():
    sch = generate_schedule(10, 50, 1, "uniform:0.5,2", seed=1)
    assert sch.q == 0
    np.testing.assert_array_equal(sch.start_order, sch.commit_order)
    np.testing.assert_array_equal(sch.scc_order, sch.start_order)
    rep = interference_report(sch)
    assert rep["scc_range_ok"] and all(v == [] for v in rep["interferers"].values())


def test_two_cores_constant_spans():
    for seed in range(20):
        assert generate_schedule(5, 100, 2, "constant:1", seed=seed).q <= 2


def test_bimodal_sanity_ceiling():
    m = SpanModel.parse("bimodal:1,10,0.5")
    sch = generate_schedule(20, 1000, 3, m, seed=0)
    assert 0 < sch.q <= 3 * m.max_span / m.min_span


def test_distinct_coords_scc_is_start_order():
    sch = generate_schedule(10**9, 200, 4, "uniform:0.5,3", seed=2)
    sch = Schedule(sch.core, sch.start, sch.commit, np.arange(sch.T))
    np.testing.assert_array_equal(sch.scc_order, sch.start_order)


def test_one_coordinate_commit_ordered_is_identity():
    start = np.arange(6, dtype=float)
    sch = Schedule(core=np.arange(6), start=start, commit=start + 0.5, coord=np.zeros(6))
    np.testing.assert_array_equal(sch.scc_order, np.arange(6))


def test_hand_built_overlap():
    sch = Schedule(core=[0, 1], start=[0.0, 1.0], commit=[3.0, 2.0], coord=[0, 1])
    assert list(sch.interferers(0)) == [1]
    assert list(sch.interferers(1)) == []
    rep = interference_report(sch)
    assert rep["scc_range_ok"]
    assert rep["interferers"][0] == [1]


def test_invalid_schedules():
    with pytest.raises(ValueError):
        Schedule(core=[0], start=[1.0], commit=[1.0], coord=[0])
    with pytest.raises(ValueError):
        Schedule(core=[0, 1], start=[1.0], commit=[2.0], coord=[0])
    with pytest.raises(ValueError):
        generate_schedule(5, 10, 0, "constant:1")
    with pytest.raises(ValueError):
        SpanModel.parse("gamma:1,2")


def test_scc_properties_on_random_schedules():
    rng = np.random.default_rng(4)
    models = ("constant:1", "uniform:0.5,3", "bimodal:1,10,0.5")
    for i in range(300):
        cores = int(rng.integers(1, 9))
        T = int(rng.integers(1, 300))
        sch = generate_schedule(max(2, T // 4), T, cores, models[i % 3], seed=i)
        order = sch.scc_order
        assert np.array_equal(np.sort(order), np.arange(T))
        for j in np.unique(sch.coord):
            mine = np.flatnonzero(sch.coord == j)
            pos = np.sort(sch.scc_time[mine])
            np.testing.assert_array_equal(pos, np.sort(sch.start_rank[mine]))
            in_scc = order[np.isin(order, mine)]
            assert np.all(np.diff(sch.commit[in_scc]) > 0)
        assert interference_report(sch, with_sets=False)["scc_range_ok"]


def test_schedule_json_round_trip(tmp_path):
    sch = generate_schedule(7, 40, 3, "uniform:0.5,3", seed=5)
    sch.to_json(tmp_path / "s.json")
    back = Schedule.from_json(tmp_path / "s.json")
    for name in ("core", "start", "commit", "coord"):
        assert np.array_equal(getattr(back, name), getattr(sch, name))


def test_uou_diagnostic_reported():
    rep = interference_report(generate_schedule(10, 400, 4, "bimodal:1,10,0.5", seed=0), with_sets=False)
    assert len(rep["uou_tv"]) == 3 and all(0 <= v <= 1 for v in rep["uou_tv"])
