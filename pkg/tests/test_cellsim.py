import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jamcell.cellsim import (JAMMER_DISTANCE_M, Scenario, SweepAxis, Traffic, account,
                             apply_axis, jammers_at, run_cell, select_mcs, summarize, sweep)
from jamcell.jammer import JammerKind, JammerSpec
from jamcell.receiver import DEFAULT_MCS_TABLE, McsEntry

BARRAGE_224 = JammerSpec(JammerKind.BARRAGE, 20.0, (224.0, 0.0))


def small(**kw):
    base = dict(n_ue=5, duration_frames=20)
    base.update(kw)
    return Scenario(**base)


def test_select_mcs_extremes():
    assert select_mcs(-20.0) == 0
    assert select_mcs(100.0) == len(DEFAULT_MCS_TABLE) - 1
    assert select_mcs(10.5, backoff_db=1.0) == 0
    assert select_mcs(11.0, backoff_db=1.0) == 1


def test_select_mcs_errors():
    with pytest.raises(ValueError):
        select_mcs(0.0, ())
    unsorted = (McsEntry("a", "QPSK", 0.5, 5.0), McsEntry("b", "QPSK", 0.5, 1.0))
    with pytest.raises(ValueError):
        select_mcs(0.0, unsorted)


@given(st.floats(-40, 60), st.floats(-40, 60))
def test_select_mcs_monotone(a, b):
    lo, hi = sorted((a, b))
    assert select_mcs(lo) <= select_mcs(hi)


def test_accounting_scripted_log():
    log = [(9000, False)] * 70 + [(9000, True)] * 30
    thr, good = account(log, 1.0)
    assert thr == pytest.approx(900e3)
    assert good == pytest.approx(630e3)
    with pytest.raises(ValueError):
        account(log, 0.0)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(n_ue=0)
    with pytest.raises(ValueError):
        Scenario(n_ue=1, ue_positions=((600.0, 0.0),))
    with pytest.raises(ValueError):
        Scenario(n_ue=2, ue_positions=((0.0, 0.0),))


def test_single_ue_at_center_no_retx():
    m = run_cell(Scenario(n_ue=1, ue_positions=((0.0, 0.0),), mobility=None, duration_frames=50))
    assert m.goodput_bps == m.throughput_bps
    assert m.retx_fraction == 0.0
    assert m.per_ue[0].tx_count == 50 * 20


def test_harq_disabled_goodput_equals_throughput():
    m = run_cell(small(jammers=(JammerSpec(JammerKind.BARRAGE, 40.0, (224.0, 0.0)),),
                       harq_max_attempts=1))
    assert m.goodput_bps == m.throughput_bps
    assert m.retx_fraction == 0.0


def test_one_jammer_lowers_throughput():
    base = np.mean([run_cell(small(seed=s)).throughput_bps for s in range(5)])
    jam = np.mean([run_cell(small(seed=s, jammers=(BARRAGE_224,))).throughput_bps for s in range(5)])
    assert jam < base


def test_smart_jammer_spares_pdsch():
    smart = JammerSpec(JammerKind.SMART_SSB, 40.0, (224.0, 0.0))
    a = run_cell(small(seed=2))
    b = run_cell(small(seed=2, jammers=(smart,)))
    assert a.throughput_bps == b.throughput_bps


def test_run_cell_deterministic():
    sc = small(seed=9, jammers=(BARRAGE_224,))
    a, b = run_cell(sc), run_cell(sc)
    assert a.throughput_bps == b.throughput_bps
    assert a.per_ue[3].sinr_db == b.per_ue[3].sinr_db


def test_throughput_monotone_in_power():
    rows = sweep(small(jammers=(BARRAGE_224,)), SweepAxis.JAM_POWER, [0, 15, 30, 45],
                 seeds=range(5))
    means = [r["throughput_bps_mean"] for r in summarize(rows)]
    assert all(b <= a * 1.02 for a, b in zip(means, means[1:]))


def test_cbr_traffic_is_offered_load_limited():
    sc = Scenario(n_ue=4, traffic=Traffic.CBR, duration_frames=200, mobility=None,
                  ue_positions=((10.0, 0.0), (0.0, 50.0), (-100.0, 0.0), (0.0, -200.0)))
    m = run_cell(sc)
    # 4 UEs x 16 kbps over 2 s, plus at most one SDU each of slack
    assert m.goodput_bps <= (4 * 16e3 * 2 + 4 * 9000) / 2
    assert m.goodput_bps >= 4 * 16e3 * 0.5


@settings(max_examples=8)
@given(st.integers(0, 1000), st.floats(0, 60), st.integers(1, 4), st.integers(1, 6))
def test_goodput_never_exceeds_throughput(seed, power, attempts, n_ue):
    sc = Scenario(n_ue=n_ue, duration_frames=5, seed=seed, harq_max_attempts=attempts,
                  jammers=(JammerSpec(JammerKind.BARRAGE, power, (224.0, 0.0)),))
    m = run_cell(sc)
    assert 0 <= m.goodput_bps <= m.throughput_bps
    assert all(u.retx_count <= u.tx_count for u in m.per_ue)


def test_sweep_rows_and_empty():
    assert sweep(small(), SweepAxis.JAM_POWER, []) == []
    rows = sweep(small(duration_frames=5), SweepAxis.JAM_POWER, [10, 20], seeds=[1, 2, 3])
    assert len(rows) == 6
    assert [(r["axis_value"], r["seed"]) for r in rows] == sorted(
        (v, s) for v in (10, 20) for s in (1, 2, 3))
    assert set(rows[0]) == {"axis_value", "seed", "throughput_bps", "goodput_bps",
                            "mean_sinr_db", "retx_fraction"}


def test_sweep_parallel_matches_serial():
    sc = small(duration_frames=5, jammers=(BARRAGE_224,))
    assert sweep(sc, "jam_power", [10, 30], [1, 2], workers=2) == sweep(sc, "jam_power", [10, 30], [1, 2])


def test_n_jammers_placement():
    js = jammers_at(3)
    d = [np.hypot(*j.position) for j in js]
    assert np.allclose(d, JAMMER_DISTANCE_M)
    az = {round(np.degrees(np.arctan2(j.position[1], j.position[0])) % 360, 6) for j in js}
    assert len(az) == 3
    sc = apply_axis(small(), SweepAxis.N_JAMMERS, 2)
    assert len(sc.jammers) == 2
    assert apply_axis(small(), SweepAxis.N_JAMMERS, 0).jammers == ()


def test_distance_axis_keeps_azimuth():
    sc = apply_axis(small(jammers=(JammerSpec(JammerKind.BARRAGE, 20.0, (0.0, 224.0)),)),
                    SweepAxis.JAM_DISTANCE, 100.0)
    assert sc.jammers[0].position == pytest.approx((0.0, 100.0))
