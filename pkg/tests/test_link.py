import numpy as np
import pytest

from jamcell.jammer import JammerKind, JammerSpec
from jamcell.link import LinkScenario, detection_rate, measure_link, pss_acquired, simulate_link
from jamcell.receiver import detect_pss


def test_capture_length_and_positions():
    sc = LinkScenario()
    cap = simulate_link(sc, 0)
    num = cap.numerology
    assert cap.samples.size == 10 * num.slot_samples
    starts = num.symbol_starts(140)
    assert cap.pss_positions[0] == starts[2] + num.cp_length(2)
    assert len(cap.pss_positions) == 8


def test_simulation_deterministic():
    sc = LinkScenario(jammers=(JammerSpec(JammerKind.BARRAGE, 20.0, (100.0, 100.0)),))
    a = simulate_link(sc, 5).samples
    b = simulate_link(sc, 5).samples
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate_link(sc, 6).samples)


def test_colocated_jammer_rejected():
    sc = LinkScenario(jammers=(JammerSpec(JammerKind.BARRAGE, 20.0, (60.0, 60.0)),))
    with pytest.raises(ValueError):
        simulate_link(sc, 0)


def test_clean_link_acquires_cell():
    sc = LinkScenario()
    for seed in range(3):
        res = measure_link(simulate_link(sc, seed))
        assert res.pss_acquired
        assert res.pci_detected.pci == 350
        assert res.ssb.mib_decodable


def test_jammer_off_pdsch_evm_small():
    res = measure_link(simulate_link(LinkScenario(fading=False), 1))
    assert res.pdsch_evm < 5.0
    assert len(res.pbch_evm_per_burst) == 8
    assert all(e < 5.0 for e in res.pbch_evm_per_burst)


def test_wrong_n_id_2_not_acquired():
    sc = LinkScenario()
    cap = simulate_link(sc, 0)
    det = detect_pss(cap.samples, cap.numerology)
    assert pss_acquired(cap, det)
    wrong = type(det)((det.n_id_2 + 1) % 3, det.timing_offset, det.peak_metric, True)
    assert not pss_acquired(cap, wrong)
    late = type(det)(det.n_id_2, det.timing_offset + 500, det.peak_metric, True)
    assert not pss_acquired(cap, late)


def test_detection_rate_falls_with_power():
    rates = []
    for p in (20.0, 50.0):
        sc = LinkScenario(jammers=(JammerSpec(JammerKind.BARRAGE, p, (100.0, 100.0)),))
        rates.append(detection_rate(sc, range(10)))
    assert rates[0] == 1.0
    assert rates[1] < 0.3
