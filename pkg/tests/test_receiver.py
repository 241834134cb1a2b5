import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import add_noise, clean_ssb_capture, link_with_sjnr
from jamcell.jammer import JammerKind, JammerSpec
from jamcell.link import LinkScenario, simulate_link
from jamcell.receiver import (DEFAULT_MCS_TABLE, McsEntry, decode_pbch, detect_pss, detect_sss,
                              estimate_dmrs_sjnr, mib_decodable, pdsch_evm, pss_correlation,
                              pss_evm, search_cell, sinr_to_bler)
from jamcell.ssb import CellIdentity
from jamcell.waveform import ResourceGrid, ofdm_demodulate


def test_clean_pss_exact_timing(num):
    lead = 301
    x, _, _ = clean_ssb_capture(num, pci=350, lead=lead)
    det = detect_pss(x, num)
    starts = num.symbol_starts(14)
    assert det.detected
    assert det.n_id_2 == 2
    assert det.timing_offset in (lead + starts[2] + num.cp_length(2), lead + starts[8] + num.cp_length(8))


def test_pss_too_short(num):
    with pytest.raises(ValueError):
        detect_pss(np.zeros(100, complex), num)


def test_correlation_is_normalized(num):
    x, _, _ = clean_ssb_capture(num)
    c = pss_correlation(1e-6 * x, num)
    assert c.shape == (3, x.size - num.fft_size + 1)
    assert 0.99 < c.max() <= 1.0 + 1e-9
    assert np.all(c >= 0)


def test_pure_noise_false_alarm(num):
    rng = np.random.default_rng(0)
    hits = sum(detect_pss(add_noise(np.zeros(num.slot_samples, complex), 1.0, rng), num).detected
               for _ in range(1000))
    assert hits <= 10


def test_barrage_ten_db_above_threshold_denies_pss():
    # Eq.(6) power at gamma_th = 0 dB, then +10 dB: per-RE SJNR of -10 dB
    sc = link_with_sjnr(-10.0)
    detected = [detect_pss(simulate_link(sc, s).samples, sc.numerology).detected for s in range(100)]
    assert sum(detected) <= 5


def test_sss_noiseless(num):
    _, grid, _ = clean_ssb_capture(num, pci=350)
    n1, scores = detect_sss(grid, 2, 2)
    assert n1 == 116
    second = np.sort(scores)[-2]
    assert scores[n1] >= 2 * second
    with pytest.raises(ValueError):
        detect_sss(grid, 2, None)


def test_sss_under_strong_smart_jammer():
    sc = LinkScenario(fading=False, capture_ms=0.5,
                      jammers=(JammerSpec(JammerKind.SMART_SSB, 60.0, (100.0, 100.0)),))
    cap = simulate_link(sc, 3)
    grid = ofdm_demodulate(cap.samples, cap.numerology, 0, 14)
    n1, scores = detect_sss(grid, 2, 2)
    margin = scores[n1] / np.sort(scores)[-2]
    assert n1 != 116 or margin < 1.2


def test_search_cell_noiseless(num):
    x, _, _ = clean_ssb_capture(num, pci=777, lead=57)
    det, cell = search_cell(x, num)
    assert cell == CellIdentity.from_pci(777)


def test_dmrs_sjnr_snr_injection(num):
    rng = np.random.default_rng(4)
    _, grid, _ = clean_ssb_capture(num, pci=350)
    est = []
    for _ in range(50):
        noisy = ResourceGrid(add_noise(grid.data, 10 ** (-20 / 10), rng), num)
        est.append(estimate_dmrs_sjnr(noisy, 350, 0, 2))
    assert np.mean(est) == pytest.approx(20.0, abs=1.5)


def test_dmrs_sjnr_boost(num):
    rng = np.random.default_rng(5)
    _, grid, _ = clean_ssb_capture(num, pci=350, boost_index=1, boost_db=9.0)
    diffs = []
    for _ in range(50):
        noisy = ResourceGrid(add_noise(grid.data, 0.1, rng), num)
        diffs.append(estimate_dmrs_sjnr(noisy, 350, 1, 8) - estimate_dmrs_sjnr(noisy, 350, 0, 2))
    assert np.mean(diffs) == pytest.approx(9.0, abs=2.0)


def test_dmrs_sjnr_ceiling(num):
    _, grid, _ = clean_ssb_capture(num, pci=350)
    assert estimate_dmrs_sjnr(grid, 350, 0, 2) >= 40.0


def test_pbch_noiseless(num):
    _, grid, _ = clean_ssb_capture(num, pci=350)
    evm, ok = decode_pbch(grid, 350, 0, 2)
    assert evm < 1.0 and ok
    assert pss_evm(grid, 2, 2) < 1.0


def test_mib_threshold():
    assert not mib_decodable(51.59)
    assert mib_decodable(23.36)


def test_pbch_evm_monotone_in_jammer_power():
    means = []
    for p in (10.0, 16.0, 22.0, 28.0, 34.0):
        sc = LinkScenario(capture_ms=0.5,
                          jammers=(JammerSpec(JammerKind.SMART_PBCH, p, (100.0, 100.0)),))
        evms = []
        for seed in range(50):
            cap = simulate_link(sc, seed)
            grid = ofdm_demodulate(cap.samples, cap.numerology, 0, 14)
            evms.append(np.median([decode_pbch(grid, 350, i, s)[0] for i, s in enumerate((2, 8))]))
        means.append(np.mean(evms))
    assert all(b > a for a, b in zip(means, means[1:]))


def test_pdsch_evm_noiseless_and_awgn():
    sc = LinkScenario(fading=False, capture_ms=0.5)
    cap = simulate_link(sc, 0)
    grid = ofdm_demodulate(cap.samples, cap.numerology, 0, 14)
    # known channel: the static path gain
    h = np.full(grid.data.shape, np.sqrt(sc.signal_re_power_w))
    evm = pdsch_evm(grid, cap.tx_grid.data, cap.pdsch_mask, h)
    snr = sc.signal_re_power_w / sc.noise_re_power_w
    assert evm == pytest.approx(100 / np.sqrt(snr), abs=2.0)
    # extra noise 12 dB below the signal: EVM ~ 25%
    rng = np.random.default_rng(1)
    noisy = ResourceGrid(add_noise(grid.data, 0.0625 * sc.signal_re_power_w, rng), grid.numerology)
    assert pdsch_evm(noisy, cap.tx_grid.data, cap.pdsch_mask, h) == pytest.approx(25.0, abs=2.0)
    clean = ResourceGrid(cap.tx_grid.data, grid.numerology)
    ones = np.ones(grid.data.shape)
    assert pdsch_evm(clean, cap.tx_grid.data, cap.pdsch_mask, ones) < 1.0


def test_bler_examples():
    qpsk = DEFAULT_MCS_TABLE[0]
    assert sinr_to_bler(qpsk.threshold_db, 0) == pytest.approx(0.5)
    assert sinr_to_bler(qpsk.threshold_db + 10, "qpsk-1/2") < 1e-8
    assert sinr_to_bler(-1e6, 0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sinr_to_bler(0.0, "bogus")
    with pytest.raises(ValueError):
        sinr_to_bler(0.0, 7)


def test_mcs_entry_validation():
    with pytest.raises(ValueError):
        McsEntry("x", "8PSK", 0.5, 0.0)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=20), st.integers(0, 2))
def test_bler_monotone(sinrs, mcs):
    s = np.sort(np.array(sinrs))
    b = sinr_to_bler(s, mcs)
    assert np.all(np.diff(b) <= 1e-15)
    assert np.all((b >= 0) & (b <= 1))
