import numpy as np
import pytest
from hypothesis import given, strategies as st

from jamcell.ssb import (DEFAULT_MIB, SEQ_LEN, CellIdentity, assemble_ssb, burst_start_symbols,
                         gold_sequence, pbch_dmrs, pbch_payload, place_burst_set, pss_sequence,
                         re_masks, schedule_burst_set, ssb_occupancy, sss_sequence)
from jamcell.receiver import pss_replicas
from jamcell.waveform import ResourceGrid


def test_pss_first_values():
    assert tuple(pss_sequence(0)[:7]) == (1, -1, -1, 1, -1, -1, -1)


def test_pss_cyclic_shifts():
    base = pss_sequence(0)
    for n2 in (1, 2):
        assert np.array_equal(pss_sequence(n2), np.roll(base, -43 * n2))


def test_pss_correlation_properties(num):
    seqs = [pss_sequence(n) for n in range(3)]
    reps = pss_replicas(num)
    for a in range(3):
        assert np.dot(seqs[a], seqs[a]) == 127
        for b in range(3):
            if a != b:
                assert abs(np.dot(seqs[a], seqs[b])) <= 1
                # time-domain replicas: worst cross-correlation over all lags
                padded = np.concatenate((reps[a], np.zeros(num.fft_size)))
                cross = np.abs(np.correlate(padded, reps[b], "full")).max()
                assert cross < 127 / 4


def test_pss_out_of_range():
    with pytest.raises(ValueError):
        pss_sequence(3)


def test_sss_exhaustive_distinct_and_bpsk():
    seen = set()
    for n2 in range(3):
        for n1 in range(336):
            s = sss_sequence(n1, n2)
            assert s.size == SEQ_LEN
            assert set(np.unique(s)) <= {-1, 1}
            assert np.sum(s ** 2) == 127
            seen.add(s.tobytes())
    assert len(seen) == 1008


@pytest.mark.parametrize("n1,n2", [(-1, 0), (336, 0), (0, 3)])
def test_sss_out_of_range(n1, n2):
    with pytest.raises(ValueError):
        sss_sequence(n1, n2)


def test_gold_sequence_is_binary_and_cached():
    c = gold_sequence(350, 64)
    assert set(np.unique(c)) <= {0, 1}
    assert np.array_equal(c, gold_sequence(350, 64))


def test_pci_round_trip_exhaustive():
    for pci in range(1008):
        cell = CellIdentity.from_pci(pci)
        assert cell.pci == pci
        assert CellIdentity(cell.n_id_1, cell.n_id_2) == cell


def test_pci_350():
    assert CellIdentity.from_pci(350) == CellIdentity(116, 2)


@pytest.mark.parametrize("pci", [-1, 1008])
def test_pci_out_of_range(pci):
    with pytest.raises(ValueError):
        CellIdentity.from_pci(pci)


def test_dmrs_per_index_distinct_and_unit_power():
    seqs = [pbch_dmrs(350, i) for i in range(8)]
    assert len({s.tobytes() for s in seqs}) == 8
    for s in seqs:
        assert s.size == 144
        assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.array_equal(pbch_dmrs(350, 3), pbch_dmrs(350, 3))


def test_payload_is_unit_qpsk():
    p = pbch_payload(350)
    assert p.size == 432
    assert np.allclose(np.abs(p), 1.0)


def test_block_gaps_and_pss_mapping():
    blk = assemble_ssb(350, 0).symbols
    assert blk.shape == (240, 4)
    assert not np.any(blk[:56, 0]) and not np.any(blk[183:, 0])
    assert np.array_equal(blk[56:183, 0], pss_sequence(2))
    assert np.array_equal(blk[56:183, 2], sss_sequence(116, 2))
    # SSS symbol guard bands around 48..55 and 183..191 are empty
    assert not np.any(blk[48:56, 2]) and not np.any(blk[183:192, 2])


def test_dmrs_offset_is_pci_mod_4():
    m = re_masks(350)["dmrs"]
    assert np.array_equal(np.nonzero(m[:, 1])[0] % 4, np.full(60, 2))
    assert m.sum() == 144


def test_re_sets_disjoint_and_energy_adds_up():
    cell = CellIdentity.from_pci(350)
    masks = re_masks(cell)
    total = sum(masks[k].astype(int) for k in ("pss", "sss", "dmrs", "pbch"))
    assert total.max() == 1
    blk = assemble_ssb(cell, 0).symbols
    expected = 127 + 127 + 144 + 432
    assert np.sum(np.abs(blk) ** 2) == pytest.approx(expected)


def test_schedule_gains():
    assert set(schedule_burst_set(350).beam_gains_db) == {0.0}
    bs = schedule_burst_set(350, boost_index=2, boost_db=9)
    assert bs.beam_gains_db == (0, 0, 9, 0, 0, 0, 0, 0)


def test_schedule_bad_boost_index():
    with pytest.raises(ValueError):
        schedule_burst_set(350, boost_index=8)


def test_burst_positions_inside_half_frame():
    starts = burst_start_symbols(8, 30e3)
    assert starts == [2, 8, 16, 22, 30, 36, 44, 50]
    # 10 slots of 14 symbols = 5 ms at 30 kHz
    assert all(b > a for a, b in zip(starts, starts[1:]))
    assert starts[-1] + 4 <= 140


def test_place_burst_set_applies_gain(num):
    bs = schedule_burst_set(350, boost_index=2, boost_db=9)
    g = place_burst_set(ResourceGrid.empty(num, 56), bs)
    k0 = (612 - 240) // 2
    amp = np.abs(g.data[k0 + 56, 16]) / np.abs(g.data[k0 + 56, 2])
    assert amp == pytest.approx(10 ** (9 / 20))
    occ = ssb_occupancy(612, 56, bs)
    assert not np.any(g.data[~occ])


@given(st.integers(0, 1007), st.integers(0, 7))
def test_block_energy_any_cell(pci, idx):
    blk = assemble_ssb(pci, idx, DEFAULT_MIB).symbols
    assert np.sum(np.abs(blk) ** 2) == pytest.approx(830.0)
