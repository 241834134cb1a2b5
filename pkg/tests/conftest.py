import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def num():
    from jamcell.waveform import build_numerology
    return build_numerology(30e3, 51)


def clean_ssb_capture(num, pci=350, n_slots=1, lead=0, boost_index=0, boost_db=0.0):
    """Noiseless SSB-only capture: (samples, grid, burst_set)."""
    from jamcell.ssb import place_burst_set, schedule_burst_set
    from jamcell.waveform import ResourceGrid, ofdm_modulate
    bs = schedule_burst_set(pci, boost_index=boost_index, boost_db=boost_db)
    grid = place_burst_set(ResourceGrid.empty(num, 14 * n_slots), bs)
    x = np.concatenate((np.zeros(lead, complex), ofdm_modulate(grid)))
    return x, grid, bs


def add_noise(x, var, rng):
    return x + np.sqrt(var / 2) * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))


def link_with_sjnr(sjnr_db, **kw):
    """LinkScenario (fading off) whose barrage jammer yields the given per-RE SJNR."""
    from jamcell.channel import fspl_db, watt_to_dbm
    from jamcell.jammer import JammerKind, JammerSpec, distance
    from jamcell.link import LinkScenario
    base = LinkScenario(fading=False, **kw)
    s, n = base.signal_re_power_w, base.noise_re_power_w
    j_re = s / 10 ** (sjnr_db / 10) - n
    pos = (100.0, 100.0)
    loss = fspl_db(base.carrier_hz, distance(pos, base.ue_position))
    p_dbm = float(watt_to_dbm(j_re * base.numerology.n_subcarriers)) + loss
    return LinkScenario(fading=False, jammers=(JammerSpec(JammerKind.BARRAGE, p_dbm, pos),), **kw)
