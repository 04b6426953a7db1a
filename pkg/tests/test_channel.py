import numpy as np
import pytest

from sparsig import channel
from sparsig.channel import (ActiveSet, ScenarioConfig, build_link, draw_messages,
                             ebn0_to_snr, expected_collided_users, expected_excess_picks,
                             modulate_bpsk, demodulate_bpsk, sample_activity,
                             snr_to_ebn0_db, substream, transmit)
from sparsig.euler import ParameterError


def test_ebn0_conversion_reference_points():
    assert ebn0_to_snr(0.0, 60, 30) == pytest.approx(0.25)
    for e in (0.0, 3.0, 7.6):
        assert ebn0_to_snr(e, 202, 101) == pytest.approx(10 ** (e / 10) / 4)
    # shorter block at equal payload costs the ratio 202/198 in power
    ratio = ebn0_to_snr(5.0, 198, 101) / ebn0_to_snr(5.0, 202, 101)
    assert 10 * np.log10(ratio) == pytest.approx(10 * np.log10(202 / 198), abs=1e-9)


def test_ebn0_round_trip():
    snr = ebn0_to_snr(4.3, 120, 60)
    assert snr_to_ebn0_db(snr, 120, 60) == pytest.approx(4.3)


def test_ebn0_rejects_bad_args():
    with pytest.raises(ParameterError):
        ebn0_to_snr(0.0, 0, 10)


def test_bpsk_mapping():
    bits = np.array([0, 1, 1, 0])
    sym = modulate_bpsk(bits)
    assert np.array_equal(sym, [1.0, -1.0, -1.0, 1.0])
    assert np.sum(sym ** 2) == pytest.approx(bits.size)
    assert np.array_equal(demodulate_bpsk(sym), bits)


# ---------------------------------------------------------------------------
# configuration


def test_scheduled_forces_full_activity():
    cfg = ScenarioConfig(gamma=3, rho=2, ell=60, mode="scheduled")
    assert cfg.ka == 9
    assert cfg.n_channel_uses == 6 * 60


def test_derived_code_dimensions():
    cfg = ScenarioConfig(gamma=73, rho=2, ell=202, mode="grant-free", ka=100)
    assert cfg.n == 202 and cfg.k == 101 and cfg.n_s == 146 and cfg.n_users == 5329


def test_config_validation_errors():
    with pytest.raises(ParameterError):
        ScenarioConfig(gamma=3, rho=2, ell=60, mode="tdma")
    with pytest.raises(ParameterError):
        ScenarioConfig(gamma=3, rho=2, ell=60, mode="grant-free", ka=10)
    with pytest.raises(ParameterError):
        ScenarioConfig(gamma=3, rho=2, ell=60, mode="grant-free")
    with pytest.raises(ParameterError):
        ScenarioConfig(gamma=3, rho=2, ell=60, mode="scheduled", q=2)
    with pytest.raises(ParameterError):
        ScenarioConfig(gamma=3, rho=2, ell=61, mode="scheduled")
    with pytest.raises(ParameterError):
        ScenarioConfig(gamma=3, rho=2, ell=60, mode="grant-free", active_set=(1, 1, 2))


# ---------------------------------------------------------------------------
# activation


def test_sample_activity_modes():
    rng = substream(0, "t")
    sched = ScenarioConfig(gamma=3, rho=2, ell=60, mode="scheduled")
    assert np.array_equal(sample_activity(sched, rng), np.arange(9))
    gf = ScenarioConfig(gamma=3, rho=2, ell=60, mode="grant-free", ka=4)
    cols = sample_activity(gf, rng)
    assert cols.size == 4 and np.unique(cols).size == 4
    ur = ScenarioConfig(gamma=3, rho=2, ell=60, mode="unsourced", ka=6)
    cols = sample_activity(ur, rng)
    assert cols.size == 6 and cols.min() >= 0 and cols.max() < 9


def test_unsourced_collision_statistics():
    # birthday closed forms over 1e5 draws, within +/-5%
    K, ka, draws = 5329, 300, 100_000
    rng = np.random.default_rng(17)
    excess_total = 0.0
    collided_total = 0.0
    chunk = 20_000
    for _ in range(draws // chunk):
        picks = np.sort(rng.integers(0, K, size=(chunk, ka)), axis=1)
        new = np.diff(picks, axis=1) > 0
        distinct = 1 + new.sum(axis=1)
        excess_total += float((ka - distinct).sum())
        # users in collision: ka minus singleton columns
        runs = np.diff(np.pad(picks, ((0, 0), (1, 1)), constant_values=-1), axis=1) != 0
        singletons = (runs[:, :-1] & runs[:, 1:]).sum(axis=1)
        collided_total += float((ka - singletons).sum())
    excess_mean = excess_total / draws
    collided_mean = collided_total / draws
    assert abs(excess_mean - expected_excess_picks(K, ka)) < 0.05 * expected_excess_picks(K, ka)
    assert abs(collided_mean - expected_collided_users(K, ka)) < 0.05 * expected_collided_users(K, ka)


def test_active_set_dataclass_collisions():
    msgs = np.zeros((4, 3), dtype=np.uint8)
    act = ActiveSet(mode="unsourced", cols=np.array([2, 5, 5, 7]), messages=msgs)
    assert np.array_equal(act.distinct_cols, [2, 5, 7])
    assert np.array_equal(act.collided_cols, [5])


# ---------------------------------------------------------------------------
# transmission


@pytest.fixture(scope="module")
def link32():
    return build_link(ScenarioConfig(gamma=3, rho=2, ell=60, mode="scheduled", master_seed=8))


def empty_active():
    return ActiveSet(mode="grant-free", cols=np.array([], dtype=np.int64),
                     messages=np.zeros((0, 30), dtype=np.uint8))


def test_no_users_pure_noise(link32):
    y1 = transmit(link32, empty_active(), 2.0, substream(8, "n", 0))
    y2 = transmit(link32, empty_active(), 2.0, substream(8, "n", 0))
    assert np.array_equal(y1, y2)
    assert y1.shape == (6, 60)


def test_single_user_noiseless_rank_one(link32):
    cfg_k = link32.code.k
    msg = draw_messages(ScenarioConfig(gamma=3, rho=2, ell=60, mode="grant-free", ka=1),
                        1, substream(8, "m"))
    act = ActiveSet(mode="grant-free", cols=np.array([4]), messages=msg)
    snr = 2.5
    Y = transmit(link32, act, snr, None, noiseless=True)
    cw = (msg[0].astype(np.int32) @ link32.code.gen.astype(np.int32)) & 1
    b = link32.symbols_for(4, cw.astype(np.uint8))
    expected = np.sqrt(snr) * np.outer(link32.signatures.matrix[:, 4], b)
    assert np.allclose(Y, expected)
    assert np.linalg.matrix_rank(Y) == 1
    # per-user transmitted energy = P * ell
    assert np.linalg.norm(Y) ** 2 == pytest.approx(snr * 60)


def test_noise_energy_concentration(link32):
    total = 0.0
    trials = 1000
    for t in range(trials):
        W = transmit(link32, empty_active(), 1.0, substream(8, "noise", t))
        total += np.linalg.norm(W) ** 2
    mean = total / trials
    assert abs(mean - 360.0) < 0.02 * 360.0


def test_superposition_linearity(link32):
    rng = substream(8, "mm")
    msgs = draw_messages(ScenarioConfig(gamma=3, rho=2, ell=60, mode="grant-free", ka=4),
                         4, rng)
    act_ab = ActiveSet(mode="grant-free", cols=np.array([0, 2, 5, 7]), messages=msgs)
    act_a = ActiveSet(mode="grant-free", cols=np.array([0, 2]), messages=msgs[:2])
    act_b = ActiveSet(mode="grant-free", cols=np.array([5, 7]), messages=msgs[2:])
    snr = 1.7
    y_ab = transmit(link32, act_ab, snr, substream(8, "w", 1))
    y_a = transmit(link32, act_a, snr, substream(8, "w", 1))
    y_b = transmit(link32, act_b, snr, substream(8, "w", 1))
    w = transmit(link32, empty_active(), snr, substream(8, "w", 1))
    assert np.allclose(y_ab, y_a + y_b - w)


def test_interleavers_fixed_per_column(link32):
    a = link32.interleaver(3)
    b = link32.interleaver(3)
    c = link32.interleaver(4)
    assert a is b
    assert not np.array_equal(a.perm, c.perm)


def test_transmit_requires_noise_rng(link32):
    with pytest.raises(ParameterError):
        transmit(link32, empty_active(), 1.0, None, noiseless=False)


def test_substream_independent_of_order():
    a1 = substream(1, "x", 5).integers(0, 1000, 4)
    b1 = substream(1, "x", 6).integers(0, 1000, 4)
    b2 = substream(1, "x", 6).integers(0, 1000, 4)
    assert np.array_equal(b1, b2)
    assert not np.array_equal(a1, b1)
