import json

import numpy as np
import pytest

from sparsig import analysis
from sparsig.channel import ScenarioConfig
from sparsig.euler import ParameterError
from sparsig.signatures import cover_wyner


@pytest.fixture(scope="module")
def small_cfg():
    return ScenarioConfig(gamma=3, rho=2, ell=60, mode="scheduled", master_seed=5)


def test_sweep_row_schema(small_cfg):
    sw = analysis.pe_sweep(small_cfg, [4.0], target_errors=5, min_trials=4, max_trials=16)
    csv = sw.to_csv()
    header = csv.splitlines()[0].split(",")
    assert header == analysis.CSV_COLUMNS
    row = sw.rows[0]
    assert 0.0 <= row["pe"] <= 1.0
    assert row["K"] == 9 and row["n_s"] == 6 and row["k"] == 30
    assert row["trials"] >= 4


def test_sweep_reproducible_bitwise(small_cfg):
    a = analysis.pe_sweep(small_cfg, [2.0, 6.0], target_errors=10, min_trials=8, max_trials=48)
    b = analysis.pe_sweep(small_cfg, [2.0, 6.0], target_errors=10, min_trials=8, max_trials=48)
    assert a.to_csv() == b.to_csv()


def test_parallel_matches_serial(small_cfg):
    serial = analysis.pe_sweep(small_cfg, [3.0], target_errors=10, min_trials=8,
                               max_trials=32, jobs=1)
    parallel = analysis.pe_sweep(small_cfg, [3.0], target_errors=10, min_trials=8,
                                 max_trials=32, jobs=2)
    assert serial.to_csv() == parallel.to_csv()


def test_adaptive_stopping(small_cfg):
    ev = analysis.PointEvaluator(small_cfg, target_errors=5, min_trials=4, max_trials=400)
    noisy = ev.evaluate(-10.0)   # far below capacity: errors arrive immediately
    assert noisy.trials <= 2 * analysis.ROUND_SIZE
    assert noisy.pe > 0.4
    clean = ev.evaluate(17.0)    # almost error-free: runs to the budget
    assert clean.trials == 400


def test_ci_shrinks_with_budget(small_cfg):
    # a mid-Pe point: at the extremes pe(1-pe) is too sensitive for the ratio
    lo = analysis.PointEvaluator(small_cfg, target_errors=10 ** 9, min_trials=32,
                                 max_trials=32).evaluate(7.0)
    hi = analysis.PointEvaluator(small_cfg, target_errors=10 ** 9, min_trials=128,
                                 max_trials=128).evaluate(7.0)
    assert hi.ci95 < lo.ci95
    expected = np.sqrt(lo.trials / hi.trials)
    assert hi.ci95 / lo.ci95 == pytest.approx(expected, rel=0.35)


def test_required_ebn0_trivial_target(small_cfg):
    # with a relaxed target met already at the bracket bottom, the lowest
    # grid point comes back without further search
    th, point = analysis.required_ebn0(small_cfg, 0.5, 7.0, 13.0, 1.0,
                                       target_errors=10, min_trials=8, max_trials=32)
    assert th == 7.0


def test_required_ebn0_extends_error(small_cfg):
    with pytest.raises(RuntimeError):
        analysis.required_ebn0(small_cfg, 0.001, -20.0, -15.0, 1.0,
                               target_errors=5, min_trials=4, max_trials=16)


def test_required_ebn0_rejects_bad_target(small_cfg):
    with pytest.raises(ParameterError):
        analysis.required_ebn0(small_cfg, 0.9, 0.0, 6.0)


def test_threshold_monotone_in_load():
    # heavier overload (beta = gamma/rho) never needs less energy per bit
    thresholds = {}
    for rho in (4, 2):
        cfg = ScenarioConfig(gamma=5, rho=rho, ell=60, mode="scheduled", master_seed=11)
        thresholds[rho], _ = analysis.required_ebn0(cfg, 0.05, 5.0, 12.0, 0.25,
                                                    target_errors=60, min_trials=24,
                                                    max_trials=240, jobs=2)
    assert thresholds[2] >= thresholds[4]


def test_degree_histogram_experiment():
    rows = analysis.degree_histogram_experiment(11, 2, [0, 20], n_seeds=30, master_seed=1)
    for ka in (0, 20):
        sub = [r for r in rows if r["ka"] == ka]
        before = sum(r["before_mean"] for r in sub)
        after = sum(r["after_mean"] for r in sub)
        assert before == pytest.approx(22.0)   # histogram mass = n_s
        assert after == pytest.approx(22.0)
        edge_mass = sum(r["degree"] * r["before_mean"] for r in sub)
        assert edge_mass == pytest.approx(2 * ka)  # rho * K_a edges
    zero = [r for r in rows if r["ka"] == 0]
    assert zero[0]["degree"] == 0 and zero[0]["before_mean"] == pytest.approx(22.0)


def test_degree_histogram_rejects_ka_above_k():
    with pytest.raises(ParameterError):
        analysis.degree_histogram_experiment(3, 2, [10], n_seeds=2)


def test_spectral_curve_rows():
    rows = analysis.spectral_efficiency_curve([(5, 2), (3, 2), (7, 2)], ebn0_db=10.0)
    betas = [r["beta"] for r in rows]
    assert betas == sorted(betas)
    for r in rows:
        assert r["se_bits"] <= cover_wyner(r["K"] / r["n_s"], r["snr"]) + 1e-12
    gammas = [r["gamma"] for r in rows]
    ses = [r["se_bits"] for r in rows]
    assert gammas == [3, 5, 7]
    assert ses == sorted(ses)


def test_manifest_round_trip(small_cfg, tmp_path):
    params = {"grid": [2.0], "target_errors": 5, "min_trials": 4, "max_trials": 16,
              "pe_events": "all"}
    manifest = analysis.make_manifest(small_cfg, "sweep", params, {"csv": "x.csv"})
    path = tmp_path / "m.json"
    analysis.write_manifest(manifest, path)
    loaded = json.loads(path.read_text())
    cfg = analysis.config_from_manifest(loaded)
    assert cfg == small_cfg
    first = analysis.pe_sweep(small_cfg, **{k: params[k] for k in
                                            ("grid", "target_errors", "min_trials", "max_trials")})
    again = analysis.rerun_from_manifest(loaded)
    assert first.to_csv() == again.to_csv()


def test_trace_lines(small_cfg):
    cfg = ScenarioConfig(gamma=3, rho=2, ell=60, mode="grant-free",
                         active_set=(1, 5, 6, 8), master_seed=42, noiseless=True)
    link = analysis.build_link(cfg)
    truth, outcome = analysis.simulate_trial(link, cfg, 10.0, 0)
    text = analysis.format_trace(link, cfg, 10.0, 0, truth, outcome)
    assert "peel round 1 decoded 5,6,8" in text
    assert "peel round 2 decoded 1" in text
    assert "errors 0" in text


def test_decode_metric_excludes_collisions():
    # column 0 is resource-disjoint from the collided column 5, so its decode
    # stays clean; the "all" metric sees the two collided users, "decode" none
    cfg = ScenarioConfig(gamma=5, rho=2, ell=60, mode="unsourced",
                         active_set=(0, 5, 5), master_seed=2, noiseless=True)
    all_point = analysis.PointEvaluator(cfg, target_errors=10 ** 9, min_trials=10,
                                        max_trials=10, pe_events="all").evaluate(6.0)
    dec_point = analysis.PointEvaluator(cfg, target_errors=10 ** 9, min_trials=10,
                                        max_trials=10, pe_events="decode").evaluate(6.0)
    assert all_point.e3 == 20
    assert all_point.pe == pytest.approx(2 / 3)
    assert dec_point.pe == 0.0
