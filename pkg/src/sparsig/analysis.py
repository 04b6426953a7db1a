"""Experiment drivers: Pe sweeps, required-E_b/N_0 search, degree histograms,
spectral-efficiency curves, and deterministic CSV/manifest emission.

Every Monte-Carlo trial runs on its own counter-derived RNG substream, so
results are reproducible bit-for-bit from (scenario config, master seed) and
independent of execution order or worker count.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import datetime
import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .channel import (ActiveSet, Link, ScenarioConfig, build_link, draw_messages,
                      ebn0_to_snr, sample_activity, substream, transmit)
from .euler import ParameterError, build_mapping_matrix, construct_euler_square
from .receiver import account_errors, peel_structural, prune_and_classify, turbo_receive
from .signatures import build_signatures, cover_wyner, spectral_efficiency

CSV_COLUMNS = ["scenario_id", "mode", "gamma", "rho", "n_s", "K", "ell", "n", "k", "Q",
               "ebn0_db", "ka", "trials", "errors", "pe", "ci95",
               "peeled_frac_mean", "turbo_iters_mean", "seed", "e1", "e2", "e3"]

ROUND_SIZE = 16  # trials per adaptive round; fixed so results never depend on jobs


def scenario_id(config: ScenarioConfig) -> str:
    ka = "all" if config.mode == "scheduled" else str(config.ka)
    return f"{config.mode}-e{config.gamma}x{config.rho}-l{config.ell}-ka{ka}"


# ---------------------------------------------------------------------------
# Single trial


@dataclass
class TrialStats:
    errors: int
    e1: int
    e2: int
    e3: int
    n_active: int
    denominator: int
    peeled_frac: float
    turbo_passes: int
    peel_rounds: int


def simulate_trial(link: Link, config: ScenarioConfig, ebn0_db: float, trial: int):
    """Run one transmit/receive trial; returns (truth, outcome)."""
    point = int(round(ebn0_db * 1000))
    cols = sample_activity(config, substream(config.master_seed, "act", point, trial))
    messages = draw_messages(config, cols.size, substream(config.master_seed, "msg", point, trial))
    truth = ActiveSet(mode=config.mode, cols=cols, messages=messages)
    snr = ebn0_to_snr(ebn0_db, config.ell, config.k)
    noise_rng = None if config.noiseless else substream(config.master_seed, "noise", point, trial)
    Y = transmit(link, truth, snr, noise_rng, noiseless=config.noiseless)
    out = turbo_receive(link, Y, truth.distinct_cols, snr,
                        outer_iters=config.outer_iters, inner_iters=config.inner_iters,
                        bp_iters=config.bp_iters, max_check_degree=config.max_check_degree)
    return truth, out


def run_trial(link: Link, config: ScenarioConfig, ebn0_db: float, trial: int) -> TrialStats:
    truth, out = simulate_trial(link, config, ebn0_db, trial)
    te = account_errors(out, truth, config.mode)
    return TrialStats(errors=te.errors, e1=te.e1, e2=te.e2, e3=te.e3,
                      n_active=te.n_active, denominator=te.denominator,
                      peeled_frac=out.peeled_fraction, turbo_passes=out.turbo_passes,
                      peel_rounds=len(out.peel_rounds))


def format_trace(link: Link, config: ScenarioConfig, ebn0_db: float, trial: int,
                 truth: ActiveSet, outcome) -> str:
    """Line-oriented per-trial trace (peeling rounds, degree histogram, decisions)."""
    graph = prune_and_classify(link.mapping, truth.distinct_cols)
    hist = np.bincount(graph.check_degree)
    te = account_errors(outcome, truth, config.mode)
    lines = [f"trial {trial} ebn0_db {_fmt(float(ebn0_db))} ka {truth.ka}"]
    lines.append("degrees " + " ".join(f"{d}:{int(c)}" for d, c in enumerate(hist)))
    lines.append(f"zero-tons {graph.zero_tons.size} single-tons {graph.single_tons.size} "
                 f"multi-tons {graph.multi_tons.size}")
    for i, cols in enumerate(outcome.peel_rounds, start=1):
        lines.append(f"peel round {i} decoded " + ",".join(str(c) for c in cols))
    lines.append(f"peel rounds {len(outcome.peel_rounds)} "
                 f"peeled {outcome.peeled_cols.size}/{truth.distinct_cols.size} "
                 f"residual {outcome.residual_cols.size}")
    lines.append(f"turbo passes {outcome.turbo_passes} "
                 f"parity_ok {outcome.residual_parity_ok}/{outcome.residual_cols.size}")
    lines.append(f"errors {te.errors} e1 {te.e1} e2 {te.e2} e3 {te.e3}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Adaptive point evaluation (optionally on a worker pool)

_WORKER: dict = {}


def _worker_init(config: ScenarioConfig) -> None:
    _WORKER["config"] = config
    _WORKER["link"] = build_link(config)


def _worker_run(args) -> TrialStats:
    ebn0_db, trial = args
    return run_trial(_WORKER["link"], _WORKER["config"], ebn0_db, trial)


@dataclass
class PointResult:
    ebn0_db: float
    trials: int
    errors: int
    e1: int
    e2: int
    e3: int
    slots: int
    pe: float
    ci95: float
    peeled_frac_mean: float
    turbo_iters_mean: float


class PointEvaluator:
    """Adaptive Monte-Carlo Pe estimation at grid points, with result caching.

    ``pe_events`` selects the error statistic: "all" averages every error
    event per Eq.-(8)-style accounting, "decode" restricts to decoding
    failures (E1 + E2) among non-collided users, which is the metric without
    the unsourced collision floor.
    """

    def __init__(self, config: ScenarioConfig, target_errors: int = 50,
                 min_trials: int = 16, max_trials: int = 200_000, jobs: int = 1,
                 pe_events: str = "all"):
        if pe_events not in ("all", "decode"):
            raise ParameterError(f"pe_events must be 'all' or 'decode', got {pe_events!r}")
        self.config = config
        self.target_errors = target_errors
        self.min_trials = max(min_trials, 1)
        self.max_trials = max_trials
        self.jobs = max(1, jobs)
        self.pe_events = pe_events
        self._cache: dict[int, PointResult] = {}
        self._link: Link | None = None
        self._pool = None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _run_round(self, ebn0_db: float, start: int, count: int) -> list[TrialStats]:
        tasks = [(ebn0_db, t) for t in range(start, start + count)]
        if self.jobs == 1:
            if self._link is None:
                self._link = build_link(self.config)
            return [run_trial(self._link, self.config, e, t) for e, t in tasks]
        if self._pool is None:
            self._pool = concurrent.futures.ProcessPoolExecutor(
                max_workers=self.jobs, initializer=_worker_init,
                initargs=(self.config,))
        return list(self._pool.map(_worker_run, tasks, chunksize=max(1, len(tasks) // self.jobs)))

    def evaluate(self, ebn0_db: float) -> PointResult:
        key = int(round(ebn0_db * 1000))
        if key in self._cache:
            return self._cache[key]
        stats: list[TrialStats] = []
        counted = 0
        while True:
            done = len(stats)
            if done >= self.max_trials:
                break
            if counted >= self.target_errors and done >= self.min_trials:
                break
            count = min(ROUND_SIZE, self.max_trials - done)
            batch = self._run_round(ebn0_db, done, count)
            stats.extend(batch)
            if self.pe_events == "decode":
                counted += sum(s.e1 + s.e2 for s in batch)
            else:
                counted += sum(s.errors for s in batch)
        e1 = sum(s.e1 for s in stats)
        e2 = sum(s.e2 for s in stats)
        e3 = sum(s.e3 for s in stats)
        if self.pe_events == "decode":
            errors = e1 + e2
            slots = sum(s.denominator - s.e3 for s in stats)
        else:
            errors = e1 + e2 + e3
            slots = sum(s.denominator for s in stats)
        pe = errors / slots if slots else 0.0
        ci = 1.96 * float(np.sqrt(max(pe * (1 - pe), 0.0) / slots)) if slots else 0.0
        res = PointResult(
            ebn0_db=ebn0_db, trials=len(stats), errors=errors,
            e1=e1, e2=e2, e3=e3, slots=slots, pe=pe, ci95=ci,
            peeled_frac_mean=float(np.mean([s.peeled_frac for s in stats])) if stats else 0.0,
            turbo_iters_mean=float(np.mean([s.turbo_passes for s in stats])) if stats else 0.0)
        self._cache[key] = res
        return res


# ---------------------------------------------------------------------------
# Sweeps


@dataclass
class SweepResult:
    config: ScenarioConfig
    rows: list[dict]

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _point_row(config: ScenarioConfig, point: PointResult, ka) -> dict:
    return {"scenario_id": scenario_id(config), "mode": config.mode,
            "gamma": config.gamma, "rho": config.rho, "n_s": config.n_s,
            "K": config.n_users, "ell": config.ell, "n": config.n, "k": config.k,
            "Q": config.q, "ebn0_db": float(point.ebn0_db), "ka": ka,
            "trials": point.trials, "errors": point.errors, "pe": point.pe,
            "ci95": point.ci95, "peeled_frac_mean": point.peeled_frac_mean,
            "turbo_iters_mean": point.turbo_iters_mean, "seed": config.master_seed,
            "e1": point.e1, "e2": point.e2, "e3": point.e3}


def pe_sweep(config: ScenarioConfig, grid, target_errors: int = 50,
             min_trials: int = 16, max_trials: int = 200_000,
             jobs: int = 1, pe_events: str = "all") -> SweepResult:
    """Monte-Carlo Pe estimate at each E_b/N_0 grid point via the full pipeline."""
    ev = PointEvaluator(config, target_errors, min_trials, max_trials, jobs, pe_events)
    try:
        rows = [_point_row(config, ev.evaluate(float(e)), config.ka) for e in grid]
    finally:
        ev.close()
    return SweepResult(config=config, rows=rows)


def required_ebn0(config: ScenarioConfig, target_pe: float,
                  lo_db: float, hi_db: float, resolution: float = 0.25,
                  target_errors: int = 50, min_trials: int = 16,
                  max_trials: int = 200_000, jobs: int = 1, pe_events: str = "all",
                  evaluator: PointEvaluator | None = None) -> tuple[float, PointResult]:
    """Smallest grid-resolution E_b/N_0 meeting Pe <= target, by bisection.

    The dB lattice is ``lo_db + i * resolution``; the bracket must satisfy
    Pe(hi) <= target (raises otherwise), and Pe is assumed monotone in dB.
    """
    if not 0 < target_pe < 0.5 + 1e-12:
        raise ParameterError("target_pe must lie in (0, 0.5]")
    ev = evaluator or PointEvaluator(config, target_errors, min_trials, max_trials,
                                     jobs, pe_events)
    own = evaluator is None
    try:
        n_steps = int(round((hi_db - lo_db) / resolution))
        if n_steps < 1:
            raise ParameterError("bracket narrower than resolution")
        grid = [lo_db + i * resolution for i in range(n_steps + 1)]
        top = ev.evaluate(grid[-1])
        if top.pe > target_pe:
            raise RuntimeError(
                f"Pe({grid[-1]:.2f} dB) = {top.pe:.4f} > target {target_pe}; extend bracket")
        bottom = ev.evaluate(grid[0])
        if bottom.pe <= target_pe:
            return grid[0], bottom
        lo_i, hi_i = 0, n_steps
        while hi_i - lo_i > 1:
            mid = (lo_i + hi_i) // 2
            if ev.evaluate(grid[mid]).pe <= target_pe:
                hi_i = mid
            else:
                lo_i = mid
        return grid[hi_i], ev.evaluate(grid[hi_i])
    finally:
        if own:
            ev.close()


def interpolated_threshold(config: ScenarioConfig, target_pe: float,
                           lo_db: float, hi_db: float, resolution: float = 0.25,
                           target_errors: int = 50, min_trials: int = 16,
                           max_trials: int = 200_000, jobs: int = 1,
                           pe_events: str = "all") -> tuple[float, float]:
    """Grid threshold plus its log-interpolated crossing estimate.

    Runs the same bisection as :func:`required_ebn0` and then interpolates
    log(Pe) linearly between the two grid points bracketing the target, which
    removes most of the grid quantization when comparing nearby thresholds.
    Returns (grid_db, interpolated_db).
    """
    ev = PointEvaluator(config, target_errors, min_trials, max_trials, jobs, pe_events)
    try:
        th, point = required_ebn0(config, target_pe, lo_db, hi_db, resolution,
                                  evaluator=ev)
        below = ev._cache.get(int(round((th - resolution) * 1000)))
        if below is None or below.pe <= target_pe or point.pe > target_pe:
            return th, th
        hi_pe = max(point.pe, target_pe * 1e-3)
        frac = (np.log(below.pe) - np.log(target_pe)) / (np.log(below.pe) - np.log(hi_pe))
        return th, (th - resolution) + resolution * float(frac)
    finally:
        ev.close()


def required_ebn0_sweep(config: ScenarioConfig, ka_list, target_pe: float,
                        lo_db: float, hi_db: float, resolution: float = 0.25,
                        target_errors: int = 50, min_trials: int = 16,
                        max_trials: int = 200_000, jobs: int = 1,
                        pe_events: str = "all") -> SweepResult:
    """Required E_b/N_0 per K_a (the Pe <= target threshold curve)."""
    rows = []
    for ka in ka_list:
        cfg = config.with_overrides(ka=int(ka))
        threshold, point = required_ebn0(cfg, target_pe, lo_db, hi_db, resolution,
                                         target_errors, min_trials, max_trials, jobs,
                                         pe_events)
        rows.append(_point_row(cfg, point, int(ka)))
    return SweepResult(config=config, rows=rows)


# ---------------------------------------------------------------------------
# Structural experiments


def degree_histogram_experiment(gamma: int, rho: int, ka_list, n_seeds: int = 200,
                                master_seed: int = 0) -> list[dict]:
    """Seed-averaged check-node degree histograms before/after structural peeling."""
    fm = build_mapping_matrix(construct_euler_square(gamma, rho))
    K = fm.n_users
    rows = []
    for ka in ka_list:
        if ka > K:
            raise ParameterError(f"ka = {ka} exceeds K = {K}")
        max_deg = 0
        before_acc: list[np.ndarray] = []
        after_acc: list[np.ndarray] = []
        peeled = []
        for s in range(n_seeds):
            rng = substream(master_seed, "deg", gamma, rho, int(ka), s)
            cols = rng.choice(K, size=int(ka), replace=False)
            tr = peel_structural(fm, cols)
            before_acc.append(tr.deg_hist_before)
            after_acc.append(tr.deg_hist_after)
            peeled.append(tr.peeled_fraction)
            max_deg = max(max_deg, tr.deg_hist_before.size)
        before = np.zeros(max_deg)
        after = np.zeros(max_deg)
        for b, a in zip(before_acc, after_acc):
            before[:b.size] += b
            after[:a.size] += a
        before /= n_seeds
        after /= n_seeds
        for d in range(max_deg):
            rows.append({"gamma": gamma, "rho": rho, "ka": int(ka), "seeds": n_seeds,
                         "degree": d, "before_mean": float(before[d]),
                         "after_mean": float(after[d]),
                         "peeled_frac_mean": float(np.mean(peeled))})
    return rows


def degree_histogram_csv(rows: list[dict]) -> str:
    cols = ["gamma", "rho", "ka", "seeds", "degree", "before_mean", "after_mean",
            "peeled_frac_mean"]
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def spectral_efficiency_curve(constructions, ebn0_db: float = 10.0,
                              rate: float = 0.5, q: int = 1,
                              phase_mode: str = "none", seed: int = 0) -> list[dict]:
    """Optimum-decoding throughput per construction, rows sorted by load beta.

    The dB axis is interpreted through the project energy convention for a
    rate-(``rate``) BPSK chain: SNR = rate * q * 10^(ebn0/10) / 2, matching
    :func:`sparsig.channel.ebn0_to_snr` with k = rate * q * ell.
    """
    snr = 10.0 ** (ebn0_db / 10.0) * rate * q / 2.0
    rows = []
    for gamma, rho in constructions:
        fm = build_mapping_matrix(construct_euler_square(gamma, rho))
        sig = build_signatures(fm, phase_mode, seed=seed)
        beta = gamma / rho
        rows.append({"gamma": gamma, "rho": rho, "beta": beta, "n_s": fm.n_s,
                     "K": fm.n_users, "ebn0_db": ebn0_db, "snr": snr,
                     "se_bits": spectral_efficiency(sig, snr),
                     "cover_wyner": cover_wyner(fm.n_users / fm.n_s, snr)})
    rows.sort(key=lambda r: (r["beta"], r["gamma"]))
    return rows


def spectral_csv(rows: list[dict]) -> str:
    cols = ["gamma", "rho", "beta", "n_s", "K", "ebn0_db", "snr", "se_bits", "cover_wyner"]
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Run manifests


def make_manifest(config: ScenarioConfig, task: str, params: dict, outputs: dict) -> dict:
    return {
        "library": "sparsig",
        "library_version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "scenario_id": scenario_id(config),
        "scenario": dataclasses.asdict(config),
        "task": task,
        "params": params,
        "outputs": outputs,
    }


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_from_manifest(manifest: dict) -> ScenarioConfig:
    raw = dict(manifest["scenario"])
    if raw.get("active_set") is not None:
        raw["active_set"] = tuple(raw["active_set"])
    if raw["mode"] == "scheduled":
        raw.pop("ka", None)
    return ScenarioConfig(**raw)


def rerun_from_manifest(manifest: dict, jobs: int = 1) -> SweepResult:
    """Regenerate the CSV rows recorded by a manifest (byte-identical output)."""
    config = config_from_manifest(manifest)
    params = manifest["params"]
    task = manifest["task"]
    if task == "sweep":
        return pe_sweep(config, params["grid"], params["target_errors"],
                        params["min_trials"], params["max_trials"], jobs,
                        params.get("pe_events", "all"))
    if task == "threshold":
        return required_ebn0_sweep(config, params["ka_list"], params["target_pe"],
                                   params["lo_db"], params["hi_db"], params["resolution"],
                                   params["target_errors"], params["min_trials"],
                                   params["max_trials"], jobs,
                                   params.get("pe_events", "all"))
    raise ParameterError(f"manifest task {task!r} is not rerunnable")
