"""Alternating optimization, baselines and the simulation studies."""

from __future__ import annotations

import concurrent.futures as cf
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import penalty as pen
from .channel import ChannelSet, RngStream, effective_channels, sample_scenario
from .config import ScenarioConfig
from .linalg import NotPositiveDefiniteError
from .phase import optimize_phase, quantize_phase
from .radar import (RadarParams, beampattern, cascade_matrix, mainlobe_width_3db,
                    peak_to_sidelobe_db, radar_snr)
from .sdp import SdpError
from .wmmse import decoders_and_weights, sum_rate, weighted_mse

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "random", "com-only")
AXES = {
    "l_elems": "l_elems",
    "p0_w": "p0_w",
    "alpha_bu": "pathloss.alpha_bu",
    "bits": None,
}


class InfeasibleInitError(RuntimeError):
    """No starting point meets the radar SNR threshold."""


class SolverFailure(RuntimeError):
    """A numerical sub-solver failed inside the AO loop."""


@dataclass
class InitPoint:
    beams: list[np.ndarray]
    theta: np.ndarray
    snr: float
    feasible: bool
    draws: int
    blend: float = 0.0


@dataclass
class TrialResult:
    scheme: str
    seed: int
    sum_rate_trace: list[float]
    objective_trace: list[float]
    sum_rate_nat: float
    radar_snr_db: float
    power_w: float
    feasible: bool
    iters: int
    wall_time_s: float
    theta: np.ndarray | None = None
    beams: list[np.ndarray] | None = None
    status: str = "ok"
    flags: list[str] = field(default_factory=list)
    traces: dict | None = None


@dataclass
class SweepResult:
    axis: str
    values: list[float]
    trials: list[tuple[float, TrialResult]]

    def series(self, scheme: str) -> dict[float, tuple[float, float, int]]:
        """``value -> (mean, std, n)`` of the final sum rate over successful seeds."""
        out = {}
        for v in self.values:
            rates = [t.sum_rate_nat for val, t in self.trials
                     if val == v and t.scheme == scheme and t.status == "ok"]
            if rates:
                out[v] = (float(np.mean(rates)), float(np.std(rates)), len(rates))
        return out


def radar_params(config: ScenarioConfig, channels: ChannelSet, use_radar: bool = True) -> RadarParams:
    return RadarParams(config.gamma0_db if use_radar else -math.inf, channels.sigma2_r)


def comm_beams(h_list, d_k: int, p0: float) -> list[np.ndarray]:
    """Dominant right singular vectors of each channel, equal power per stream, total ``p0``."""
    k = len(h_list)
    amp = math.sqrt(p0 / (k * d_k))
    out = []
    for h in h_list:
        _, _, vh = np.linalg.svd(h)
        out.append(amp * vh.conj().T[:, :d_k])
    return out


def radar_beams(v: np.ndarray, widths: Sequence[int], p0: float) -> list[np.ndarray]:
    """All power on the top eigenvector of ``V^H V`` (first stream of every user)."""
    _, vecs = np.linalg.eigh(v.conj().T @ v)
    top = vecs[:, -1:]
    amp = math.sqrt(p0 / len(widths))
    return [amp * np.hstack([top, np.zeros((v.shape[1], w - 1), dtype=complex)]) for w in widths]


def init_feasible(config: ScenarioConfig, channels: ChannelSet, rng: RngStream,
                  use_radar: bool = True) -> InitPoint:
    """Random phases (redrawn up to ``ao.init_redraws`` times) and SVD beams at full power.

    Draws stop at the first SNR-feasible pair. If none is feasible, the best
    draw's beams are blended toward the radar beam
    (``sqrt(1-t) B_comm + sqrt(t) B_radar``, smallest ``t`` on a 1/50 grid).
    """
    radar = radar_params(config, channels, use_radar)
    p0 = config.p0_w
    best: InitPoint | None = None
    draws = max(1, config.algo.ao.init_redraws)
    for i in range(draws):
        theta = np.exp(2j * math.pi * rng.uniform(size=config.l_elems))
        beams = comm_beams(effective_channels(channels, theta), config.d_k, p0)
        v = cascade_matrix(channels.g, theta, channels.a_resp, channels.eta)
        snr = radar_snr(v, beams, channels.sigma2_r)
        ok = snr >= radar.gamma0
        if best is None or snr > best.snr:
            best = InitPoint(beams, theta, snr, ok, i + 1)
        if ok:
            return InitPoint(beams, theta, snr, True, i + 1)
    assert best is not None
    v = cascade_matrix(channels.g, best.theta, channels.a_resp, channels.eta)
    rb = radar_beams(v, [b.shape[1] for b in best.beams], p0)
    for t in np.linspace(0.02, 1.0, 50):
        beams = pen.snap_to_power([math.sqrt(1 - t) * b + math.sqrt(t) * r for b, r in zip(best.beams, rb)], p0)
        snr = radar_snr(v, beams, channels.sigma2_r)
        if snr >= radar.gamma0:
            return InitPoint(beams, best.theta, snr, True, draws, float(t))
    return InitPoint(best.beams, best.theta, best.snr, False, draws)


def _snr_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def _is_feasible(config: ScenarioConfig, power: float, snr: float) -> bool:
    return power <= config.p0_w * (1 + 1e-5) and snr >= config.gamma0 * (1 - 1e-4)


def run_ao(config: ScenarioConfig, channels: ChannelSet, *, init: InitPoint | None = None,
           rng: RngStream | None = None, optimize_phases: bool = True, use_radar: bool = True,
           keep_traces: bool = False, scheme: str = "proposed", seed: int = 0) -> TrialResult:
    """Alternate decoder/weight, beamformer and (optionally) phase updates.

    Stops when the weighted MSE changes by less than ``ao.tol`` or after
    ``ao.n_max`` iterations. The reported sum rate is recomputed from the
    final point.

    Raises
    ------
    InfeasibleInitError
        If no SNR-feasible start exists (the radar SNR constraint binds).
    SolverFailure
        If a linear solve or the relaxation breaks down.
    """
    t0 = time.perf_counter()
    rng = rng or RngStream(seed, ("ao",))
    radar = radar_params(config, channels, use_radar)
    if init is None:
        init = init_feasible(config, channels, rng.child("init"), use_radar)
    if use_radar and not init.feasible:
        raise InfeasibleInitError(
            f"radar SNR constraint: best start reaches {_snr_db(init.snr):.2f} dB "
            f"< gamma0 = {config.gamma0_db:.2f} dB")
    ao = config.algo.ao
    beams = [b.copy() for b in init.beams]
    theta = init.theta.copy()
    phase_rng = rng.child("phase").generator
    sigma2 = channels.sigma2
    rates: list[float] = []
    objectives: list[float] = []
    flags: list[str] = []
    traces = {"penalty": [], "phase": []} if keep_traces else None
    prev = None
    n = 0
    try:
        for n in range(1, ao.n_max + 1):
            h = effective_channels(channels, theta)
            us, ws, _ = decoders_and_weights(h, beams, sigma2)
            v = cascade_matrix(channels.g, theta, channels.a_resp, channels.eta)
            res = pen.run_penalty(beams, h, us, ws, v, radar, config.p0_w, config.algo.penalty)
            beams = res.beams
            if res.fallback:
                flags.append(f"penalty_fallback@{n}")
            if traces is not None:
                traces["penalty"].append({"iter": n, "outer_iters": res.outer_iters, "converged": res.converged,
                                          "penalty_x": res.penalty_x, "penalty_y": res.penalty_y})
            if optimize_phases:
                ph = optimize_phase(channels, beams, us, ws, radar, theta, config.algo.phase, phase_rng)
                theta = ph.theta
                flags.extend(f"{f}@{n}" for f in ph.flags)
                if traces is not None:
                    traces["phase"].append({"iter": n, "mm_iters": ph.mm_iters, "trace": ph.trace})
                h = effective_channels(channels, theta)
            obj = weighted_mse(h, beams, us, ws, sigma2)
            objectives.append(obj)
            rates.append(sum_rate(h, beams, sigma2))
            if prev is not None and abs(prev - obj) < ao.tol:
                break
            prev = obj
    except (NotPositiveDefiniteError, SdpError, pen.InfeasibleSubproblemError) as exc:
        raise SolverFailure(f"iteration {n}: {exc}") from exc

    h = effective_channels(channels, theta)
    v = cascade_matrix(channels.g, theta, channels.a_resp, channels.eta)
    snr = radar_snr(v, beams, channels.sigma2_r)
    power = float(sum(np.vdot(b, b).real for b in beams))
    return TrialResult(scheme, seed, rates, objectives, sum_rate(h, beams, sigma2), _snr_db(snr), power,
                       _is_feasible(config, power, snr), n, time.perf_counter() - t0, theta, beams,
                       flags=flags, traces=traces)


def baseline_random(config: ScenarioConfig, channels: ChannelSet, **kw) -> TrialResult:
    """Phases frozen at the initial random draw; beams optimized."""
    kw.setdefault("scheme", "random")
    return run_ao(config, channels, optimize_phases=False, **kw)


def baseline_com_only(config: ScenarioConfig, channels: ChannelSet, **kw) -> TrialResult:
    """Same pipeline with the radar constraint removed (feasibility still reported against gamma0)."""
    kw.setdefault("scheme", "com-only")
    return run_ao(config, channels, use_radar=False, **kw)


def run_trial(config: ScenarioConfig, scheme: str, seed: int, keep_traces: bool = False) -> TrialResult:
    """One scheme on the channel realization of ``seed``; never raises for solver trouble.

    Failures come back as a result with ``status`` ``infeasible`` or ``solver_failure``.
    """
    root = RngStream(seed)
    channels = sample_scenario(config, root.child("channels"))
    rng = root.child("algo")
    fn = {"proposed": run_ao, "random": baseline_random, "com-only": baseline_com_only}[scheme]
    t0 = time.perf_counter()
    try:
        return fn(config, channels, rng=rng, keep_traces=keep_traces, scheme=scheme, seed=seed)
    except InfeasibleInitError as exc:
        status, msg = "infeasible", str(exc)
    except SolverFailure as exc:
        status, msg = "solver_failure", str(exc)
    log.warning("seed %d scheme %s: %s", seed, scheme, msg)
    return TrialResult(scheme, seed, [], [], math.nan, math.nan, math.nan, False, 0,
                       time.perf_counter() - t0, status=status, flags=[msg])


def requantize(config: ScenarioConfig, trial: TrialResult, bits: int) -> TrialResult:
    """Quantize the trial's phases to ``bits`` and re-evaluate (beams unchanged)."""
    if trial.status != "ok":
        return trial
    channels = sample_scenario(config, RngStream(trial.seed).child("channels"))
    theta = quantize_phase(trial.theta, bits)
    h = effective_channels(channels, theta)
    v = cascade_matrix(channels.g, theta, channels.a_resp, channels.eta)
    snr = radar_snr(v, trial.beams, channels.sigma2_r)
    return TrialResult(trial.scheme, trial.seed, trial.sum_rate_trace, trial.objective_trace,
                       sum_rate(h, trial.beams, channels.sigma2), _snr_db(snr), trial.power_w,
                       _is_feasible(config, trial.power_w, snr), trial.iters, trial.wall_time_s,
                       theta, trial.beams, flags=list(trial.flags))


def _task(args):
    config, scheme, seed = args
    return run_trial(config, scheme, seed)


def _run_tasks(tasks: list, workers: int) -> list[TrialResult]:
    if workers <= 1:
        return [_task(t) for t in tasks]
    with cf.ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_task, tasks))


def seeds_for(config: ScenarioConfig, n_seeds: int) -> list[int]:
    return [config.seed + i for i in range(n_seeds)]


def sweep(config: ScenarioConfig, axis: str, values: Iterable[float], n_seeds: int,
          schemes: Sequence[str] = SCHEMES, workers: int = 1) -> SweepResult:
    """Every scheme at every (value, seed); seeds share channel draws across values.

    On the ``bits`` axis each scheme runs once per seed with continuous
    phases; the phases are then quantized and the rate re-evaluated.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}")
    seeds = seeds_for(config, n_seeds)
    out: list[tuple[float, TrialResult]] = []
    if axis == "bits":
        tasks = [(config, s, seed) for s in schemes for seed in seeds]
        base = _run_tasks(tasks, workers)
        for v in values:
            for tr in base:
                out.append((v, tr if math.isinf(v) else requantize(config, tr, int(v))))
    else:
        key = AXES[axis]
        cast = int if axis == "l_elems" else float
        cfgs = {v: config.replace(**{key: cast(v)}) for v in values}
        keys = [v for v in values for _ in schemes for _ in seeds]
        tasks = [(cfgs[v], s, seed) for v in values for s in schemes for seed in seeds]
        out = list(zip(keys, _run_tasks(tasks, workers)))
    order = {s: i for i, s in enumerate(SCHEMES)}
    out.sort(key=lambda p: (p[0], order.get(p[1].scheme, 99), p[1].seed))
    return SweepResult(axis, values, out)


def convergence_study(config: ScenarioConfig, l_list: Sequence[int], n_seeds: int,
                      schemes: Sequence[str] = ("proposed",), workers: int = 1) -> list[tuple[int, TrialResult]]:
    """Full sum-rate traces (AO tolerance disabled so every run uses ``n_max`` iterations)."""
    tasks = []
    for L in l_list:
        cfg = config.replace(l_elems=int(L), **{"algo.ao.tol": 0.0})
        tasks += [(cfg, s, seed) for s in schemes for seed in seeds_for(config, n_seeds)]
    res = _run_tasks(tasks, workers)
    return [(t[0].l_elems, r) for t, r in zip(tasks, res)]


@dataclass
class BeampatternRecord:
    l_elems: int
    gamma0_db: float
    seed: int
    angles_deg: np.ndarray
    pattern: np.ndarray
    peak_deg: float
    width_3db_deg: float
    psl_db: float
    trial: TrialResult


def beampattern_study(config: ScenarioConfig, gamma0_list: Sequence[float], l_list: Sequence[int],
                      n_seeds: int = 1, workers: int = 1) -> list[BeampatternRecord]:
    """Proposed solutions evaluated on a 0.5 degree grid over [-90, 90] degrees."""
    grid_deg = np.arange(-90.0, 90.0 + 0.25, 0.5)
    grid = np.deg2rad(grid_deg)
    keys, tasks = [], []
    for L in l_list:
        for g0 in gamma0_list:
            cfg = config.replace(l_elems=int(L), gamma0_db=float(g0))
            for seed in seeds_for(config, n_seeds):
                keys.append((int(L), float(g0), seed, cfg))
                tasks.append((cfg, "proposed", seed))
    res = _run_tasks(tasks, workers)
    out = []
    for (L, g0, seed, cfg), tr in zip(keys, res):
        if tr.status != "ok":
            out.append(BeampatternRecord(L, g0, seed, grid_deg, np.full(grid.size, np.nan),
                                         math.nan, math.nan, math.nan, tr))
            continue
        channels = sample_scenario(cfg, RngStream(seed).child("channels"))
        p = beampattern(grid, tr.theta, channels.g, tr.beams, cfg.spacing_ratio, normalized=True)
        out.append(BeampatternRecord(L, g0, seed, grid_deg, p, float(grid_deg[int(np.argmax(p))]),
                                     mainlobe_width_3db(grid_deg, p), peak_to_sidelobe_db(grid_deg, p), tr))
    return out
