"""Two-layer penalty method for the beamforming subproblem.

The couplings ``X_k = B_k`` (power) and ``Y_k = V B_k`` (radar echo) are
moved into the objective with weight ``1/(2 rho)``. The inner layer cycles
exact block minimizers (B: linear solve; Y, X: scalar dual bisection), the
outer layer shrinks ``rho`` geometrically.

``run_penalty`` rescales ``V`` by ``sqrt(sigma_r^2 gamma_0)`` so the echo
constraint reads ``sum ||V~ B_k||^2 >= 1``; the physical echo power is
tiny (~1e-11 W), and without rescaling the penalty weight would have to
reach ~1e18 before the radar coupling registers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .config import PenaltyConfig
from .linalg import solve_hpd
from .radar import RadarParams, radar_snr

log = logging.getLogger(__name__)


class InfeasibleSubproblemError(ValueError):
    """The cascade matrix annihilates every beam, so no scaling meets the SNR target."""


@dataclass
class PenaltyState:
    beams: list[np.ndarray]
    x_aux: list[np.ndarray]
    y_aux: list[np.ndarray]
    rho: float
    outer_iter: int = 0

    @classmethod
    def initial(cls, beams, v, rho0: float) -> "PenaltyState":
        beams = [np.array(b, dtype=complex) for b in beams]
        return cls(beams, [b.copy() for b in beams], [v @ b for b in beams], rho0)


@dataclass
class PenaltyResult:
    beams: list[np.ndarray]
    converged: bool
    outer_iters: int
    penalty_x: float
    penalty_y: float
    rho: float
    feasible: bool
    fallback: bool = False
    trace: list[dict] = field(default_factory=list)
    block_objectives: list[tuple[int, float]] = field(default_factory=list)


def _system_parts(channels, decoders, weights):
    """``sum_m H_m^H U_m W_m U_m^H H_m`` and per-user ``H_k^H U_k W_k``."""
    nt = channels[0].shape[1]
    psi = np.zeros((nt, nt), dtype=complex)
    rhs = []
    for h, u, w in zip(channels, decoders, weights):
        huw = h.conj().T @ u @ w
        psi += huw @ u.conj().T @ h
        rhs.append(huw)
    return 0.5 * (psi + psi.conj().T), rhs


def quadratic_objective(beams, channels, decoders, weights) -> float:
    """Beam-dependent part of the weighted MSE (the objective of the beamforming subproblem)."""
    psi, rhs = _system_parts(channels, decoders, weights)
    total = 0.0
    for b, r in zip(beams, rhs):
        total += float(np.real(np.trace(b.conj().T @ psi @ b))) - 2.0 * float(np.real(np.trace(r.conj().T @ b)))
    return total


def penalty_terms(state: PenaltyState, v) -> tuple[float, float]:
    px = sum(float(np.linalg.norm(x - b) ** 2) for x, b in zip(state.x_aux, state.beams))
    py = sum(float(np.linalg.norm(y - v @ b) ** 2) for y, b in zip(state.y_aux, state.beams))
    return px, py


def penalty_objective(state: PenaltyState, channels, decoders, weights, v) -> float:
    px, py = penalty_terms(state, v)
    return quadratic_objective(state.beams, channels, decoders, weights) + (px + py) / (2.0 * state.rho)


def update_beams(state: PenaltyState, channels, decoders, weights, v) -> list[np.ndarray]:
    """Exact minimizer over ``{B_k}`` with ``X``, ``Y``, ``rho`` fixed."""
    psi, rhs = _system_parts(channels, decoders, weights)
    nt = psi.shape[0]
    inv_rho = 1.0 / state.rho
    system = 2.0 * psi + inv_rho * (np.eye(nt) + v.conj().T @ v)
    stacked = np.hstack([inv_rho * (x + v.conj().T @ y) + 2.0 * r
                         for x, y, r in zip(state.x_aux, state.y_aux, rhs)])
    sol = solve_hpd(system, stacked)
    return np.split(sol, np.cumsum([b.shape[1] for b in state.beams])[:-1], axis=1)


def solve_y(beams, v, gamma0_linear: float, sigma2_r: float, bisect_tol: float = 1e-9,
            return_mu: bool = False):
    """Projection of ``{V B_k}`` onto ``sum ||Y_k||^2 >= sigma_r^2 gamma_0``.

    ``h(mu) = tr(Gamma) / (1 - mu)^2`` is increasing on ``[0, 1)``; the
    multiplier comes from bisection and ``Y_k = V B_k / (1 - mu)``.
    """
    target = sigma2_r * gamma0_linear
    vb = [v @ b for b in beams]
    gtr = sum(float(np.vdot(t, t).real) for t in vb)
    if target > 0 and gtr <= 0:
        raise InfeasibleSubproblemError("tr(Gamma) = 0: V annihilates all beams, echo constraint unreachable")
    mu = kernels.bisect_mu(gtr, target, bisect_tol) if target > 0 else 0.0
    ys = [t / (1.0 - mu) for t in vb]
    return (ys, mu) if return_mu else ys


def solve_x(beams, p0: float, bisect_tol: float = 1e-9, return_tau: bool = False):
    """Projection of ``{B_k}`` onto the power ball ``sum ||X_k||^2 <= P_0``."""
    power = sum(float(np.vdot(b, b).real) for b in beams)
    tau = kernels.bisect_tau(power, p0, bisect_tol)
    xs = [b / (1.0 + tau) for b in beams]
    return (xs, tau) if return_tau else xs


def tau_upper_bound(beams, p0: float) -> float:
    power = sum(float(np.vdot(b, b).real) for b in beams)
    return float(np.sqrt(power / p0))


def _stack(mats):
    return np.ascontiguousarray(np.hstack(mats), dtype=complex)


def run_penalty(init_beams, channels, decoders, weights, v, radar: RadarParams, p0: float,
                config: PenaltyConfig | None = None, monitor: bool = False,
                backend: str | None = None) -> PenaltyResult:
    """Penalty-based beamforming update for fixed decoders, weights and RIS phases.

    Parameters
    ----------
    init_beams : list of ndarray
        Starting beams (normally the current AO iterate, power-feasible).
    channels : list of ndarray
        Effective channels ``H_k`` for the current RIS phases.
    v : ndarray
        Physical cascade matrix ``eta G^H Theta A Theta^H G``.
    monitor : bool
        Run the block updates through the public per-block functions and
        record ``(outer_iter, penalty_objective)`` after every block in
        ``result.block_objectives`` (slow; for verification).

    Returns
    -------
    PenaltyResult
        Beams after the snap-to-feasible step. If the penalty iterate ends
        worse than a feasible start (higher subproblem objective or violated
        SNR), the start is returned and ``fallback`` is set.
    """
    cfg = config or PenaltyConfig()
    target_phys = radar.threshold
    scale = np.sqrt(target_phys) if target_phys > 0 else 1.0
    vn = np.asarray(v, dtype=complex) / scale
    target = 1.0 if target_phys > 0 else 0.0

    state = PenaltyState.initial(init_beams, vn, cfg.rho0)
    if target > 0 and sum(float(np.linalg.norm(vn @ b) ** 2) for b in state.beams) <= 0:
        raise InfeasibleSubproblemError("V B_k = 0 for all k at the start of the penalty method")
    widths = np.cumsum([b.shape[1] for b in state.beams])[:-1]
    psi, rhs = _system_parts(channels, decoders, weights)
    rhs2 = _stack([2.0 * r for r in rhs])
    eye = np.eye(psi.shape[0])
    vhv = vn.conj().T @ vn

    b_s, x_s, y_s = _stack(state.beams), _stack(state.x_aux), _stack(state.y_aux)
    trace: list[dict] = []
    block_obj: list[tuple[int, float]] = []
    prev_obj = quadratic_objective(state.beams, channels, decoders, weights)
    converged = False
    px = py = np.inf

    def unstack(m):
        return [np.array(p) for p in np.split(m, widths, axis=1)]

    for t in range(1, cfg.max_outer + 1):
        inv_rho = 1.0 / state.rho
        if monitor:
            for _ in range(cfg.max_inner):
                before = _stack(state.beams)
                state.beams = [np.asarray(b) for b in update_beams(state, channels, decoders, weights, vn)]
                block_obj.append((t, penalty_objective(state, channels, decoders, weights, vn)))
                state.y_aux = solve_y(state.beams, vn, target, 1.0, cfg.bisect_tol)
                block_obj.append((t, penalty_objective(state, channels, decoders, weights, vn)))
                state.x_aux = solve_x(state.beams, p0, cfg.bisect_tol)
                block_obj.append((t, penalty_objective(state, channels, decoders, weights, vn)))
                after = _stack(state.beams)
                if np.linalg.norm(after - before) <= cfg.tol_inner * max(1.0, np.linalg.norm(after)):
                    break
            b_s, x_s, y_s = _stack(state.beams), _stack(state.x_aux), _stack(state.y_aux)
        else:
            system = 2.0 * psi + inv_rho * (eye + vhv)
            psi_inv = solve_hpd(system, eye.astype(complex))
            kernels.penalty_inner(psi_inv, rhs2, vn, b_s, x_s, y_s, inv_rho, target, p0,
                                  cfg.bisect_tol, cfg.max_inner, cfg.tol_inner, backend=backend)
            state.beams, state.x_aux, state.y_aux = unstack(b_s), unstack(x_s), unstack(y_s)

        px = float(np.linalg.norm(x_s - b_s) ** 2)
        py = float(np.linalg.norm(y_s - vn @ b_s) ** 2)
        obj = quadratic_objective(state.beams, channels, decoders, weights)
        rel = abs(obj - prev_obj) / max(abs(prev_obj), 1e-300)
        state.outer_iter = t
        trace.append({"outer_iter": t, "rho": state.rho, "objective": obj,
                      "penalty_x": px, "penalty_y": py})
        prev_obj = obj
        if px <= cfg.tol_penalty and py <= cfg.tol_penalty and rel <= cfg.tol_obj:
            converged = True
            break
        state.rho *= cfg.step_c

    if not converged:
        log.info("penalty method stopped at max_outer=%d (penalty_x=%.3e, penalty_y=%.3e)",
                 cfg.max_outer, px, py)

    beams = snap_to_power(state.beams, p0)
    feasible = _feasible(beams, v, radar, p0)
    result = PenaltyResult(beams, converged, state.outer_iter, px, py, state.rho, feasible,
                           trace=trace, block_objectives=block_obj)

    init = [np.asarray(b, dtype=complex) for b in init_beams]
    if _feasible(init, v, radar, p0):
        worse = (quadratic_objective(beams, channels, decoders, weights)
                 > quadratic_objective(init, channels, decoders, weights))
        if not feasible or worse:
            result.beams = init
            result.feasible = True
            result.fallback = True
    return result


def snap_to_power(beams, p0: float) -> list[np.ndarray]:
    power = sum(float(np.vdot(b, b).real) for b in beams)
    s = min(1.0, np.sqrt(p0 / power)) if power > 0 else 1.0
    return [b * s for b in beams]


def _feasible(beams, v, radar: RadarParams, p0: float) -> bool:
    power = sum(float(np.vdot(b, b).real) for b in beams)
    if power > p0 * (1 + 1e-5):
        return False
    if radar.gamma0 <= 0:
        return True
    return radar_snr(v, beams, radar.sigma2_r) >= radar.gamma0 * (1 - 1e-4)
