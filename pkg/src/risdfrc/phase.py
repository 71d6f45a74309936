"""RIS phase subproblem: quadratic form in the phases, MM linearization of the
echo constraint, semidefinite relaxation and Gaussian-randomization rounding.

Conventions
-----------
Effective channel ``H_k = H_bu,k + H_ru,k Theta^H G`` and cascade
``X = Theta A Theta^H`` with ``A`` already scaled by ``|eta|``. Writing
``theta_hat = vec(theta theta^H)`` (column-major), the echo power of user
``k`` is ``theta_hat^H Q_k theta_hat`` with

    Q_k = Diag(vec A)^H ((G* G^T) kron (G B_k B_k^H G^H)) Diag(vec A).

The linearization at ``theta_t`` is ``theta^H M_k theta`` with
``M_k = unvec(theta_hat_t^H Q_k)^T``; the structured route builds the same
matrix as ``(G G^H X_t S_k) * A^T`` (elementwise), ``S_k = G B_k B_k^H G^H``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, sdp
from .config import PhaseOptions
from .linalg import hadamard, hermitian_part, herm_eig, kron, unvec
from .radar import RadarParams

log = logging.getLogger(__name__)

# relative SNR slack: start point (as delivered by the beam step) vs accepted candidates
INIT_RTOL = 1e-4
ACCEPT_RTOL = 1e-6


@dataclass
class PhaseQuadratic:
    """``sum_k tr(W_k E_k(theta)) = theta^H xi theta + 2 Re(z^H theta) + const``."""

    xi: np.ndarray
    z: np.ndarray
    const1: list[float] = field(default_factory=list)
    const2: list[complex] = field(default_factory=list)
    const: float = 0.0
    q_list: list[np.ndarray] | None = None

    def objective(self, theta) -> float:
        theta = np.asarray(theta).ravel()
        return float(np.real(np.vdot(theta, self.xi @ theta)) + 2.0 * np.real(np.vdot(self.z, theta)))

    def total(self, theta) -> float:
        return self.objective(theta) + self.const


@dataclass
class SurrogateConstraint:
    m_list: list[np.ndarray]
    c_list: list[float]
    gamma_hat: float
    threshold: float

    @property
    def m_sum(self) -> np.ndarray:
        return sum(self.m_list)

    def value(self, theta) -> float:
        """``sum_k 2 Re(theta^H M_k theta)`` (compare against ``gamma_hat``)."""
        theta = np.asarray(theta).ravel()
        return 2.0 * float(np.real(np.vdot(theta, self.m_sum @ theta)))


@dataclass
class SdrLift:
    r_tilde: np.ndarray
    t_list: list[np.ndarray]
    gamma_hat: float
    phi: np.ndarray | None = None

    def problem(self) -> sdp.SdpProblem:
        return sdp.SdpProblem.from_blocks(self.r_tilde, self.t_list, self.gamma_hat)


@dataclass
class RoundingResult:
    theta: np.ndarray
    objective: float
    surrogate: float
    feasible: bool


@dataclass
class PhaseResult:
    theta: np.ndarray
    objective: float
    objective_init: float
    improved: bool
    mm_iters: int
    flags: list[str] = field(default_factory=list)
    trace: list[dict] = field(default_factory=list)


def theta_hat(theta) -> np.ndarray:
    """``diag(conj(Theta) kron Theta)`` = ``vec(theta theta^H)`` (length ``L^2``)."""
    theta = np.asarray(theta).ravel()
    return np.outer(theta, theta.conj()).ravel(order="F")


def build_quadratic(channels, beams, decoders, weights) -> PhaseQuadratic:
    """Phase-dependent structure of the weighted MSE for fixed beams, decoders and weights.

    ``channels`` is a :class:`~risdfrc.channel.ChannelSet`.
    """
    g = channels.g
    cov = sum(b @ b.conj().T for b in beams)
    d = g @ cov @ g.conj().T
    L = g.shape[0]
    c_sum = np.zeros((L, L), dtype=complex)
    z_mat = np.zeros((L, L), dtype=complex)
    const1, const2 = [], []
    const = 0.0
    for k, (hb, hr) in enumerate(zip(channels.h_bu, channels.h_ru)):
        u, w, b = decoders[k], weights[k], beams[k]
        uwu = u @ w @ u.conj().T
        c_sum += hr.conj().T @ uwu @ hr
        e_k = hr.conj().T @ uwu @ hb @ cov @ g.conj().T
        f_k = hr.conj().T @ u @ w @ b.conj().T @ g.conj().T
        z_mat += e_k.conj().T - f_k.conj().T
        c1 = float(np.real(np.trace(w @ u.conj().T @ hb @ cov @ hb.conj().T @ u)))
        c2 = complex(np.trace(w @ u.conj().T @ hb @ b))
        const1.append(c1)
        const2.append(c2)
        const += (c1 - 2.0 * c2.real + channels.sigma2 * float(np.real(np.trace(w @ u.conj().T @ u)))
                  + float(np.real(np.trace(w))))
    xi = hermitian_part(hadamard(d, hermitian_part(c_sum).T))
    return PhaseQuadratic(xi, np.diag(z_mat).copy(), const1, const2, const)


def build_snr_lift(beams, g, a_resp_scaled) -> list[np.ndarray]:
    """Dense ``Q_k`` (``L^2 x L^2``); for verification and small ``L`` only."""
    a = np.asarray(a_resp_scaled).ravel(order="F")
    p = g.conj() @ g.T
    out = []
    for b in beams:
        s = g @ b @ b.conj().T @ g.conj().T
        q = a.conj()[:, None] * kron(p, s) * a[None, :]
        out.append(hermitian_part(q))
    return out


def echo_power(g, beams, a_resp_scaled, theta) -> float:
    """``sum_k theta_hat^H Q_k theta_hat`` (equals ``sigma_r^2`` times the radar SNR)."""
    theta = np.asarray(theta).ravel()
    x = theta[:, None] * a_resp_scaled * theta.conj()[None, :]
    gb = np.hstack([g @ b for b in beams])
    y = g.conj().T @ x @ gb
    return float(np.vdot(y, y).real)


def mm_surrogate(q_list, theta_t, threshold: float) -> SurrogateConstraint:
    """Tangent lower bound of each ``theta_hat^H Q_k theta_hat`` at ``theta_t`` (dense route)."""
    th = theta_hat(theta_t)
    L = int(round(math.sqrt(th.size)))
    m_list, c_list = [], []
    for q in q_list:
        qbar_h = th.conj() @ q
        c_list.append(-float(np.real(qbar_h @ th)))
        m_list.append(unvec(qbar_h, L).T)
    return SurrogateConstraint(m_list, c_list, threshold - sum(c_list), threshold)


def mm_surrogate_structured(g, beams, a_resp_scaled, theta_t, threshold: float) -> SurrogateConstraint:
    """Same result as :func:`mm_surrogate` in ``O(L^3)`` per user, without ``Q_k``."""
    theta_t = np.asarray(theta_t).ravel()
    x = theta_t[:, None] * a_resp_scaled * theta_t.conj()[None, :]
    pg = g @ g.conj().T
    px = pg @ x
    m_list, c_list = [], []
    for b in beams:
        gb = g @ b
        s = gb @ gb.conj().T
        n = px @ s
        m_list.append(n * a_resp_scaled.T)
        c_list.append(-float(np.real(np.sum(n.T * x))))
    return SurrogateConstraint(m_list, c_list, threshold - sum(c_list), threshold)


def assemble_sdr(quad: PhaseQuadratic, surr: SurrogateConstraint | None) -> SdrLift:
    """Lift to ``(L+1) x (L+1)``; ``surr=None`` drops the echo inequality."""
    L = quad.xi.shape[0]
    r = np.zeros((L + 1, L + 1), dtype=complex)
    r[:L, :L] = quad.xi
    r[:L, L] = quad.z
    r[L, :L] = quad.z.conj()
    if surr is None:
        return SdrLift(r, [], -math.inf)
    t_list = []
    for m in surr.m_list:
        t = np.zeros((L + 1, L + 1), dtype=complex)
        t[:L, :L] = m
        t_list.append(t)
    return SdrLift(r, t_list, surr.gamma_hat)


def candidates_from_factor(factor: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """Unit-modulus candidates (columns) from ``factor @ draws``, de-rotated by the last row."""
    bar = factor @ draws
    last = bar[-1:, :]
    last = np.where(np.abs(last) > 0, last, 1.0)
    return np.exp(1j * np.angle(bar[:-1, :] / last))


def randomize_round(phi, n_trials: int, surr: SurrogateConstraint | None, quad: PhaseQuadratic,
                    rng, backend: str | None = None) -> RoundingResult:
    """Gaussian randomization over ``phi``; best feasible candidate by objective.

    The principal eigenvector is scored alongside the random draws. ``rng``
    is a :class:`numpy.random.Generator` or anything with a ``cn(shape)`` method.
    """
    eig = herm_eig(phi)
    lam = np.clip(eig.eigenvalues, 0.0, None)
    factor = eig.eigenvectors * np.sqrt(lam)[None, :]
    n = phi.shape[0]
    if hasattr(rng, "cn"):
        draws = rng.cn((n, n_trials))
    else:
        draws = (rng.standard_normal((n, n_trials)) + 1j * rng.standard_normal((n, n_trials))) / math.sqrt(2)
    principal = np.zeros((n, 1), dtype=complex)
    principal[-1, 0] = 1.0
    draws = np.hstack([principal, draws])
    cands = candidates_from_factor(factor, draws)
    m_sum = surr.m_sum if surr is not None else np.zeros_like(quad.xi)
    obj, sval = kernels.score_candidates(quad.xi, quad.z, m_sum, cands, backend=backend)
    if surr is None:
        ok = np.ones(obj.shape, dtype=bool)
    else:
        ok = sval >= surr.gamma_hat - 1e-12 * max(1.0, abs(surr.gamma_hat))
    if ok.any():
        idx = int(np.flatnonzero(ok)[np.argmin(obj[ok])])
    else:
        idx = int(np.argmax(sval))
    return RoundingResult(cands[:, idx].copy(), float(obj[idx]), float(sval[idx]), bool(ok[idx]))


def optimize_phase(channels, beams, decoders, weights, radar: RadarParams, theta_init,
                   opts: PhaseOptions | None = None, rng=None, backend: str | None = None) -> PhaseResult:
    """MM + SDR phase update for fixed beams, decoders and weights.

    A candidate replaces the current phases only if it lowers the objective
    and meets the exact echo constraint (not just its linearization). The
    returned phases are therefore never worse than ``theta_init``.

    Raises
    ------
    risdfrc.sdp.SdpError
        If the relaxation returns a non-finite iterate.
    """
    opts = opts or PhaseOptions()
    if rng is None:
        rng = np.random.default_rng(0)
    theta = np.exp(1j * np.angle(np.asarray(theta_init, dtype=complex).ravel()))
    quad = build_quadratic(channels, beams, decoders, weights)
    a_s = channels.a_resp_scaled()
    g = channels.g
    threshold = radar.threshold
    constrained = threshold > 0
    flags: list[str] = []

    def true_ok(th, rtol) -> bool:
        return not constrained or echo_power(g, beams, a_s, th) >= threshold * (1.0 - rtol)

    obj0 = quad.objective(theta)
    obj = obj0
    init_ok = true_ok(theta, INIT_RTOL)
    if not init_ok:
        flags.append("init_infeasible")
    trace: list[dict] = []
    it = 0
    for it in range(1, opts.max_mm + 1):
        surr = mm_surrogate_structured(g, beams, a_s, theta, threshold) if constrained else None
        lift = assemble_sdr(quad, surr)
        sol = sdp.solve(lift.problem(), tol=opts.sdp_tol, max_iter=opts.sdp_max_iter)
        if sol.status is sdp.SdpStatus.INFEASIBLE:
            flags.append("sdp_infeasible")
            break
        if not np.all(np.isfinite(sol.phi)):
            raise sdp.SdpError(f"relaxation returned a non-finite iterate (status {sol.status.value})")
        if sol.status is sdp.SdpStatus.MAX_ITER:
            flags.append("sdp_max_iter")
        lift.phi = sol.phi
        rnd = randomize_round(sol.phi, opts.n_trials, surr, quad, rng, backend=backend)
        echo = echo_power(g, beams, a_s, rnd.theta)
        cand_ok = not constrained or echo >= threshold * (1.0 - ACCEPT_RTOL)
        accept = cand_ok and (rnd.objective < obj or not init_ok)
        trace.append({"mm_iter": it, "candidate_objective": rnd.objective, "surrogate_snr": rnd.surrogate / radar.sigma2_r,
                      "true_snr": echo / radar.sigma2_r, "accepted": accept})
        if not accept:
            break
        rel = abs(obj - rnd.objective) / max(abs(rnd.objective + quad.const), 1e-300)
        theta, obj, init_ok = rnd.theta, rnd.objective, True
        if rel < opts.tol:
            break
    return PhaseResult(theta, obj, obj0, obj < obj0, it, flags, trace)


def quantize_phase(theta, bits: int) -> np.ndarray:
    """Round each phase to the nearest of ``2 pi m / 2^bits`` (circular; ties to the smaller ``m``)."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    levels = 2 ** bits
    step = 2.0 * math.pi / levels
    phi = np.mod(np.angle(np.asarray(theta, dtype=complex)), 2.0 * math.pi)
    phi = np.where(phi >= 2.0 * math.pi, 0.0, phi)
    raw = np.minimum(np.floor(phi / step).astype(np.int64), levels - 1)
    d_lo = phi - raw * step
    lo = raw
    hi = (raw + 1) % levels
    d_hi = step - d_lo
    pick_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (hi < lo))
    m = np.where(pick_hi, hi, lo)
    return np.exp(1j * m * step)
