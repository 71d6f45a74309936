"""Dense interior-point solver for the unit-diagonal SDP of the phase step.

Problem family::

    minimize    tr(R Phi)
    subject to  Phi_mm = 1            (m = 1..n)
                tr(T Phi) >= gamma    (optional)
                Phi Hermitian PSD

Infeasible-start primal-dual path following with the HKM search direction
and Mehrotra predictor-corrector steps, carried out directly in complex
Hermitian arithmetic. Cost and inequality are normalized internally, so
the returned ``phi`` is invariant to positive scaling of ``R``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .linalg import hermitian_part


class SdpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


class SdpError(RuntimeError):
    pass


@dataclass
class SdpProblem:
    cost: np.ndarray
    ineq: np.ndarray | None = None
    ineq_rhs: float = -math.inf

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=complex)
        n = self.cost.shape[0]
        if self.cost.shape != (n, n) or n < 1:
            raise ValueError("cost must be a non-empty square matrix")
        self.cost = hermitian_part(self.cost)
        if self.ineq is not None:
            self.ineq = hermitian_part(np.asarray(self.ineq, dtype=complex))
            if self.ineq.shape != (n, n):
                raise ValueError("inequality matrix must match the cost dimension")

    @classmethod
    def from_blocks(cls, cost, ineq_matrices, ineq_rhs: float) -> "SdpProblem":
        """Aggregate ``sum_k 2 Re tr(Phi T_k) >= rhs`` into one Hermitian ``T``."""
        t = sum(m + m.conj().T for m in ineq_matrices) if len(ineq_matrices) else None
        return cls(cost, t, ineq_rhs)

    @property
    def dim(self) -> int:
        return self.cost.shape[0]

    @property
    def has_ineq(self) -> bool:
        return self.ineq is not None and math.isfinite(self.ineq_rhs)


@dataclass
class SdpSolution:
    phi: np.ndarray
    primal_obj: float
    dual_obj: float
    dual_gap: float
    status: SdpStatus
    iterations: int = 0
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_ineq_slack: float | None = None


@dataclass
class CertificateReport:
    diag_error: float
    min_eig: float
    ineq_slack: float
    objective_error: float
    dual_gap: float
    passed: bool


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest ``a`` with ``x + a dx`` PSD (``inf`` if unbounded)."""
    c = np.linalg.cholesky(x)
    ci = sla.solve_triangular(c, np.eye(x.shape[0]), lower=True)
    w = np.linalg.eigvalsh(hermitian_part(ci @ dx @ ci.conj().T))
    return math.inf if w[0] >= 0 else -1.0 / w[0]


def _scalar_step(s: float, ds: float) -> float:
    return math.inf if ds >= 0 else -s / ds


def _ipm(rn: np.ndarray, tn: np.ndarray | None, bn: float, tol: float, max_iter: int):
    """Core iteration on normalized data. Returns ``(X, y, converged, iters)``."""
    n = rn.shape[0]
    ineq = tn is not None
    m = n + 1 if ineq else n
    b = np.ones(m)
    if ineq:
        b[n] = bn
    eye = np.eye(n)

    def a_op(mat):
        out = np.empty(m)
        out[:n] = np.real(np.diag(mat))
        if ineq:
            out[n] = np.real(np.sum(tn.T * mat))
        return out

    def at_op(y):
        out = np.diag(y[:n]).astype(complex)
        if ineq:
            out = out + y[n] * tn
        return out

    x = eye.astype(complex)
    z = eye.astype(complex)
    y = np.zeros(m)
    s, zs = 1.0, 1.0
    nn = n + (1 if ineq else 0)
    bnorm = 1.0 + np.linalg.norm(b)
    rnorm = 1.0 + np.linalg.norm(rn)
    converged = False
    it = 0

    for it in range(1, max_iter + 1):
        mu = (np.real(np.sum(x.T * z)) + (s * zs if ineq else 0.0)) / nn
        rp = b - a_op(x)
        if ineq:
            rp[n] += s
        rd = rn - at_op(y) - z
        rs = (y[n] - zs) if ineq else 0.0
        pobj = float(np.real(np.sum(rn.T * x)))
        dobj = float(b @ y)
        pinf = np.linalg.norm(rp) / bnorm
        dinf = math.sqrt(np.linalg.norm(rd) ** 2 + rs ** 2) / rnorm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if pinf <= tol and dinf <= tol and gap <= 0.1 * tol:
            converged = True
            break

        try:
            cz = np.linalg.cholesky(z)
            _max_step(x, np.zeros_like(x))
        except np.linalg.LinAlgError:
            # iterate hit the numerical boundary of the cone
            converged = pinf <= 10 * tol and dinf <= 10 * tol and gap <= tol
            break
        zinv = sla.cho_solve((cz, True), eye.astype(complex))
        zinv = hermitian_part(zinv)

        # Schur complement M_ij = Re tr(A_i X A_j Z^-1)
        schur = np.empty((m, m))
        schur[:n, :n] = np.real(x * zinv.T)
        if ineq:
            xtz = x @ tn @ zinv
            col = np.real(np.diag(xtz))
            schur[:n, n] = col
            schur[n, :n] = col
            schur[n, n] = float(np.real(np.sum(tn.T * xtz))) + s / zs
        schur = 0.5 * (schur + schur.T)
        try:
            cm = sla.cho_factor(schur)
        except np.linalg.LinAlgError:
            cm = None

        def solve_dir(rc, rc_s):
            rhs = rp - a_op(rc @ zinv - x @ rd @ zinv)
            if ineq:
                rhs[n] += (rc_s - s * rs) / zs
            dy = sla.cho_solve(cm, rhs) if cm is not None else np.linalg.lstsq(schur, rhs, rcond=None)[0]
            dz = rd - at_op(dy)
            dx = hermitian_part((rc - x @ dz) @ zinv)
            if ineq:
                dzs = rs + dy[n]
                ds = (rc_s - s * dzs) / zs
            else:
                dzs = ds = 0.0
            return dx, dy, dz, ds, dzs

        def steps(dx, dz, ds, dzs):
            ap = _max_step(x, dx)
            ad = _max_step(z, dz)
            if ineq:
                ap = min(ap, _scalar_step(s, ds))
                ad = min(ad, _scalar_step(zs, dzs))
            return ap, ad

        # predictor
        xz = x @ z
        dxa, dya, dza, dsa, dzsa = solve_dir(-xz, -s * zs)
        ap, ad = steps(dxa, dza, dsa, dzsa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (np.real(np.sum((x + ap * dxa).T * (z + ad * dza)))
                  + ((s + ap * dsa) * (zs + ad * dzsa) if ineq else 0.0)) / nn
        sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** 3)

        # corrector
        rc = sigma * mu * eye - xz - dxa @ dza
        rc_s = sigma * mu - s * zs - dsa * dzsa
        dx, dy, dz, ds, dzs = solve_dir(rc, rc_s)
        ap, ad = steps(dx, dz, ds, dzs)
        ap = min(1.0, 0.98 * ap)
        ad = min(1.0, 0.98 * ad)

        x = hermitian_part(x + ap * dx)
        z = hermitian_part(z + ad * dz)
        y = y + ad * dy
        if ineq:
            s += ap * ds
            zs += ad * dzs
    return x, y, converged, it


def _normalize(mat: np.ndarray) -> tuple[np.ndarray, float]:
    nrm = float(np.linalg.norm(mat))
    if nrm == 0.0:
        return mat, 1.0
    return mat / nrm, nrm


def max_ineq_value(problem: SdpProblem, tol: float = 1e-9, max_iter: int = 200) -> float:
    """Phase-1 value ``max tr(T Phi)`` over the unit-diagonal PSD set."""
    tn, ts = _normalize(problem.ineq)
    x, y, _, _ = _ipm(-tn, None, 0.0, tol, max_iter)
    d = np.sqrt(np.maximum(np.real(np.diag(x)), 1e-300))
    x = x / d[:, None] / d[None, :]
    return float(np.real(np.sum(problem.ineq.T * x)))


def solve(problem: SdpProblem, tol: float = 1e-7, max_iter: int = 200) -> SdpSolution:
    """Solve the unit-diagonal SDP; see module docstring for the problem form.

    ``Infeasible`` is returned when a phase-1 solve shows the inequality
    cannot be met on the unit-diagonal spectrahedron.
    """
    n = problem.dim
    rn, cs = _normalize(problem.cost)
    tn = None
    bn = 0.0
    vmax = None
    if problem.has_ineq:
        t = problem.ineq
        if np.linalg.norm(t) == 0.0:
            if problem.ineq_rhs > 0:
                return _infeasible(n, 0.0)
        else:
            at_identity = float(np.real(np.trace(t)))
            if problem.ineq_rhs > at_identity:
                vmax = max_ineq_value(problem, tol=tol, max_iter=max_iter)
                if vmax < problem.ineq_rhs - 1e-9 * max(1.0, abs(problem.ineq_rhs), np.linalg.norm(t)):
                    return _infeasible(n, vmax)
            tn, ts = _normalize(t)
            bn = problem.ineq_rhs / ts

    x, y, converged, iters = _ipm(rn, tn, bn, tol, max_iter)

    # polish: exact unit diagonal by congruence (keeps PSD)
    d = np.sqrt(np.maximum(np.real(np.diag(x)), 1e-300))
    phi = hermitian_part(x / d[:, None] / d[None, :])
    primal = float(np.real(np.sum(problem.cost.T * phi)))
    dual = cs * (float(np.sum(y[:n])) + (float(y[n]) * bn if tn is not None else 0.0))
    status = SdpStatus.OPTIMAL if converged else SdpStatus.MAX_ITER
    return SdpSolution(phi, primal, dual, primal - dual, status, iters, y * cs, vmax)


def _infeasible(n: int, vmax: float) -> SdpSolution:
    return SdpSolution(np.eye(n, dtype=complex), math.nan, math.nan, math.nan,
                       SdpStatus.INFEASIBLE, 0, np.zeros(0), vmax)


def check_certificate(problem: SdpProblem, solution: SdpSolution,
                      diag_tol: float = 1e-8, eig_tol: float = 1e-8, slack_tol: float = 1e-7,
                      gap_tol: float = 1e-6) -> CertificateReport:
    """Recompute feasibility, objective and gap of an ``Optimal`` solution from scratch.

    The inequality slack is reported relative to ``max(1, |gamma|, ||T||_F)``.
    """
    phi = solution.phi
    diag_err = float(np.max(np.abs(np.diag(phi) - 1.0)))
    min_eig = float(np.linalg.eigvalsh(hermitian_part(phi))[0])
    if problem.has_ineq:
        val = float(np.real(np.trace(problem.ineq @ phi)))
        slack = (val - problem.ineq_rhs) / max(1.0, abs(problem.ineq_rhs), float(np.linalg.norm(problem.ineq)))
    else:
        slack = math.inf
    obj = float(np.real(np.trace(problem.cost @ phi)))
    obj_err = abs(obj - solution.primal_obj)
    scale = max(1.0, abs(obj))
    passed = (solution.status is SdpStatus.OPTIMAL
              and diag_err <= diag_tol
              and min_eig >= -eig_tol * max(1.0, float(np.abs(np.diag(phi)).max()))
              and slack >= -slack_tol
              and obj_err <= 1e-9 * scale
              and abs(solution.dual_gap) <= gap_tol * scale)
    return CertificateReport(diag_err, min_eig, slack, obj_err, solution.dual_gap, passed)


# --- text dump format ---------------------------------------------------------
#
#   risdfrc-sdp 1
#   dim <n>
#   ineq_rhs <float | -inf>
#   cost
#   <n rows, each 2n floats: re im re im ...>
#   ineq            (section omitted when there is no inequality)
#   <n rows>

def dump_problem(problem: SdpProblem, path: str | Path) -> None:
    n = problem.dim
    lines = ["risdfrc-sdp 1", f"dim {n}", f"ineq_rhs {float(problem.ineq_rhs)!r}", "cost"]
    lines += [_row(r) for r in problem.cost]
    if problem.ineq is not None:
        lines.append("ineq")
        lines += [_row(r) for r in problem.ineq]
    Path(path).write_text("\n".join(lines) + "\n")


def _row(r) -> str:
    return " ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in r)


def load_problem(path: str | Path) -> SdpProblem:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "risdfrc-sdp 1":
        raise ValueError("not a risdfrc-sdp v1 file")
    n = int(lines[1].split()[1])
    rhs = float(lines[2].split()[1])

    def block(start):
        rows = []
        for ln in lines[start:start + n]:
            vals = np.array([float(t) for t in ln.split()])
            rows.append(vals[0::2] + 1j * vals[1::2])
        return np.array(rows)

    if lines[3] != "cost":
        raise ValueError("missing cost section")
    cost = block(4)
    ineq = None
    if len(lines) > 4 + n and lines[4 + n] == "ineq":
        ineq = block(5 + n)
    return SdpProblem(cost, ineq, rhs)
