"""Reference (numpy) implementations of the hot kernels.

``_kernels.pyx`` mirrors these functions one-to-one; :mod:`risdfrc.kernels`
picks the compiled module when it is importable.
"""

from __future__ import annotations

import numpy as np

MU_UPPER = 1.0 - 1e-12
MAX_BISECT = 200


def bisect_mu(gamma_trace: float, target: float, tol: float) -> float:
    """Smallest multiplier ``mu`` in ``[0, 1)`` with ``gamma_trace / (1 - mu)^2 >= target``.

    Returns the upper end of the final bracket so the returned point is on the
    feasible side.
    """
    if gamma_trace >= target:
        return 0.0
    lo, hi = 0.0, MU_UPPER
    for _ in range(MAX_BISECT):
        if hi - lo <= 0.25 * tol * (1.0 - hi):
            break
        mid = 0.5 * (lo + hi)
        if gamma_trace / ((1.0 - mid) * (1.0 - mid)) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def bisect_tau(power: float, p0: float, tol: float) -> float:
    """Smallest ``tau >= 0`` with ``power / (1 + tau)^2 <= p0``."""
    if power <= p0:
        return 0.0
    lo, hi = 0.0, np.sqrt(power / p0)
    for _ in range(MAX_BISECT):
        if hi - lo <= 0.25 * tol * (1.0 + lo):
            break
        mid = 0.5 * (lo + hi)
        if power / ((1.0 + mid) * (1.0 + mid)) <= p0:
            hi = mid
        else:
            lo = mid
    return hi


def penalty_inner(psi_inv, rhs_const, v, b, x, y, inv_rho, target, p0,
                  bisect_tol, max_inner, tol_inner):
    """Inner block-coordinate loop of the penalty method on stacked beams.

    All user matrices are stacked column-wise (``N_t x sum D_k``); every
    update is column-separable so stacking is exact. ``b``, ``x``, ``y`` are
    overwritten in place. Returns ``(iterations, mu, tau)`` of the last pass.
    """
    vh = v.conj().T
    mu = tau = 0.0
    it = 0
    for it in range(1, max_inner + 1):
        b_new = psi_inv @ (inv_rho * (x + vh @ y) + rhs_const)
        vb = v @ b_new
        gtr = float(np.vdot(vb, vb).real)
        if target > 0.0:
            mu = bisect_mu(gtr, target, bisect_tol)
            y[...] = vb / (1.0 - mu)
        else:
            mu = 0.0
            y[...] = vb
        pw = float(np.vdot(b_new, b_new).real)
        tau = bisect_tau(pw, p0, bisect_tol)
        x[...] = b_new / (1.0 + tau)
        diff = float(np.linalg.norm(b_new - b))
        b[...] = b_new
        if diff <= tol_inner * max(1.0, float(np.linalg.norm(b_new))):
            break
    return it, mu, tau


def score_candidates(xi, z, m_sum, cands):
    """Objective and surrogate SNR for candidate phase vectors (columns of ``cands``).

    objective = c^H Xi c + 2 Re(z^H c); surrogate = 2 Re(c^H M c).
    """
    xc = xi @ cands
    obj = np.real(np.einsum("ln,ln->n", cands.conj(), xc)) + 2.0 * np.real(z.conj() @ cands)
    mc = m_sum @ cands
    surr = 2.0 * np.real(np.einsum("ln,ln->n", cands.conj(), mc))
    return obj, surr
