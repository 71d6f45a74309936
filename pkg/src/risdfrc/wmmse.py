"""Sum rate and the closed-form WMMSE block updates (decoders and weights)."""

from __future__ import annotations

import numpy as np

from .linalg import NotPositiveDefiniteError, hermitian_part, logdet_hpd, solve_hpd


def _covariance(beams) -> np.ndarray:
    return sum(b @ b.conj().T for b in beams)


def sum_rate(channels, beams, sigma2: float) -> float:
    """Achievable sum rate in nat/s/Hz.

    ``log det(I + S_k J_k^{-1}) = log det(J_k + S_k) - log det(J_k)``, both
    determinants taken from Hermitian spectra.
    """
    cov = _covariance(beams)
    rate = 0.0
    for k, h in enumerate(channels):
        m = h.shape[0]
        hb = h @ beams[k]
        signal = hb @ hb.conj().T
        total = h @ cov @ h.conj().T + sigma2 * np.eye(m)
        rate += logdet_hpd(total) - logdet_hpd(total - signal)
    return rate


def mse_matrix(h_k: np.ndarray, beams, k: int, u_k: np.ndarray, sigma2: float) -> np.ndarray:
    """MSE matrix of user ``k`` for decoder ``u_k`` (Hermitian PSD)."""
    b_k = beams[k]
    cov = _covariance(beams)
    uh = u_k.conj().T @ h_k
    cross = uh @ b_k
    e = (uh @ cov @ uh.conj().T - cross - cross.conj().T
         + sigma2 * (u_k.conj().T @ u_k) + np.eye(b_k.shape[1]))
    return hermitian_part(e)


def update_decoder(h_k: np.ndarray, beams, k: int, sigma2: float) -> np.ndarray:
    """MMSE receive matrix ``(H_k B H_k^H + sigma^2 I)^{-1} H_k B_k``."""
    cov = _covariance(beams)
    j = h_k @ cov @ h_k.conj().T + sigma2 * np.eye(h_k.shape[0])
    return solve_hpd(j, h_k @ beams[k])


def update_weight(e_k: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(hermitian_part(e_k))
    if w[0] <= 0:
        raise NotPositiveDefiniteError(
            f"update_weight: MSE matrix is singular (min eigenvalue {w[0]:.3e})", float(w[0]))
    return hermitian_part(solve_hpd(e_k, np.eye(e_k.shape[0], dtype=complex)))


def wmmse_objective(weights, mses) -> float:
    """``sum_k log det W_k - tr(W_k E_k) + D_k``; equals the sum rate at the WMMSE fixed point."""
    total = 0.0
    for w, e in zip(weights, mses):
        total += logdet_hpd(w) - float(np.real(np.trace(w @ e))) + w.shape[0]
    return total


def decoders_and_weights(channels, beams, sigma2: float):
    """One pass of the decoder then weight updates for every user.

    Returns ``(decoders, weights, mses)``; ``mses`` are evaluated at the new decoders.
    """
    us, ws, es = [], [], []
    for k, h in enumerate(channels):
        u = update_decoder(h, beams, k, sigma2)
        e = mse_matrix(h, beams, k, u, sigma2)
        us.append(u)
        es.append(e)
        ws.append(update_weight(e))
    return us, ws, es


def weighted_mse(channels, beams, decoders, weights, sigma2: float) -> float:
    """Objective ``sum_k tr(W_k E_k) - log det W_k`` minimized by the AO loop."""
    total = 0.0
    for k, h in enumerate(channels):
        e = mse_matrix(h, beams, k, decoders[k], sigma2)
        total += float(np.real(np.trace(weights[k] @ e))) - logdet_hpd(weights[k])
    return total
