"""Radar-side quantities: cascaded target matrix, MVDR weight, SNR, beampattern."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import steering_matrix


@dataclass(frozen=True)
class RadarParams:
    gamma0_db: float
    sigma2_r: float

    def __post_init__(self):
        if not self.sigma2_r > 0:
            raise ValueError("sigma2_r must be positive")

    @property
    def gamma0(self) -> float:
        """Linear SNR threshold (0 when the threshold is ``-inf`` dB)."""
        return 0.0 if np.isneginf(self.gamma0_db) else 10.0 ** (self.gamma0_db / 10.0)

    @property
    def threshold(self) -> float:
        """``sigma_r^2 gamma_0``: required echo power after matched combining."""
        return self.sigma2_r * self.gamma0


class DegenerateEchoError(ValueError):
    pass


def cascade_matrix(g: np.ndarray, theta: np.ndarray, a_resp: np.ndarray, eta: complex) -> np.ndarray:
    """``V = eta G^H Theta A Theta^H G``."""
    theta = np.asarray(theta).ravel()
    L = theta.size
    if g.shape[0] != L or a_resp.shape != (L, L):
        raise ValueError("cascade_matrix: dimension mismatch")
    x = theta[:, None] * a_resp * theta.conj()[None, :]
    return eta * (g.conj().T @ x @ g)


def mvdr_weight(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    vx = v @ np.asarray(x).reshape(-1, 1)
    nrm = np.linalg.norm(vx)
    if nrm == 0:
        raise DegenerateEchoError("V x = 0: no echo energy reaches the receiver")
    return vx / nrm


def mvdr_snr(v: np.ndarray, x: np.ndarray, w: np.ndarray, sigma2_r: float) -> float:
    """Instantaneous output SNR ``|w^H V x|^2 / (sigma_r^2 w^H w)``."""
    x = np.asarray(x).reshape(-1, 1)
    num = abs((w.conj().T @ v @ x).item()) ** 2
    return num / (sigma2_r * float(np.real(w.conj().T @ w).item()))


def radar_snr(v: np.ndarray, beams, sigma2_r: float) -> float:
    """Average MVDR output SNR ``sum_k ||V B_k||_F^2 / sigma_r^2``."""
    total = sum(np.vdot(vb, vb).real for vb in (v @ b for b in beams))
    return float(total) / sigma2_r


def transmit_covariance(beams) -> np.ndarray:
    return sum(b @ b.conj().T for b in beams)


def beampattern(theta_grid, phase: np.ndarray, g: np.ndarray, beams,
                spacing_ratio: float = 0.5, normalized: bool = False) -> np.ndarray:
    """Data-averaged RIS beampattern ``a^H Theta^H G R_x G^H Theta a``.

    ``R_x = sum_k B_k B_k^H`` replaces the instantaneous ``x x^H``.
    """
    theta_grid = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    if theta_grid.size == 0:
        raise ValueError("beampattern: empty angle grid")
    phase = np.asarray(phase).ravel()
    a = steering_matrix(theta_grid, phase.size, spacing_ratio)
    # rows of f are (Theta^H G)^H a(theta) = G^H Theta a(theta)
    f = g.conj().T @ (phase[:, None] * a)
    r = transmit_covariance(beams)
    p = np.real(np.einsum("in,ij,jn->n", f.conj(), r, f))
    p = np.maximum(p, 0.0)
    if normalized:
        peak = p.max()
        if peak > 0:
            p = p / peak
    return p


def mainlobe_width_3db(theta_grid_deg: np.ndarray, pattern: np.ndarray) -> float:
    """Width (deg) of the contiguous region around the peak above half power."""
    p = np.asarray(pattern, dtype=float)
    i = int(np.argmax(p))
    half = 0.5 * p[i]
    lo = i
    while lo > 0 and p[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < p.size - 1 and p[hi + 1] >= half:
        hi += 1
    return float(theta_grid_deg[hi] - theta_grid_deg[lo])


def peak_to_sidelobe_db(theta_grid_deg: np.ndarray, pattern: np.ndarray) -> float:
    """Peak over the strongest value outside the main lobe (first nulls), in dB."""
    p = np.asarray(pattern, dtype=float)
    i = int(np.argmax(p))
    lo = i
    while lo > 0 and p[lo - 1] <= p[lo]:
        lo -= 1
    hi = i
    while hi < p.size - 1 and p[hi + 1] <= p[hi]:
        hi += 1
    side = np.concatenate([p[:lo], p[hi + 1:]])
    if side.size == 0 or side.max() <= 0:
        return float("inf")
    return float(10.0 * np.log10(p[i] / side.max()))
