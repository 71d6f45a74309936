"""Channel realizations and array responses for the RIS-aided DFRC scenario.

All small-scale fading draws go through :class:`RngStream`, which derives
independent numpy ``Generator`` streams from a 64-bit seed plus string labels.
The same (seed, labels) pair reproduces the same draws on every platform
because numpy's ``SeedSequence``/``PCG64`` are fully specified.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import hermitian_part


@dataclass(frozen=True)
class ScenarioGeometry:
    bs_pos: tuple[float, float] = (0.0, 0.0)
    ris_pos: tuple[float, float] = (15.0, 0.0)
    target_angle_deg: float = -20.0
    target_distance: float = 5.0
    cu_center: tuple[float, float] = (0.0, 100.0)
    cu_radius: float = 5.0
    # array broadside directions (degrees from +x); they only set the LoS
    # angles of the BS-RIS link
    bs_broadside_deg: float = 0.0
    ris_broadside_deg: float = 180.0

    def __post_init__(self):
        if self.target_distance <= 0:
            raise ValueError("target_distance must be positive")
        if self.cu_radius < 0:
            raise ValueError("cu_radius must be non-negative")

    @property
    def target_angle(self) -> float:
        return math.radians(self.target_angle_deg)


@dataclass(frozen=True)
class PathLossModel:
    pl0_db: float = -30.0
    d0: float = 1.0
    alpha_bi: float = 2.2
    alpha_iu: float = 2.2
    alpha_bu: float = 3.75

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        for name in ("alpha_bi", "alpha_iu", "alpha_bu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ChannelSet:
    """One realization of every channel in the scenario.

    ``a_resp`` is the unscaled target response ``a(theta0) a(theta0)^H``;
    the radar gain ``eta`` is kept separately.
    """

    g: np.ndarray
    h_bu: list[np.ndarray]
    h_ru: list[np.ndarray]
    a_resp: np.ndarray
    eta: complex
    sigma2: float
    sigma2_r: float
    cu_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def n_users(self) -> int:
        return len(self.h_bu)

    @property
    def n_elements(self) -> int:
        return self.g.shape[0]

    @property
    def n_tx(self) -> int:
        return self.g.shape[1]

    def a_resp_scaled(self) -> np.ndarray:
        """Target response with the radar gain folded in as ``|eta| A``.

        The radar SNR is quartic in ``A`` and carries ``|eta|^2``, so scaling
        ``A`` by ``|eta|`` makes both SNR routes agree.
        """
        return abs(self.eta) * self.a_resp


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


class RngStream:
    """Seeded random stream with reproducible, label-addressed sub-streams.

    ``RngStream(seed).child("g")`` always yields the same PCG64 generator,
    independent of how many draws were made on the parent or its siblings.
    """

    def __init__(self, seed: int, labels: Sequence[str] = ()):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.labels = tuple(labels)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(_label_key(s) for s in self.labels))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, label: str) -> "RngStream":
        return RngStream(self.seed, self.labels + (label,))

    def cn(self, shape) -> np.ndarray:
        """Circularly-symmetric complex Gaussian draws with unit variance."""
        g = self.generator
        return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / math.sqrt(2.0)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, labels={self.labels!r})"


def path_loss_db(d: float, alpha: float, model: PathLossModel) -> float:
    """Large-scale path loss ``PL0 - 10 alpha log10(d / d0)`` in dB."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return model.pl0_db - 10.0 * alpha * math.log10(d / model.d0)


def db_to_amplitude(pl_db: float) -> float:
    return 10.0 ** (pl_db / 20.0)


def steering(theta: float, n: int, spacing_ratio: float = 0.5) -> np.ndarray:
    """ULA response; element ``i`` is ``exp(-j 2 pi (d/lambda) i sin theta)``."""
    if n < 1:
        raise ValueError("steering vector needs n >= 1")
    i = np.arange(n)
    return np.exp(-2j * np.pi * spacing_ratio * i * np.sin(theta)).reshape(n, 1)


def steering_matrix(thetas: np.ndarray, n: int, spacing_ratio: float = 0.5) -> np.ndarray:
    """Steering vectors for many angles stacked as columns (``n x len(thetas)``)."""
    thetas = np.asarray(thetas, dtype=float).ravel()
    i = np.arange(n)[:, None]
    return np.exp(-2j * np.pi * spacing_ratio * i * np.sin(thetas)[None, :])


def target_response(theta0: float, n: int, spacing_ratio: float = 0.5) -> np.ndarray:
    a = steering(theta0, n, spacing_ratio)
    return a @ a.conj().T


def gen_rician(rows: int, cols: int, k_factor: float, aoa: float, aod: float,
               gain_linear: float, rng: RngStream, spacing_ratio: float = 0.5) -> np.ndarray:
    if k_factor < 0:
        raise ValueError("Rician factor must be non-negative")
    los = steering(aoa, rows, spacing_ratio) @ steering(aod, cols, spacing_ratio).conj().T
    nlos = rng.cn((rows, cols))
    return gain_linear * (math.sqrt(k_factor / (1.0 + k_factor)) * los
                          + math.sqrt(1.0 / (1.0 + k_factor)) * nlos)


def gen_rayleigh(rows: int, cols: int, gain_linear: float, rng: RngStream) -> np.ndarray:
    return gain_linear * rng.cn((rows, cols))


def effective_channel(h_bu: np.ndarray, h_ru: np.ndarray, theta: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``H_bu + H_ru Theta^H G`` with ``Theta = Diag(theta)``."""
    theta = np.asarray(theta).ravel()
    if h_ru.shape[1] != theta.size or g.shape[0] != theta.size:
        raise ValueError("effective_channel: RIS dimension mismatch")
    if h_bu.shape != (h_ru.shape[0], g.shape[1]):
        raise ValueError("effective_channel: BS/CU dimension mismatch")
    return h_bu + (h_ru * theta.conj()[None, :]) @ g


def effective_channels(channels: ChannelSet, theta: np.ndarray) -> list[np.ndarray]:
    return [effective_channel(hb, hr, theta, channels.g) for hb, hr in zip(channels.h_bu, channels.h_ru)]


def noise_power_w(density_dbm_hz: float, bandwidth_hz: float) -> float:
    dbm = density_dbm_hz + 10.0 * math.log10(bandwidth_hz)
    return 10.0 ** ((dbm - 30.0) / 10.0)


def broadside_angle(src, dst, broadside_deg: float) -> float:
    """Signed angle (rad) of the direction ``src -> dst`` from a broadside heading."""
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    b = math.radians(broadside_deg)
    bx, by = math.cos(b), math.sin(b)
    return math.atan2(bx * dy - by * dx, bx * dx + by * dy)


def radar_gain(config) -> complex:
    """Radar round-trip gain ``eta`` for a scenario config.

    An explicit ``config.eta`` wins. Otherwise ``eta_mode`` selects the
    amplitude: ``"fixed"`` takes ``eta_db``; ``"round_trip"`` uses twice the
    RIS-target path loss and ``"one_way"`` uses it once.
    """
    if getattr(config, "eta", None) is not None:
        return complex(config.eta)
    mode = getattr(config, "eta_mode", "fixed")
    if mode == "fixed":
        return complex(db_to_amplitude(config.eta_db))
    geom, pl = config.geometry, config.pathloss
    one_way = path_loss_db(geom.target_distance, pl.alpha_bi, pl)
    if mode == "round_trip":
        return complex(db_to_amplitude(2.0 * one_way))
    if mode == "one_way":
        return complex(db_to_amplitude(one_way))
    raise ValueError(f"unknown eta_mode {mode!r}")


def sample_scenario(config, rng: RngStream) -> ChannelSet:
    """Draw CU positions and all fading channels for one Monte-Carlo trial."""
    geom: ScenarioGeometry = config.geometry
    pl: PathLossModel = config.pathloss
    L, nt, K, mk = config.l_elems, config.n_t, config.k_users, config.m_k
    sr = config.spacing_ratio

    pos_rng = rng.child("cu_positions")
    r = geom.cu_radius * np.sqrt(pos_rng.uniform(size=K))
    phi = pos_rng.uniform(0.0, 2.0 * np.pi, size=K)
    cu = np.column_stack([geom.cu_center[0] + r * np.cos(phi), geom.cu_center[1] + r * np.sin(phi)])

    d_bi = math.dist(geom.bs_pos, geom.ris_pos)
    aod = broadside_angle(geom.bs_pos, geom.ris_pos, geom.bs_broadside_deg)
    aoa = broadside_angle(geom.ris_pos, geom.bs_pos, geom.ris_broadside_deg)
    g = gen_rician(L, nt, config.k_rician, aoa, aod,
                   db_to_amplitude(path_loss_db(d_bi, pl.alpha_bi, pl)), rng.child("g"), sr)

    h_bu, h_ru = [], []
    for k in range(K):
        d_bu = max(math.dist(geom.bs_pos, cu[k]), 1e-9)
        d_iu = max(math.dist(geom.ris_pos, cu[k]), 1e-9)
        h_bu.append(gen_rayleigh(mk, nt, db_to_amplitude(path_loss_db(d_bu, pl.alpha_bu, pl)),
                                 rng.child(f"h_bu/{k}")))
        h_ru.append(gen_rayleigh(mk, L, db_to_amplitude(path_loss_db(d_iu, pl.alpha_iu, pl)),
                                 rng.child(f"h_ru/{k}")))

    sigma2 = noise_power_w(config.noise_density_dbm_hz, config.bandwidth_hz)
    return ChannelSet(
        g=g,
        h_bu=h_bu,
        h_ru=h_ru,
        a_resp=hermitian_part(target_response(geom.target_angle, L, sr)),
        eta=radar_gain(config),
        sigma2=sigma2 if config.sigma2 is None else config.sigma2,
        sigma2_r=sigma2 if config.sigma2_r is None else config.sigma2_r,
        cu_positions=cu,
    )
