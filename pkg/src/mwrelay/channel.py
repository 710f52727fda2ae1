"""
Channel model, pilot training and MMSE channel estimation.

Everything here is linear scale. dB values are converted once, at the CLI
boundary (see :mod:`mwrelay.config`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """Invalid system or experiment configuration.

    ``key`` names the offending parameter when there is one.
    """

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class SystemParams:
    """Scalar constants of one multi-way relaying system.

    Parameters
    ----------
    M : int
        Number of relay antennas.
    K : int
        Number of single-antenna users.
    T : int
        Coherence interval length in symbols.
    tau : int
        Pilot length in symbols.
    P_p, P_u, P_r : float
        Pilot symbol power, per-user data power and relay power budget
        (all linear, noise variance normalised to one).
    """

    M: int
    K: int
    T: int
    tau: int
    P_p: float
    P_u: float
    P_r: float

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M}", "M")
        if int(self.K) != self.K or self.K < 2:
            raise ConfigError(f"K must be an integer >= 2, got {self.K}", "K")
        if int(self.T) != self.T or self.T < 1:
            raise ConfigError(f"T must be a positive integer, got {self.T}", "T")
        if int(self.tau) != self.tau or self.tau < self.K:
            raise ConfigError(
                f"tau must be an integer >= K={self.K}, got {self.tau}", "tau")
        if self.tau > self.T:
            raise ConfigError(
                f"tau must not exceed T={self.T}, got {self.tau}", "tau")
        for key in ("P_p", "P_r"):
            if not getattr(self, key) > 0:
                raise ConfigError(
                    f"{key} must be positive, got {getattr(self, key)}", key)
        # zero user power is allowed here for noise-only checks; the config
        # layer still rejects it
        if not self.P_u >= 0:
            raise ConfigError(f"P_u must be nonnegative, got {self.P_u}", "P_u")

    def replace(self, **changes) -> "SystemParams":
        values = {k: getattr(self, k)
                  for k in ("M", "K", "T", "tau", "P_p", "P_u", "P_r")}
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class FadingProfile:
    """Large-scale gains and the MMSE estimate/error variances per user."""

    beta: np.ndarray
    sigma2: np.ndarray
    sigma2_e: np.ndarray

    @property
    def K(self) -> int:
        return len(self.beta)

    def subset(self, users) -> "FadingProfile":
        idx = np.asarray(users)
        return FadingProfile(self.beta[idx], self.sigma2[idx], self.sigma2_e[idx])


@dataclass(frozen=True)
class PilotBook:
    """Orthonormal pilot sequences, one per column of ``Phi`` (tau x K)."""

    Phi: np.ndarray

    @property
    def tau(self) -> int:
        return self.Phi.shape[0]

    @property
    def K(self) -> int:
        return self.Phi.shape[1]


@dataclass(frozen=True)
class ChannelRealization:
    """True channel, its MMSE estimate and the estimation error (all M x K)."""

    G: np.ndarray
    G_hat: np.ndarray
    E: np.ndarray
    profile: FadingProfile


@dataclass(frozen=True)
class CellGeometry:
    """Disk cell with the relay at the centre.

    ``D_d`` is the disk diameter and ``d_0`` the reference distance (metres),
    ``nu`` the path-loss exponent and ``sigma_z_dB`` the shadowing standard
    deviation in dB.
    """

    D_d: float = 1000.0
    d_0: float = 200.0
    nu: float = 4.0
    sigma_z_dB: float = 8.0

    def __post_init__(self):
        for key in ("D_d", "d_0", "nu"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive", key)
        if self.sigma_z_dB < 0:
            raise ConfigError("sigma_z_dB must be nonnegative", "sigma_z_dB")


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples: real and imaginary parts are N(0, 1/2)."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def make_pilot_book(tau: int, K: int) -> PilotBook:
    """First ``K`` columns of the unitary ``tau``-point DFT matrix."""
    if K > tau:
        raise ConfigError(f"tau={tau} is shorter than the number of users K={K}",
                          "tau")
    n = np.arange(tau)[:, None]
    k = np.arange(K)[None, :]
    Phi = np.exp(-2j * np.pi * n * k / tau) / np.sqrt(tau)
    return PilotBook(Phi)


def estimation_moments(beta, tau: int, P_p: float) -> FadingProfile:
    """Variances of the MMSE estimate and of its error for each user."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta <= 0):
        raise ConfigError("large-scale gains must be positive", "beta")
    snr = tau * P_p
    sigma2 = snr * beta ** 2 / (snr * beta + 1.0)
    return FadingProfile(beta, sigma2, beta - sigma2)


def large_scale_gain(d, geom: CellGeometry, shadow_dB=0.0) -> np.ndarray:
    """Path loss with log-normal shadowing for users at distance ``d``."""
    z = 10.0 ** (np.asarray(shadow_dB, dtype=float) / 10.0)
    return z / (1.0 + (np.asarray(d, dtype=float) / geom.d_0) ** geom.nu)


def draw_user_drop(geom: CellGeometry, K: int, rng: np.random.Generator) -> np.ndarray:
    """Drop ``K`` users uniformly in the disk and return their gains."""
    radius = 0.5 * geom.D_d
    d = radius * np.sqrt(rng.random(K))
    # angle is irrelevant to the gain but drawn so drops consume a fixed
    # amount of the stream
    rng.random(K)
    x = rng.standard_normal(K) * geom.sigma_z_dB
    return large_scale_gain(d, geom, x)


def draw_channel(params: SystemParams, beta, rng: np.random.Generator) -> np.ndarray:
    """M x K Rayleigh channel with column k scaled by sqrt(beta_k)."""
    beta = np.asarray(beta, dtype=float)
    return crandn(rng, (params.M, params.K)) * np.sqrt(beta)


def mmse_from_pilots(Y_p, beta, params: SystemParams, pilots: PilotBook) -> np.ndarray:
    """MMSE estimate of G from the received pilot block ``Y_p`` (M x tau)."""
    snr = params.tau * params.P_p
    D_tilde = 1.0 / (1.0 / (np.asarray(beta, dtype=float) * snr) + 1.0)
    return (Y_p @ pilots.Phi) * (D_tilde / np.sqrt(snr))


def mmse_shortcut(G, N_tilde, beta, params: SystemParams) -> np.ndarray:
    """Same estimate written with the despread noise ``N_tilde = N_p Phi``."""
    snr = params.tau * params.P_p
    D_tilde = 1.0 / (1.0 / (np.asarray(beta, dtype=float) * snr) + 1.0)
    return (G + N_tilde / np.sqrt(snr)) * D_tilde


def mmse_estimate(G, beta, params: SystemParams, pilots: PilotBook,
                  rng: np.random.Generator) -> ChannelRealization:
    """Transmit pilots over ``G``, add CN(0,1) noise and estimate the channel."""
    if pilots.K != params.K or pilots.tau != params.tau:
        raise ConfigError("pilot book does not match (tau, K)", "tau")
    snr = params.tau * params.P_p
    N_p = crandn(rng, (params.M, params.tau))
    Y_p = np.sqrt(snr) * G @ pilots.Phi.conj().T + N_p
    G_hat = mmse_from_pilots(Y_p, beta, params, pilots)
    profile = estimation_moments(beta, params.tau, params.P_p)
    return ChannelRealization(G, G_hat, G - G_hat, profile)
