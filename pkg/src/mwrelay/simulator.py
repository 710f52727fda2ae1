"""
Monte-Carlo simulation of the pilot -> multiple-access -> broadcast protocol.

Two levels live here. The protocol functions (:func:`draw_trial`,
:func:`ma_phase`, :func:`mr_combine_and_precode`, :func:`bc_receive`) run one
coherence interval with explicit M x M relay matrices and are meant for
inspection and identity checks. :func:`run_trials` is the production engine:
it draws trials in fixed-size blocks and evaluates them with the Gram-matrix
kernels of :mod:`mwrelay.kernels`.

Reproducibility: trial ``i`` belongs to block ``i // block_size`` and every
block draws from its own counter-based Philox stream keyed by ``seed``. Block
results are merged in block order, so the accumulated statistics are
bit-identical for any worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import analytics, kernels
from .channel import (ChannelRealization, ConfigError, FadingProfile, PilotBook,
                      SystemParams, crandn, draw_channel, make_pilot_book,
                      mmse_estimate, mmse_shortcut)

log = logging.getLogger(__name__)

N_BATCHES = 30
MIN_TRIALS = 1000
UNDERSAMPLED_REL = 0.10
_QPSK = np.exp(1j * np.pi * (2 * np.arange(4) + 1) / 4)


def permutation(t: int, K: int) -> np.ndarray:
    """Cyclic shift matrix raised to the ``t``-th power: (P y)_k = y_{k+t}."""
    if t < 1:
        raise ConfigError(f"slot index must be >= 1, got {t}", "t")
    return np.roll(np.eye(K), t, axis=1)


# ---------------------------------------------------------------------------
# one coherence interval, explicit matrices
# ---------------------------------------------------------------------------

@dataclass
class TrialState:
    realization: ChannelRealization
    x: np.ndarray
    n: np.ndarray
    w: np.ndarray
    y_R: np.ndarray | None = None
    y_tilde: np.ndarray | None = None
    s_R: np.ndarray | None = None
    A: np.ndarray | None = None
    B: np.ndarray | None = None


def draw_trial(params: SystemParams, beta, rng: np.random.Generator,
               pilots: PilotBook | None = None) -> TrialState:
    """Fresh channel, pilot-based estimate, QPSK symbols and noises."""
    pilots = make_pilot_book(params.tau, params.K) if pilots is None else pilots
    G = draw_channel(params, beta, rng)
    real = mmse_estimate(G, beta, params, pilots, rng)
    x = _QPSK[rng.integers(0, 4, params.K)]
    n = crandn(rng, params.M)
    w = crandn(rng, params.K)
    return TrialState(real, x, n, w)


def ma_phase(state: TrialState, params: SystemParams) -> np.ndarray:
    """Signal received at the relay when all users transmit at once."""
    G = state.realization.G
    state.y_R = np.sqrt(params.P_u) * G @ state.x + state.n
    return state.y_R


def mr_combine_and_precode(state: TrialState, params: SystemParams, t: int,
                           alpha: float, atol: float = 1e-10) -> np.ndarray:
    """MR-combine ``y_R``, permute for slot ``t`` and MR-precode.

    Also stores ``A = Gh* P Gh^H G`` and ``B = Gh* P Gh^H`` and checks that
    ``s_R = sqrt(P_u alpha) A x + sqrt(alpha) B n``.
    """
    if state.y_R is None:
        ma_phase(state, params)
    G, G_hat = state.realization.G, state.realization.G_hat
    P = permutation(t, params.K)
    state.y_tilde = G_hat.conj().T @ state.y_R
    state.s_R = np.sqrt(alpha) * G_hat.conj() @ (P @ state.y_tilde)
    state.B = G_hat.conj() @ P @ G_hat.conj().T
    state.A = state.B @ G
    expanded = (np.sqrt(params.P_u * alpha) * state.A @ state.x
                + np.sqrt(alpha) * state.B @ state.n)
    scale = max(1.0, float(np.max(np.abs(state.s_R))))
    if not np.allclose(state.s_R, expanded, rtol=0.0, atol=atol * scale):
        raise AssertionError("relay signal does not match its A/B expansion")
    return state.s_R


def bc_receive(state: TrialState, params: SystemParams) -> np.ndarray:
    """Signals received by the K users in one broadcast slot."""
    if state.s_R is None:
        raise ValueError("relay signal not computed; call mr_combine_and_precode")
    return state.realization.G.T @ state.s_R + state.w


def decompose_received(state: TrialState, params: SystemParams, t: int,
                       alpha: float, mean_gain) -> dict:
    """Split every user's received sample into its named components.

    ``mean_gain`` is E{g_k^T a_{k+t}} per user (e.g. from
    :func:`mwrelay.analytics.auxiliary_moments`). Returns arrays of
    length K: ``desired``, ``uncertainty``, ``interference``, ``noise``
    (amplified relay noise plus local noise) and ``effective`` (the sum of
    the last three).
    """
    K = params.K
    G = state.realization.G
    users = np.arange(K)
    target = (users + t) % K
    X = G.T @ state.A
    gain = X[users, target]
    amp = np.sqrt(alpha * params.P_u)
    desired = amp * mean_gain * state.x[target]
    uncertainty = amp * (gain - mean_gain) * state.x[target]
    interference = amp * (X @ state.x - gain * state.x[target])
    noise = np.sqrt(alpha) * G.T @ state.B @ state.n + state.w
    effective = uncertainty + interference + noise
    return {"desired": desired, "uncertainty": uncertainty,
            "interference": interference, "noise": noise, "effective": effective}


# ---------------------------------------------------------------------------
# batched engine
# ---------------------------------------------------------------------------

def block_size(M: int, K: int) -> int:
    """Trials per RNG block; depends only on the problem size."""
    return int(max(8, min(256, 2 ** 21 // (M * K))))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, 0, int(block)]))


def _draw_block(params: SystemParams, profile: FadingProfile, n: int,
                rng: np.random.Generator):
    M, K = params.M, params.K
    G = crandn(rng, (n, M, K)) * np.sqrt(profile.beta)
    # despread pilot noise N_p Phi is i.i.d. CN(0, 1) for orthonormal pilots
    N_tilde = crandn(rng, (n, M, K))
    G_hat = mmse_shortcut(G, N_tilde, profile.beta, params)
    x = _QPSK[rng.integers(0, 4, (n, K))]
    noise = crandn(rng, (n, M))
    return G_hat, G, x, noise


_STATS = ("d_re", "d_im", "d_abs2", "iu", "an", "pA", "pB", "ps")


def _run_block(params, profile, t, alpha, seed, block, start, stop, n_total):
    rng = block_rng(seed, block)
    n = stop - start
    G_hat, G, x, noise = _draw_block(params, profile, n, rng)
    desired, iu, an, pA, pB, ps = kernels.trial_stats(G_hat, G, x, noise, t, alpha,
                                                      params.P_u)
    batch = np.arange(start, stop) * N_BATCHES // n_total
    K = params.K
    out = np.zeros((len(_STATS), N_BATCHES, K))
    per_trial = (desired.real, desired.imag, np.abs(desired) ** 2, iu, an,
                 np.repeat(pA[:, None], K, axis=1), np.repeat(pB[:, None], K, axis=1),
                 np.repeat(ps[:, None], K, axis=1))
    for s, values in enumerate(per_trial):
        for k in range(K):
            out[s, :, k] = np.bincount(batch, weights=values[:, k], minlength=N_BATCHES)
    return out


@dataclass
class UserStats:
    """Empirical SINR statistics for one user."""

    k: int
    mean_desired: complex
    var_desired: float
    iu_hat: float
    an_hat: float
    sinr_hat: float
    se_hat: float
    half_width: dict
    undersampled: bool


@dataclass
class TrialBatchResult:
    """Sample moments over ``n_trials`` coherence intervals.

    Per-user arrays have length K. ``iu_hat`` and ``an_hat`` include the
    normalisation factor ``alpha`` used for the run; ``alpha_hat`` is the
    empirical normalisation and ``power`` the mean relay transmit power with
    that ``alpha``. ``half_width`` maps each statistic name to its 95%
    batch-means half-width.
    """

    n_trials: int
    t: int
    alpha: float
    mean_desired: np.ndarray
    var_desired: np.ndarray
    e2_desired: np.ndarray
    iu_moment: np.ndarray
    an_moment: np.ndarray
    iu_hat: np.ndarray
    an_hat: np.ndarray
    sinr_hat: np.ndarray
    se_hat: np.ndarray
    se_sum_hat: float
    alpha_hat: float
    power: float
    half_width: dict = field(default_factory=dict)
    undersampled: bool = False

    def user(self, k: int) -> UserStats:
        hw = {name: (float(v[k]) if np.ndim(v) else float(v))
              for name, v in self.half_width.items()}
        return UserStats(k, complex(self.mean_desired[k]), float(self.var_desired[k]),
                         float(self.iu_hat[k]), float(self.an_hat[k]),
                         float(self.sinr_hat[k]), float(self.se_hat[k]), hw,
                         self.undersampled)


def _statistics(sums: np.ndarray, n: np.ndarray, params: SystemParams, alpha: float):
    """Turn accumulated sums (stat, ..., K) over ``n`` trials into statistics."""
    m = {name: sums[i] / n for i, name in enumerate(_STATS)}
    mean = m["d_re"] + 1j * m["d_im"]
    # unbiased sample variance
    var = (m["d_abs2"] - np.abs(mean) ** 2) * n / (n - 1)
    iu = alpha * params.P_u * m["iu"]
    an = alpha * m["an"]
    sinr = alpha * params.P_u * np.abs(mean) ** 2 / (alpha * params.P_u * var + iu + an + 1.0)
    se = analytics.prelog(params) * np.log2(1.0 + sinr)
    se_sum = np.sum(se, axis=-1)
    den = params.P_u * m["pA"][..., 0] + m["pB"][..., 0]
    alpha_hat = params.P_r / den
    return {"mean_abs": np.abs(mean), "mean": mean, "var": var, "e2": m["d_abs2"],
            "iu_moment": m["iu"], "an_moment": m["an"], "iu": iu, "an": an,
            "sinr": sinr, "se": se, "se_sum": se_sum, "alpha_hat": alpha_hat,
            "power": m["ps"][..., 0]}


def run_trials(params: SystemParams, profile: FadingProfile, n_trials: int,
               seed: int = 0, workers: int = 1, t: int = 1,
               alpha: float | None = None, form: str = "reference") -> TrialBatchResult:
    """Simulate ``n_trials`` independent coherence intervals.

    ``alpha`` defaults to the closed-form normalisation of the requested
    ``form``; it scales the relay signal and enters the empirical SINR.
    Statistics are bit-identical for any ``workers`` given the same seed.
    """
    if n_trials < MIN_TRIALS:
        raise ConfigError(f"need at least {MIN_TRIALS} trials, got {n_trials}", "trials")
    if not 1 <= t <= params.K - 1:
        raise ConfigError(f"slot t must be in [1, K-1], got {t}", "t")
    if alpha is None:
        alpha = analytics.alpha1_closed_form(params, profile, t, form)
    bs = block_size(params.M, params.K)
    jobs = [(b, b * bs, min((b + 1) * bs, n_trials))
            for b in range((n_trials + bs - 1) // bs)]

    def work(job):
        b, start, stop = job
        return _run_block(params, profile, t, alpha, seed, b, start, stop, n_trials)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, jobs))
    else:
        parts = [work(job) for job in jobs]
    # merge in block order; batch sums stay per batch
    batch_sums = parts[0].copy()
    for p in parts[1:]:
        batch_sums += p
    counts = np.bincount(np.arange(n_trials) * N_BATCHES // n_trials,
                         minlength=N_BATCHES).astype(float)

    total = _statistics(batch_sums.sum(axis=1), float(n_trials), params, alpha)
    per_batch = _statistics(batch_sums, counts[:, None], params, alpha)
    q = stats.t.ppf(0.975, N_BATCHES - 1)
    half = {name: q * np.std(per_batch[name], axis=0, ddof=1) / np.sqrt(N_BATCHES)
            for name in ("mean_abs", "var", "iu", "an", "sinr", "se",
                         "se_sum", "alpha_hat", "power", "iu_moment", "an_moment", "e2")}

    undersampled = False
    for name in ("mean_abs", "var", "iu", "an", "sinr"):
        value = np.abs(total[name])
        nonzero = value > 0
        if np.any(half[name][nonzero] > UNDERSAMPLED_REL * value[nonzero]):
            undersampled = True
    if undersampled:
        log.warning("undersampled: a 95%% half-width exceeds %d%% of its statistic "
                    "(n_trials=%d)", int(100 * UNDERSAMPLED_REL), n_trials)

    return TrialBatchResult(
        n_trials=n_trials, t=t, alpha=float(alpha),
        mean_desired=total["mean"], var_desired=total["var"], e2_desired=total["e2"],
        iu_moment=total["iu_moment"], an_moment=total["an_moment"],
        iu_hat=total["iu"], an_hat=total["an"], sinr_hat=total["sinr"],
        se_hat=total["se"], se_sum_hat=float(total["se_sum"]), alpha_hat=float(total["alpha_hat"]),
        power=float(total["power"]), half_width=half, undersampled=undersampled)


def empirical_alpha(params: SystemParams, profile: FadingProfile, n_trials: int,
                    seed: int = 0, workers: int = 1, t: int = 1) -> float:
    """Normalisation estimated from sample means of ||A||^2 and ||B||^2."""
    return run_trials(params, profile, n_trials, seed, workers, t).alpha_hat


def empirical_sinr(params: SystemParams, profile: FadingProfile, k: int,
                   n_trials: int, seed: int = 0, workers: int = 1, t: int = 1,
                   alpha: float | None = None, form: str = "reference") -> UserStats:
    """Empirical SINR decomposition of user ``k``.

    The desired-gain mean and variance, interference and amplified-noise
    powers are sample means over channel realizations; they are combined
    with ``alpha`` (closed form of ``form`` unless given).
    """
    res = run_trials(params, profile, n_trials, seed, workers, t, alpha, form)
    return res.user(k % params.K)
