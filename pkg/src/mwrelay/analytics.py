"""
Closed-form spectral efficiency of multi-way massive MIMO relaying with
maximum-ratio combining/transmission and MMSE channel estimates.

Two forms are available everywhere a moment is evaluated:

``form="reference"``
    The reference closed-form expressions. They treat the cyclic neighbours
    ``k - t``, ``k``, ``k + t`` as distinct users, so they are exact only when
    that holds, and their inter-user interference term is inexact at finite
    M even then.
``form="exact"``
    Finite-M moments that are exact for every ``M >= 1`` and every
    ``K >= 2``, including the involutive slots (``2t = 0 mod K``, e.g. K=2)
    where the permuted Gram matrix is complex-symmetric and extra Wick
    pairings survive.

All user indices are cyclic modulo K. Broadcast slot ``t`` serves user
``k`` with the symbol of user ``k + t``; the slot-1 formulas are applied
to slot ``t`` by relabelling every ``+1``/``-1`` neighbour to ``+t``/``-t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ConfigError, FadingProfile, SystemParams

FORMS = ("reference", "exact")


@dataclass(frozen=True)
class ClosedFormTerms:
    """Moments entering the SINR of user ``k`` in one broadcast slot.

    ``a_ki``, ``b_ki`` and ``c_ki`` hold the coefficient for every
    interferer ``i`` (length K). ``iu`` and ``an`` already carry the
    normalisation factor, ``var`` and ``desired`` do not.
    """

    k: int
    a_ki: np.ndarray
    b_ki: np.ndarray
    c_ki: np.ndarray
    mean: float
    desired: float
    var: float
    iu: float
    an: float


@dataclass(frozen=True)
class ClosedFormReport:
    alpha1: float
    terms: list
    sinr: np.ndarray
    se: np.ndarray
    se_sum: float
    prelog: float
    form: str = "reference"


@dataclass(frozen=True)
class AsymptoticLimits:
    """Per-user large-M limits of the SE under the three power scalings."""

    se_user_scaled: np.ndarray
    se_relay_scaled: np.ndarray
    se_both_scaled: np.ndarray
    xi: float


def _check(params: SystemParams, profile: FadingProfile, t: int, form: str):
    if form not in FORMS:
        raise ConfigError(f"form must be one of {FORMS}, got {form!r}", "form")
    if profile.K != params.K:
        raise ConfigError(
            f"profile has {profile.K} users but K={params.K}", "K")
    if not 1 <= t <= params.K - 1:
        raise ConfigError(f"slot t must be in [1, K-1], got {t}", "t")


def _is_involution(K: int, t: int) -> bool:
    return (2 * t) % K == 0


def _neighbours(x: np.ndarray, t: int):
    """(x_{k+t}, x_{k-t}) for every k."""
    return np.roll(x, -t), np.roll(x, t)


def prelog(params: SystemParams) -> float:
    """Training overhead times the K-1 useful slots out of K."""
    return (params.T - params.tau) / params.T * (params.K - 1) / params.K


def _cyclic_sum(s: np.ndarray, t: int) -> float:
    return float(np.sum(s * np.roll(s, -t)))


def _alpha_denominator(params: SystemParams, profile: FadingProfile,
                       t: int, form: str) -> float:
    M, P_u = params.M, params.P_u
    s, beta = profile.sigma2, profile.beta
    s_next, s_prev = _neighbours(s, t)
    S = _cyclic_sum(s, t)
    den = (M ** 3 * P_u * np.sum(s_prev * s ** 2)
           + M ** 2 * S * (P_u * np.sum(beta) + 1.0)
           + M * P_u * np.sum(s ** 2 * s_next))
    if form == "exact" and _is_involution(params.K, t):
        den += (P_u * (2 * M ** 2 * np.sum(s ** 2 * s_next) + M * S * np.sum(beta))
                + M * S)
    return float(den)


def alpha1_closed_form(params: SystemParams, profile: FadingProfile,
                       t: int = 1, form: str = "reference") -> float:
    """Relay normalisation meeting the long-term power budget ``P_r``."""
    _check(params, profile, t, form)
    return params.P_r / _alpha_denominator(params, profile, t, form)


def _coefficients(params, profile, t):
    s, beta = profile.sigma2, profile.beta
    s_next, s_prev = _neighbours(s, t)
    S = _cyclic_sum(s, t)
    a = np.outer(s ** 2 * s_next, beta) + np.outer(beta, s ** 2 * s_prev)
    b = np.outer(beta, beta) * S
    c = np.outer(s ** 2 * s_prev, beta) + np.outer(beta, s ** 2 * s_next)
    return a, b, c


def _second_moments(params, profile, t, form):
    """E|g_k^T a_i|^2 for all (k, i), and the mean of the desired gain."""
    M, K = params.M, params.K
    s, beta = profile.sigma2, profile.beta
    s_next, s_prev = _neighbours(s, t)
    S = _cyclic_sum(s, t)
    a, b, c = _coefficients(params, profile, t)
    F = M ** 3 * a + M ** 2 * b + M * c
    users = np.arange(K)
    nxt = (users + t) % K
    prv = (users - t) % K
    mean = M ** 2 * s * s_next
    if form == "reference":
        return F, mean

    E2 = F.copy()
    E2[users, nxt] += M ** 4 * s ** 2 * s_next ** 2
    E2[users, prv] += M ** 2 * s_prev ** 2 * s ** 2
    E2[users, users] += 2 * M ** 2 * beta * s ** 2 * (s_next + s_prev) + M * beta ** 2 * S
    if _is_involution(K, t):
        E2 += (2 * M ** 2 * (np.outer(beta, s ** 2 * s_next)
                             + np.outer(s ** 2 * s_next, beta))
               + M * S * np.outer(beta, beta))
        E2[users, users] += (2 * M ** 3 * beta * s ** 2 * s_next
                             + M ** 2 * beta ** 2 * S
                             + 2 * M * beta * s ** 2 * s_next)
        E2[users, nxt] += 2 * M ** 3 * s ** 2 * s_next ** 2
        mean = mean + M * s * s_next
    return E2, mean


def _all_terms(params: SystemParams, profile: FadingProfile, t: int, form: str):
    M, K, P_u = params.M, params.K, params.P_u
    s, beta = profile.sigma2, profile.beta
    s_next, s_prev = _neighbours(s, t)
    S = _cyclic_sum(s, t)
    alpha = params.P_r / _alpha_denominator(params, profile, t, form)
    a, b, c = _coefficients(params, profile, t)
    E2, mean = _second_moments(params, profile, t, form)
    users = np.arange(K)
    nxt = (users + t) % K
    interferers = E2.sum(axis=1) - E2[users, nxt]

    if form == "reference":
        var = E2[users, nxt]
        iu = alpha * P_u * (
            interferers
            + M ** 2 * s_prev ** 2 * s ** 2
            + M * (2 * s ** 3 * s_next + 2 * s ** 3 * s_prev
                   + (2 * s ** 2 + beta ** 2 - 2 * beta * s) * 2 * S))
        an = alpha * (M ** 3 * s ** 2 * s_next + M ** 2 * beta * S)
    else:
        var = E2[users, nxt] - mean ** 2
        iu = alpha * P_u * interferers
        an_moment = M ** 3 * s ** 2 * s_next + M ** 2 * beta * S + M * s ** 2 * s_prev
        if _is_involution(K, t):
            an_moment = an_moment + 2 * M ** 2 * s ** 2 * s_next + M * beta * S
        an = alpha * an_moment

    terms = [ClosedFormTerms(k=int(k), a_ki=a[k], b_ki=b[k], c_ki=c[k],
                             mean=float(mean[k]), desired=float(mean[k] ** 2),
                             var=float(var[k]), iu=float(iu[k]), an=float(an[k]))
             for k in users]
    sinr = alpha * P_u * mean ** 2 / (alpha * P_u * var + iu + an + 1.0)
    return alpha, terms, sinr


def closed_form_terms(params: SystemParams, profile: FadingProfile, k: int,
                      t: int = 1, form: str = "reference") -> ClosedFormTerms:
    """Variance, interference and amplified-noise terms for user ``k``."""
    _check(params, profile, t, form)
    return _all_terms(params, profile, t, form)[1][k % params.K]


def sinr_all(params: SystemParams, profile: FadingProfile, t: int = 1,
             form: str = "reference") -> np.ndarray:
    _check(params, profile, t, form)
    return _all_terms(params, profile, t, form)[2]


def sinr_k(params: SystemParams, profile: FadingProfile, k: int, t: int = 1,
           form: str = "reference") -> float:
    """SINR of user ``k`` decoding user ``k + t`` in broadcast slot ``t``."""
    return float(sinr_all(params, profile, t, form)[k % params.K])


def se_per_user(params: SystemParams, profile: FadingProfile, t: int = 1,
                form: str = "reference") -> ClosedFormReport:
    """Per-user and sum spectral efficiency in bit/s/Hz."""
    _check(params, profile, t, form)
    alpha, terms, sinr = _all_terms(params, profile, t, form)
    pl = prelog(params)
    se = pl * np.log2(1.0 + sinr)
    return ClosedFormReport(alpha1=float(alpha), terms=terms, sinr=sinr, se=se,
                            se_sum=float(np.sum(se)), prelog=pl, form=form)


def se_sum(params: SystemParams, profile: FadingProfile, form: str = "reference") -> float:
    _check(params, profile, 1, form)
    sinr = _all_terms(params, profile, 1, form)[2]
    # summed per user so that K=2 matches the two-way sum bit for bit
    return float(np.sum(prelog(params) * np.log2(1.0 + sinr)))


def asymptotic_limits(params: SystemParams, profile: FadingProfile,
                      E_u: float, E_r: float) -> AsymptoticLimits:
    """Large-M SE limits when user and/or relay power fall as 1/M.

    ``profile`` must come from the unscaled pilot power; pilots are not
    scaled with M.
    """
    s = profile.sigma2
    s_next, s_prev = _neighbours(s, 1)
    pl = prelog(params)
    user = pl * np.log2(1.0 + E_u * s_next)
    relay = pl * np.log2(1.0 + E_r * s ** 2 * s_next ** 2 / np.sum(s_prev * s ** 2))
    xi = E_r / np.sum(E_u * s_prev * s ** 2 + s * s_next)
    both = pl * np.log2(1.0 + xi * E_u * s ** 2 * s_next ** 2
                        / (xi * s ** 2 * s_next + 1.0))
    return AsymptoticLimits(user, relay, both, float(xi))


def cyclic_partners(K: int) -> np.ndarray:
    """Default two-way partner of each user: its cyclic successor."""
    return (np.arange(K) + 1) % K


def two_way_se(params: SystemParams, profile: FadingProfile, k: int,
               partner: int | None = None, form: str = "reference") -> float:
    """SE of user ``k`` when every pair gets its own two-slot exchange.

    The SINR is that of a two-user system made of ``k`` and ``partner``
    (default ``k + 1``), with the pair's own gains and estimate variances.
    The pre-log spends ``K(K-1)`` slots on ``K - 1`` useful ones.
    """
    K = params.K
    k = k % K
    j = (k + 1) % K if partner is None else partner % K
    if j == k:
        raise ConfigError("a user cannot be paired with itself", "partner")
    pair = params.replace(K=2)
    sub = profile.subset([k, j])
    _check(pair, sub, 1, form)
    gamma = _all_terms(pair, sub, 1, form)[2][0]
    return float((params.T - params.tau) / params.T / K * np.log2(1.0 + gamma))


def two_way_sum_se(params: SystemParams, profile: FadingProfile,
                   partners=None, form: str = "reference") -> float:
    partners = cyclic_partners(params.K) if partners is None else partners
    return float(sum(two_way_se(params, profile, k, partners[k], form)
                     for k in range(params.K)))


def auxiliary_moments(params: SystemParams, profile: FadingProfile,
                            t: int = 1, form: str = "reference") -> dict:
    """Intermediate moments behind the normalisation and the variance.

    Returns per-user arrays ``Q1``, ``Q2``, ``T1`` .. ``T4``, the scalar
    ``Q3`` (identical for every relay antenna ``m``) and ``mean``::

        Q1_k = E||[Gh* P Gh^H Gh]_k||^2      T1_k = E|gh_k^T B gh_{k+t}|^2
        Q2_k = E||[Gh* P Gh^H E]_k||^2       T2_k = E|gh_k^T B e_{k+t}|^2
        Q3_m = E||[Gh* P Gh^H]_m||^2         T3_k = E|e_k^T B gh_{k+t}|^2
                                             T4_k = E|e_k^T B e_{k+t}|^2

    with ``B = Gh* P Gh^H`` and ``P`` the slot-``t`` permutation.
    """
    _check(params, profile, t, form)
    M = params.M
    s, se = profile.sigma2, profile.sigma2_e
    s_next, s_prev = _neighbours(s, t)
    se_next = np.roll(se, -t)
    s_next2 = np.roll(s, -2 * t)
    S = _cyclic_sum(s, t)

    Q1 = M ** 3 * s_prev * s ** 2 + M * s ** 2 * s_next + M ** 2 * s * S
    Q2 = M ** 2 * se * S
    Q3 = M * S
    T1 = (M ** 3 * (M + 2) * s ** 2 * s_next ** 2 + M * s_prev * s ** 2 * s_next
          + M * s * s_next ** 2 * s_next2 + M ** 2 * s * s_next * S)
    T2 = (M ** 3 * se_next * s ** 2 * s_next + M * se_next * s_prev * s ** 2
          + M ** 2 * s * se_next * S)
    T3 = (M ** 3 * se * s * s_next ** 2 + M * se * s_next ** 2 * s_next2
          + M ** 2 * se * s_next * S)
    T4 = M ** 2 * se * se_next * S
    mean = M ** 2 * s * s_next

    if form == "exact" and _is_involution(params.K, t):
        Q1 = Q1 + 2 * M ** 2 * s ** 2 * s_next + M * s * S
        Q2 = Q2 + M * se * S
        Q3 = Q3 + S
        T1 = T1 + (2 * M ** 3 + 5 * M ** 2) * s ** 2 * s_next ** 2 + M * s * s_next * S
        T2 = T2 + 2 * M ** 2 * se_next * s ** 2 * s_next + M * se_next * s * S
        T3 = T3 + 2 * M ** 2 * se * s * s_next ** 2 + M * se * s_next * S
        T4 = T4 + M * se * se_next * S
        mean = mean + M * s * s_next

    return {"Q1": Q1, "Q2": Q2, "Q3": float(Q3),
            "T1": T1, "T2": T2, "T3": T3, "T4": T4, "mean": mean}
