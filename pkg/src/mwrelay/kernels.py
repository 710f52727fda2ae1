"""
Per-trial Monte-Carlo statistics, numba and numpy implementations.

Every statistic is reduced to K x K Gram matrices,

    C = Gh^H G,   R = Gh^H Gh,

so the M x M relay matrices are never formed. With ``Cs[j, i] = C[j+t, i]``
and ``Rs[j, l] = R[j+t, l+t]``:

    g_k^T a_i       = sum_j C[j, k] Cs[j, i]
    ||g_k^T B||^2   = sum_{j,l} C[j, k] conj(C[l, k]) Rs[j, l]
    ||B g_i||^2     = sum_{j,l} Cs[j, i] conj(Cs[l, i]) R[j, l]
    ||B||_F^2       = sum_{j,l} R[l, j] Rs[l, j]
    ||s_R||^2       = alpha z^H conj(R) z,   z_k = (Gh^H y_R)_{k+t}

Random draws happen outside the kernels so both paths see identical inputs.
The numba kernel forms the Gram matrices with explicit loops for small
problems and with BLAS products above ``BLAS_MIN_SIZE``.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# above this M*K the numba kernel forms the Gram matrices with BLAS
BLAS_MIN_SIZE = 160


def trial_stats_numpy(G_hat, G, x, noise, t, alpha, P_u):
    """Vectorised over the leading trial axis.

    Returns ``(desired, iu, an, pA, pB, ps)``: the complex desired gain
    ``g_k^T a_{k+t}`` and the interference and amplified-noise powers per
    user (n x K), then ``||A||_F^2``, ``||B||_F^2`` and ``||s_R||^2`` (n,).
    """
    K = G.shape[2]
    GhH = np.conj(np.swapaxes(G_hat, 1, 2))
    C = GhH @ G
    R = GhH @ G_hat
    Cs = np.roll(C, -t, axis=1)
    Rs = np.roll(np.roll(R, -t, axis=1), -t, axis=2)

    X = np.swapaxes(C, 1, 2) @ Cs
    users = np.arange(K)
    desired = X[:, users, (users + t) % K]
    iu = np.sum(np.abs(X) ** 2, axis=2) - np.abs(desired) ** 2
    an = np.einsum("njk,njl,nlk->nk", C, Rs, np.conj(C)).real
    pA = np.einsum("nji,njl,nli->n", Cs, R, np.conj(Cs)).real
    pB = np.einsum("nlj,nlj->n", R, Rs).real

    y_tilde = np.sqrt(P_u) * np.einsum("njk,nk->nj", C, x) + np.einsum("njm,nm->nj", GhH, noise)
    z = np.roll(y_tilde, -t, axis=1)
    ps = alpha * np.einsum("nj,njl,nl->n", np.conj(z), np.conj(R), z).real
    return desired, iu, an, pA, pB, ps


@njit
def _trial_stats_loop(G_hat, G, x, noise, t, alpha, P_u):
    n, M, K = G.shape
    desired = np.empty((n, K), dtype=np.complex128)
    iu = np.empty((n, K))
    an = np.empty((n, K))
    pA = np.empty(n)
    pB = np.empty(n)
    ps = np.empty(n)
    sqrt_pu = np.sqrt(P_u)
    use_blas = M * K > BLAS_MIN_SIZE
    for trial in range(n):
        if use_blas:
            GhH = np.ascontiguousarray(np.conj(G_hat[trial]).T)
            C = GhH @ G[trial]
            R = GhH @ G_hat[trial]
            y_tilde = GhH @ noise[trial]
        else:
            # small problems: plain loops beat the BLAS call overhead
            C = np.zeros((K, K), dtype=np.complex128)
            R = np.zeros((K, K), dtype=np.complex128)
            y_tilde = np.zeros(K, dtype=np.complex128)
            for m in range(M):
                nm = noise[trial, m]
                for j in range(K):
                    gh = np.conj(G_hat[trial, m, j])
                    y_tilde[j] += gh * nm
                    for k in range(K):
                        C[j, k] += gh * G[trial, m, k]
                    for k in range(j, K):
                        R[j, k] += gh * G_hat[trial, m, k]
            for j in range(K):
                for k in range(j):
                    R[j, k] = np.conj(R[k, j])
        for j in range(K):
            acc = 0j
            for k in range(K):
                acc += C[j, k] * x[trial, k]
            y_tilde[j] += sqrt_pu * acc

        for k in range(K):
            total = 0.0
            for i in range(K):
                acc = 0j
                for j in range(K):
                    acc += C[j, k] * C[(j + t) % K, i]
                if i == (k + t) % K:
                    desired[trial, k] = acc
                else:
                    total += acc.real * acc.real + acc.imag * acc.imag
            iu[trial, k] = total
            acc = 0j
            for j in range(K):
                for l in range(K):
                    acc += C[j, k] * np.conj(C[l, k]) * R[(j + t) % K, (l + t) % K]
            an[trial, k] = acc.real

        acc_a = 0j
        for i in range(K):
            for j in range(K):
                for l in range(K):
                    acc_a += C[(j + t) % K, i] * R[j, l] * np.conj(C[(l + t) % K, i])
        pA[trial] = acc_a.real
        acc_b = 0j
        for l in range(K):
            for j in range(K):
                acc_b += R[l, j] * R[(l + t) % K, (j + t) % K]
        pB[trial] = acc_b.real
        acc_s = 0j
        for j in range(K):
            for l in range(K):
                acc_s += np.conj(y_tilde[(j + t) % K]) * np.conj(R[j, l]) * y_tilde[(l + t) % K]
        ps[trial] = alpha * acc_s.real
    return desired, iu, an, pA, pB, ps


def trial_stats_numba(G_hat, G, x, noise, t, alpha, P_u):
    return _trial_stats_loop(np.ascontiguousarray(G_hat), np.ascontiguousarray(G),
                             np.ascontiguousarray(x), np.ascontiguousarray(noise),
                             int(t), float(alpha), float(P_u))


trial_stats = trial_stats_numba if USE_NUMBA else trial_stats_numpy
