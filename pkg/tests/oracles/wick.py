"""
Exact moments of products of complex Gaussian inner products.

Vectors are length-M with i.i.d. CN(0, v) entries and are labelled
``("h", j)`` (estimate of user j, variance sigma2_j), ``("e", j)``
(estimation error, variance sigma2_e_j) or ``("g", j)`` (true channel,
expanded as h + e). An inner product ``(a, b)`` stands for a^H b.

By Isserlis' theorem, E prod_p a_p^H b_p is a sum over bijections pairing
each conjugated factor with an unconjugated factor of the same vector.
Each pairing contributes the product of the variances times M to the
number of index cycles it closes. No sampling is involved, so this is an
independent oracle for the closed forms.
"""

import itertools
from functools import lru_cache

import numpy as np


def _expand(label):
    kind, j = label
    return [("h", j), ("e", j)] if kind == "g" else [label]


@lru_cache(maxsize=None)
def _pairings(n):
    return tuple(itertools.permutations(range(n)))


def _find(parent, x):
    while parent[x] != x:
        x = parent[x]
    return x


def expect_product(products, var, M):
    """E of prod over ``products`` [(a, b), ...] of a^H b."""
    n = len(products)
    options = [[(a, b) for a in _expand(p[0]) for b in _expand(p[1])] for p in products]
    total = 0.0
    for choice in itertools.product(*options):
        conj = [c[0] for c in choice]
        unc = [c[1] for c in choice]
        for perm in _pairings(n):
            weight = 1.0
            parent = list(range(n))
            for ci, ui in enumerate(perm):
                if conj[ci] != unc[ui]:
                    break
                weight *= var[conj[ci]]
                parent[_find(parent, ci)] = _find(parent, ui)
            else:
                cycles = len({_find(parent, x) for x in range(n)})
                total += weight * M ** cycles
    return total


class Moments:
    """Moment oracle for one (M, profile, slot) combination."""

    def __init__(self, M, sigma2, sigma2_e, t=1):
        self.M = M
        self.K = len(sigma2)
        self.t = t
        self.var = {}
        for j in range(self.K):
            self.var[("h", j)] = float(sigma2[j])
            self.var[("e", j)] = float(sigma2_e[j])

    def _sum(self, terms):
        return sum(expect_product(p, self.var, self.M) for p in terms)

    def _nx(self, j):
        return (j + self.t) % self.K

    def gain_terms(self, left, right):
        """left^T B right as a list of single products (for a mean)."""
        h = lambda j: ("h", j)  # noqa: E731
        return [[(h(j), left), (h(self._nx(j)), right)] for j in range(self.K)]

    def gain_mean(self, left, right):
        return self._sum(self.gain_terms(left, right))

    def gain_second(self, left, right):
        """E|left^T B right|^2 with B = Gh* P Gh^H."""
        h = lambda j: ("h", j)  # noqa: E731
        terms = []
        for j in range(self.K):
            for l in range(self.K):
                terms.append([(h(j), left), (h(self._nx(j)), right),
                              (left, h(l)), (right, h(self._nx(l)))])
        return self._sum(terms)

    def mean(self, k):
        return self.gain_mean(("g", k), ("g", self._nx(k)))

    def e2(self, k, i):
        return self.gain_second(("g", k), ("g", i))

    def an(self, k):
        """E||g_k^T B||^2."""
        h = lambda j: ("h", j)  # noqa: E731
        g = ("g", k)
        return self._sum([[(h(j), g), (g, h(l)), (h(self._nx(j)), h(self._nx(l)))]
                          for j in range(self.K) for l in range(self.K)])

    def column_power(self, vec):
        """E||B vec||^2."""
        h = lambda j: ("h", j)  # noqa: E731
        return self._sum([[(h(self._nx(j)), vec), (vec, h(self._nx(l))), (h(j), h(l))]
                          for j in range(self.K) for l in range(self.K)])

    def frobenius_b(self):
        """E||B||_F^2."""
        h = lambda j: ("h", j)  # noqa: E731
        return self._sum([[(h(l), h(j)), (h(self._nx(l)), h(self._nx(j)))]
                          for j in range(self.K) for l in range(self.K)])

    def alpha_denominator(self, P_u):
        return (P_u * sum(self.column_power(("g", i)) for i in range(self.K))
                + self.frobenius_b())

    def auxiliary(self, k):
        """Q1..Q3 and T1..T4 of user k."""
        nx = self._nx(k)
        return {
            "Q1": self.column_power(("h", k)),
            "Q2": self.column_power(("e", k)),
            "Q3": self.frobenius_b() / self.M,
            "T1": self.gain_second(("h", k), ("h", nx)),
            "T2": self.gain_second(("h", k), ("e", nx)),
            "T3": self.gain_second(("e", k), ("h", nx)),
            "T4": self.gain_second(("e", k), ("e", nx)),
        }


def e2_matrix(mom: Moments) -> np.ndarray:
    return np.array([[mom.e2(k, i) for i in range(mom.K)] for k in range(mom.K)])
