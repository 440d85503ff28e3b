"""Hermite polynomials, Wick products, and Gaussian moment combinatorics.

The variance-parametrized Hermite polynomials H_k(x; c) are defined by the
generating function exp(t x - c t^2 / 2) = sum_k t^k H_k(x; c) / k! and
satisfy

    H_0 = 1,   H_1 = x,   H_{k+1}(x; c) = x H_k(x; c) - k c H_{k-1}(x; c),

so that H_k(f; E f^2) = :f^k: is the Wick power of a centred Gaussian f.
The multivariate Wick product obeys the analogous recursion

    :x_1 x_2 .. x_k: = x_1 :x_2 .. x_k: - sum_{j>=2} C_{1j} :x_2 .. x_k without x_j:

with C_{ij} = E[x_i x_j].  Wick products of different degrees are orthogonal,
and within equal degree

    E[ :f_1 .. f_k: :g_1 .. g_k: ] = perm( E[f_i g_j] ),

the permanent of the cross-covariance matrix.  These identities are used both
to build the renormalized nonlinearity and as exact oracles in the tests.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def hermite_eval(k: int, x, c: float = 1.0):
    """H_k(x; c), vectorized in x."""
    if k < 0:
        raise ValueError(f"degree must be >= 0, got {k}")
    scalar = np.isscalar(x)
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if k == 0:
        return float(prev) if scalar else prev
    cur = x.copy()
    for n in range(1, k):
        prev, cur = cur, x * cur - n * c * prev
    return float(cur) if scalar else cur


def hermite_coefficients(k: int, c: float = 1.0) -> np.ndarray:
    """Coefficients of H_k(x; c) in ascending powers of x (length k + 1)."""
    if k < 0:
        raise ValueError(f"degree must be >= 0, got {k}")
    prev = np.array([1.0])
    if k == 0:
        return prev
    cur = np.array([0.0, 1.0])
    for n in range(1, k):
        nxt = np.zeros(n + 2)
        nxt[1:] = cur
        nxt[:n] -= n * c * prev
        prev, cur = cur, nxt
    return cur


def wick_monomial(values, cov):
    """:x_1 .. x_k: for realizations `values` (scalars or same-shape arrays)
    with covariance matrix `cov` of shape (k, k).

    The recursion memoizes subsets, so the cost is O(2^k) array products;
    intended for the small k of low-order chaos expansions.
    """
    cov = np.asarray(cov, dtype=np.float64)
    k = len(values)
    if cov.shape != (k, k):
        raise ValueError(f"covariance shape {cov.shape} does not match {k} factors")
    vals = [np.asarray(v) for v in values]

    memo: dict = {}

    def rec(idx: tuple):
        if not idx:
            return 1.0
        if idx in memo:
            return memo[idx]
        first, rest = idx[0], idx[1:]
        out = vals[first] * rec(rest)
        for pos, j in enumerate(rest):
            out = out - cov[first, j] * rec(rest[:pos] + rest[pos + 1 :])
        memo[idx] = out
        return out

    return rec(tuple(range(k)))


def permanent(mat: np.ndarray) -> float:
    """Permanent of a small square matrix by explicit permutation sum."""
    mat = np.asarray(mat, dtype=np.float64)
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise ValueError("permanent needs a square matrix")
    if n > 8:
        raise ValueError("permanent too large: n > 8")
    if n == 0:
        return 1.0
    rows = range(n)
    return float(
        sum(np.prod(mat[rows, perm]) for perm in itertools.permutations(range(n)))
    )


def pairing_expectation(cross_cov: np.ndarray) -> float:
    """E[ :f_1 .. f_k: :g_1 .. g_m: ] from the matrix of E[f_i g_j].

    Zero unless the chaos orders match (square matrix); then the permanent.
    """
    cross_cov = np.asarray(cross_cov, dtype=np.float64)
    if cross_cov.ndim != 2:
        raise ValueError("cross-covariance must be a matrix")
    if cross_cov.shape[0] != cross_cov.shape[1]:
        return 0.0
    return permanent(cross_cov)


def chaos_product_projection(cross_cov: np.ndarray, r: int):
    """Order-2r chaos component of the product :f_1 .. f_k: :g_1 .. g_k:.

    Returns a list of terms (weight, kept_f, kept_g): pair up subsets
    S, S' of size k - r across the two blocks (weight = permanent of the
    cross-covariance submatrix), leaving the joint Wick monomial over the
    kept indices.  Summing the evaluated terms over r = 0..k recovers the
    plain product of the two Wick monomials.
    """
    cross_cov = np.asarray(cross_cov, dtype=np.float64)
    k = cross_cov.shape[0]
    if cross_cov.shape != (k, k):
        raise ValueError("cross-covariance must be square (equal block sizes)")
    if not 0 <= r <= k:
        raise ValueError(f"target order r={r} outside 0..{k}")
    everything = tuple(range(k))
    terms = []
    for paired_f in itertools.combinations(everything, k - r):
        kept_f = tuple(i for i in everything if i not in paired_f)
        for paired_g in itertools.combinations(everything, k - r):
            kept_g = tuple(j for j in everything if j not in paired_g)
            weight = permanent(cross_cov[np.ix_(paired_f, paired_g)])
            terms.append((weight, kept_f, kept_g))
    return terms


def isserlis_moment(cov: np.ndarray, exponents) -> float:
    """E[prod_i x_i^{beta_i}] for centred jointly Gaussian x with covariance
    `cov`, by brute-force pairing enumeration.  Odd total degree gives 0.

    This is the independent oracle against which the Wick identities are
    tested; cost grows factorially, so keep the total degree small (<= 10).
    """
    cov = np.asarray(cov, dtype=np.float64)
    exponents = [int(b) for b in np.atleast_1d(exponents)]
    if cov.shape != (len(exponents), len(exponents)):
        raise ValueError("covariance size does not match number of exponents")
    factors = tuple(
        itertools.chain.from_iterable([i] * b for i, b in enumerate(exponents))
    )
    if len(factors) % 2 == 1:
        return 0.0

    memo: dict = {}

    def rec(idx: tuple) -> float:
        if not idx:
            return 1.0
        key = tuple(sorted(idx))
        if key in memo:
            return memo[key]
        first, rest = idx[0], idx[1:]
        total = 0.0
        for pos, j in enumerate(rest):
            total += cov[first, j] * rec(rest[:pos] + rest[pos + 1 :])
        memo[key] = total
        return total

    return rec(factors)


def hermite_orthogonality(j: int, k: int, c: float) -> float:
    """Closed form E[H_j(g; c) H_k(g; c)] = delta_{jk} k! c^k for g ~ N(0, c)."""
    return math.factorial(k) * c**k if j == k else 0.0
