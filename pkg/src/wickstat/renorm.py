"""Exponents, regime classification, and renormalization constants.

Deterministic quantities attached to a model:

* the forcing regularity A = (1/2) sum_i (sigma - d - 2m - 2n_i), the
  divergence rate delta(alpha) of the second constant, and its root
  alpha_0 (computed by two independent formulas; tests cross-check);
* the assumption predicates and the regime classification;
* the two renormalization constants

      c_1(N, alpha) = E[ |<grad>^alpha Z_N(x)|^2 ]
      c_2(N, alpha) = E[ H_k(<grad>^alpha Z_N(x); c_1) <grad>^alpha Y_N(x) ]

  as exact lattice sums: c_1 a single sum, c_2 a k-fold sum

      c_2 = k! (2π)^{-dk} sum_{l_1..l_k, |sum l| <= N}
            <q>^alpha N_0(q) / (sum_i <l_i>^sigma + <q>^sigma)
            prod_i <l_i>^{alpha - sigma} N_i(l_i) |M(l_i)|^2,   q = sum l_i,

  evaluated either brute-force or via FFT convolutions under an integral
  representation of 1/D (the "fast" method);
* numeric renderings of the convolution bounds used by the estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from itertools import combinations

import numpy as np
from scipy.fft import fftn, ifftn, irfftn, next_fast_len, rfftn

from .fourier import Lattice, TWO_PI, multiplier_weight
from .model import ModelParams

# Equality tolerance for the borderline classification; keeps values like
# sigma = 0.7 + 0.05 on the boundary where they belong.
_BORDERLINE_TOL = 1e-12


# =====================================================================
# Exponents and classification
# =====================================================================


def forcing_regularity(params: ModelParams) -> float:
    """The exponent A: spatial regularity of the Wick forcing before the
    outer multiplier is applied."""
    return 0.5 * sum(
        params.sigma - params.d - 2.0 * params.m - 2.0 * ni for ni in params.n
    )


def divergence_rate(params: ModelParams, alpha: float) -> float:
    """delta(alpha): growth exponent of the second constant in N."""
    return (
        params.n0
        + alpha
        - params.sigma
        + sum(
            2.0 * params.m + ni + alpha + params.d - params.sigma for ni in params.n
        )
    )


def critical_alpha(params: ModelParams) -> float:
    """The root alpha_0 of the divergence rate, from the closed form in
    terms of A (deliberately not solved from divergence_rate, so the two
    routes cross-check each other)."""
    A = forcing_regularity(params)
    return (
        0.5 * (params.sigma - params.d)
        - params.m
        + (A + params.m - params.n0 + 0.5 * (params.sigma + params.d)) / (params.k + 1)
    )


@dataclass(frozen=True)
class ExponentReport:
    """All scalar exponents and assumption predicates for one model."""

    A: float
    alpha0: float
    w43_ok: tuple  # per-factor booleans: (sigma - d)/2 - m - n_i < 0
    subcritical_first: bool  # A + (d + sigma)/2 > 0 (no variance blow-up)
    subcritical_second: bool  # A + (d + sigma)/2 > n0 - m (subcriticality)
    singular_condition: str  # "strict" | "borderline" | "fails"
    delta_slope: float
    delta_intercept: float

    def delta(self, alpha: float) -> float:
        return self.delta_slope * alpha + self.delta_intercept


def exponent_report(params: ModelParams) -> ExponentReport:
    A = forcing_regularity(params)
    half = 0.5 * (params.d + params.sigma)
    gap = A + 0.5 * params.sigma - (params.n0 - params.m)
    if gap < -_BORDERLINE_TOL:
        singular = "strict"
    elif gap <= _BORDERLINE_TOL:
        singular = "borderline"
    else:
        singular = "fails"
    return ExponentReport(
        A=A,
        alpha0=critical_alpha(params),
        w43_ok=tuple(
            0.5 * (params.sigma - params.d) - params.m - ni < 0 for ni in params.n
        ),
        subcritical_first=A + half > 0,
        subcritical_second=A + half > params.n0 - params.m,
        singular_condition=singular,
        delta_slope=float(params.k + 1),
        delta_intercept=divergence_rate(params, 0.0),
    )


class Regime(Enum):
    ABSOLUTELY_CONTINUOUS_EXPECTED = "AbsolutelyContinuousExpected"
    SINGULAR_STRICT = "SingularStrict"
    SINGULAR_BORDERLINE = "SingularBorderline"
    ASSUMPTION_VIOLATED = "AssumptionViolated"
    SUPERCRITICAL = "Supercritical"


@dataclass(frozen=True)
class RegimeVerdict:
    regime: Regime
    report: ExponentReport


def classify_regime(params: ModelParams) -> RegimeVerdict:
    """Classify where the model sits relative to the singularity dichotomy.

    Precedence: loss of subcriticality trumps everything; then, if the
    singularity condition A + sigma/2 <= n0 - m holds, the remaining
    assumptions decide between a singular verdict and AssumptionViolated.
    When the singularity condition fails the verdict is
    AbsolutelyContinuousExpected regardless of the per-factor regularity
    assumption, since the dichotomy is then silent about the model.
    """
    report = exponent_report(params)
    if not report.subcritical_second:
        regime = Regime.SUPERCRITICAL
    elif report.singular_condition != "fails":
        if all(report.w43_ok) and report.subcritical_first:
            regime = (
                Regime.SINGULAR_STRICT
                if report.singular_condition == "strict"
                else Regime.SINGULAR_BORDERLINE
            )
        else:
            regime = Regime.ASSUMPTION_VIOLATED
    else:
        regime = Regime.ABSOLUTELY_CONTINUOUS_EXPECTED
    return RegimeVerdict(regime=regime, report=report)


# =====================================================================
# Renormalization constants
# =====================================================================


@dataclass(frozen=True)
class RenormConstants:
    N: int
    alpha: float
    c1: float
    c2: float
    method: str  # "brute" | "quadrature-convolution"


def first_order_constant(params: ModelParams, N: int, alpha: float) -> float:
    """c_1: pointwise variance of the filtered stationary field."""
    lattice = Lattice.ball(params.d, N)
    weights = (
        lattice.weight(2.0 * alpha - params.sigma)
        * params.noise_weight_sq(lattice.points)
    )
    return float(np.sum(weights)) * TWO_PI ** (-params.d)


def _factor_weights(params: ModelParams, lattice: Lattice) -> list:
    """Per-factor mode weights <l>^{alpha - sigma} N_i(l) |M(l)|^2 without
    the alpha part (applied by the caller, since alpha varies)."""
    base = lattice.weight(-params.sigma) * params.noise_weight_sq(lattice.points)
    return [
        base * params.factor_weights(i, lattice.points) for i in range(params.k)
    ]


_BRUTE_TERM_GUARD = 10**9
_BRUTE_CHUNK = 4 * 10**6


def second_order_constant(
    params: ModelParams, N: int, alpha: float, absolute: bool = False
) -> float:
    """c_2 by direct enumeration of the k-fold lattice sum.

    Exact up to rounding; cost (ball size)^k, guarded.  The |sum l| <= N
    restriction reflects the projection inside Y_N.  With absolute=True
    the terms are summed in magnitude instead: the scale against which a
    cancellation-dominated constant should be judged.
    """
    lattice = Lattice.ball(params.d, N)
    P = lattice.size
    if P**params.k > _BRUTE_TERM_GUARD:
        raise ValueError(
            f"brute-force sum has {P**params.k:.2e} terms; "
            "use second_order_constant_fast"
        )
    pts = lattice.points
    rates = lattice.weight(params.sigma)
    factors = [
        w * lattice.weight(alpha) for w in _factor_weights(params, lattice)
    ]

    k = params.k
    # Chunk over the first factor so memory stays ~ P^{k-1} per block.
    inner = P ** (k - 1)
    block = max(1, _BRUTE_CHUNK // max(inner, 1))
    inner_idx = np.stack(
        np.meshgrid(*([np.arange(P)] * (k - 1)), indexing="ij"), axis=0
    ).reshape(k - 1, -1) if k > 1 else np.zeros((0, 1), dtype=np.int64)

    inner_sum = np.sum(pts[inner_idx], axis=0) if k > 1 else np.zeros(
        (1, params.d), dtype=np.int64
    )
    inner_rate = np.sum(rates[inner_idx], axis=0) if k > 1 else np.zeros(1)
    inner_weight = np.ones(inner_sum.shape[0], dtype=np.complex128)
    for i in range(1, k):
        inner_weight = inner_weight * factors[i][inner_idx[i - 1]]

    acc = 0.0 + 0.0j
    for start in range(0, P, block):
        stop = min(start + block, P)
        total = pts[start:stop, None, :] + inner_sum[None, :, :]
        norm_sq = np.einsum("abd,abd->ab", total, total)
        mask = norm_sq <= N * N
        if not np.any(mask):
            continue
        bracket_sq = norm_sq[mask] + 1.0
        outer = bracket_sq ** (0.5 * alpha) * params.outer_weights(total[mask])
        denom = (rates[start:stop, None] + inner_rate[None, :])[mask] + bracket_sq ** (
            0.5 * params.sigma
        )
        weight = (factors[0][start:stop, None] * inner_weight[None, :])[mask]
        terms = outer * weight / denom
        acc += np.sum(np.abs(terms)) if absolute else np.sum(terms)

    if abs(acc.imag) > 1e-9 * max(1.0, abs(acc.real)):
        raise ValueError(f"lattice sum has spurious imaginary part {acc.imag:.3e}")
    return math.factorial(k) * TWO_PI ** (-params.d * k) * acc.real


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def second_order_constant_fast(
    params: ModelParams,
    N: int,
    alpha: float,
    rtol: float = 1e-8,
    max_level: int = 8,
) -> float:
    """c_2 via 1/D = integral_0^inf exp(-s D) ds and FFT convolutions.

    For each quadrature node s the k-fold constrained lattice sum collapses
    to a cyclic convolution of per-factor kernels exp(-s <l>^sigma) w_i(l)
    on a cube large enough to avoid wraparound; a doubly-exponential
    substitution s = exp(pi/2 sinh v) makes the trapezoid rule converge
    geometrically, refined until two levels agree to `rtol`.
    """
    lattice = Lattice.ball(params.d, N)
    pts = lattice.points
    rates = lattice.weight(params.sigma)
    factors = [
        w * lattice.weight(alpha) for w in _factor_weights(params, lattice)
    ]
    outer = lattice.weight(alpha) * params.outer_weights(pts)

    k = params.k
    d = params.d
    side = next_fast_len((k + 1) * (2 * N + 1))
    embed = lattice.flat_embed_indices(side)
    cube_shape = (side,) * d

    same_kernel = all(np.array_equal(factors[0], f) for f in factors[1:])
    realcase = all(np.max(np.abs(f.imag)) == 0.0 for f in factors)

    def integrand(s: float) -> float:
        # All rates are >= 1, so the whole integrand is below exp(-s(k+1)).
        if s * (k + 1) > 745.0:
            return 0.0
        damped = [f * np.exp(-s * rates) for f in (factors[:1] if same_kernel else factors)]
        if realcase:
            spectra = [rfftn(_embed(v.real, cube_shape, embed)) for v in damped]
            prod = spectra[0] ** k if same_kernel else reduce(np.multiply, spectra)
            conv = irfftn(prod, s=cube_shape).reshape(-1)[embed]
        else:
            spectra = [fftn(_embed(v, cube_shape, embed)) for v in damped]
            prod = spectra[0] ** k if same_kernel else reduce(np.multiply, spectra)
            conv = ifftn(prod).reshape(-1)[embed]
        value = np.sum(outer * np.exp(-s * rates) * conv)
        return float(np.real(value))

    # s(v) = exp(pi/2 sinh v): double-exponential decay of the transformed
    # integrand on both ends.
    def node(v: float) -> float:
        s = math.exp(0.5 * math.pi * math.sinh(v))
        weight = s * 0.5 * math.pi * math.cosh(v)
        if weight == 0.0 or not math.isfinite(weight):
            return 0.0
        return integrand(s) * weight

    cache: dict = {}

    def term(v: float) -> float:
        if v not in cache:
            cache[v] = node(v)
        return cache[v]

    def level_sum(h: float) -> tuple:
        total = term(0.0)
        gross = abs(total)
        for direction in (1.0, -1.0):
            j = 1
            stale = 0
            while True:
                t = term(direction * j * h)
                total += t
                gross += abs(t)
                stale = stale + 1 if abs(t) <= 1e-16 * max(gross, 1e-300) else 0
                if stale >= 3 or j > 400:
                    break
                j += 1
        return h * total, h * gross

    h = 0.5
    prev, _ = level_sum(h)
    for _level in range(1, max_level + 1):
        h /= 2.0
        cur, gross = level_sum(h)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-9 * gross, 1e-300):
            scale = math.factorial(k) * TWO_PI ** (-d * k)
            return scale * cur
        prev = cur
    raise QuadratureError(
        f"quadrature did not converge: achieved {prev!r} with last refinement "
        f"change {abs(cur - prev):.3e} (requested rtol {rtol:g})"
    )


def _embed(values: np.ndarray, cube_shape: tuple, flat_indices: np.ndarray):
    cube = np.zeros(
        int(np.prod(cube_shape)),
        dtype=np.float64 if values.dtype.kind == "f" else np.complex128,
    )
    cube[flat_indices] = values
    return cube.reshape(cube_shape)


def renorm_constants(
    params: ModelParams, N: int, alpha: float, method: str = "auto"
) -> RenormConstants:
    """Both constants packaged with their provenance tag."""
    if method == "auto":
        method = (
            "brute"
            if Lattice.ball(params.d, N).size ** params.k <= 2 * 10**5
            else "quadrature-convolution"
        )
    if method == "brute":
        c2 = second_order_constant(params, N, alpha)
    elif method == "quadrature-convolution":
        c2 = second_order_constant_fast(params, N, alpha)
    else:
        raise ValueError(f"unknown method {method!r}")
    return RenormConstants(
        N=N,
        alpha=alpha,
        c1=float(first_order_constant(params, N, alpha)),
        c2=float(c2),
        method=method,
    )


# =====================================================================
# Growth-rate fits and convolution bound checks
# =====================================================================


@dataclass(frozen=True)
class GrowthFit:
    mode: str  # "power" | "log"
    slope: float
    intercept: float
    target: float
    rel_deviation: float
    r_squared: float


def growth_rate_fit(N_values, c2_values, delta: float) -> GrowthFit:
    """Fit the divergence of a c_2 sequence against its predicted rate:
    c_2 ~ N^delta when delta > 0, c_2 ~ log N when delta = 0."""
    N_values = np.asarray(N_values, dtype=np.float64)
    c2_values = np.asarray(c2_values, dtype=np.float64)
    if len(N_values) < 4:
        raise ValueError("need at least 4 cutoffs for a growth fit")
    if np.any(np.diff(c2_values) <= 0):
        raise ValueError("non-monotone c2 sequence; upstream bug likely")
    if delta > 0:
        x, y = np.log(N_values), np.log(c2_values)
    else:
        x, y = np.log(N_values), c2_values
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    rel = abs(slope - delta) / abs(delta) if delta != 0 else math.inf
    return GrowthFit(
        mode="power" if delta > 0 else "log",
        slope=float(slope),
        intercept=float(intercept),
        target=delta,
        rel_deviation=rel,
        r_squared=r_squared,
    )


def conv_bound_ratio(d: int, alpha: float, beta: float, L: int, probes) -> float:
    """sup over probe points q of

        sum_{|l| <= L} <l>^alpha <q - l>^beta / <q>^{d + alpha + beta},

    the quantity whose uniform boundedness underlies the convolution
    estimates.  Valid for -d < alpha, beta < 0 with alpha + beta < -d."""
    if not (-d < alpha < 0 and -d < beta < 0 and alpha + beta < -d):
        raise ValueError(
            "exponents outside the valid range: need -d < alpha, beta < 0 "
            f"and alpha + beta < -d, got alpha={alpha}, beta={beta}, d={d}"
        )
    lattice = Lattice.ball(d, L)
    w_alpha = lattice.weight(alpha)
    best = 0.0
    for probe in np.atleast_2d(np.asarray(probes, dtype=np.int64)):
        w_beta = multiplier_weight(probe[None, :] - lattice.points, beta)
        total = float(np.sum(w_alpha * w_beta))
        ratio = total / multiplier_weight(probe, d + alpha + beta)
        best = max(best, float(ratio))
    return best


def iterated_conv_admissible(exponents, d: int) -> bool:
    """Whether every nonempty subset S of the exponent vector satisfies
    sum_{i in S} e_i < -(|S| - 1) d, the condition for iterating the
    convolution bound.  Enumerates subsets; intended for k <= 5."""
    exponents = list(exponents)
    for size in range(1, len(exponents) + 1):
        for subset in combinations(exponents, size):
            if sum(subset) >= -(size - 1) * d:
                return False
    return True
