"""The singularity detector.

For a test field phi and cutoff N the statistic is

    S_N(phi) = integral H_{k+1}(<grad>^alpha P_N phi(x); c_1(N)) dx
               + (2pi)^d (k+1) c_2(N),

an exact torus integral of a polynomial in a band-limited field, plus the
deterministic counterterm.  Its mean over the linear field Z is exactly
the counterterm, which diverges like N^delta (or log N on the critical
line), while the same functional evaluated on the nonlinear dynamics u
stays bounded.  Normalizing by N^gamma (or (log N)^gamma) with gamma
inside an admissible window turns that contrast into a dichotomy:
normalized statistics of Z blow up, those of u vanish.

run_experiment evaluates the statistic of each replica at every cutoff in
the grid, normalizes, and reports medians, trends, and the terminal
separation ratio between the two families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.fft import next_fast_len

from .dynamics import _to_grid
from .fourier import Lattice, SpectralField, TWO_PI, torus_integral_of_polynomial
from .model import ModelParams
from .renorm import (
    Regime,
    RenormConstants,
    classify_regime,
    divergence_rate,
    renorm_constants,
)
from .wick import hermite_coefficients

DEFAULT_N_GRID = (64, 128, 256, 512, 1024, 2048, 4096)


# ---------------------------------------------------------------------
# Spec selection
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class DetectorSpec:
    params: ModelParams
    alpha: float
    gamma: float
    normalization: str  # "power" | "log"
    N_grid: tuple
    epsilon: Optional[float] = None  # offset from the critical exponent, if any

    def __post_init__(self):
        if self.normalization not in ("power", "log"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.normalization == "log" and min(self.N_grid) < 2:
            raise ValueError("log normalization needs cutoffs >= 2")

    def norm_factor(self, N: int) -> float:
        if self.normalization == "power":
            return float(N) ** self.gamma
        return math.log(N) ** self.gamma


def gamma_window(params: ModelParams, alpha: float):
    """Admissible (lo, hi) for the normalization exponent at offset alpha:
    below the divergence rate, but large enough that both the remainder
    chaos and the smoothed product terms still vanish."""
    delta = divergence_rate(params, alpha)
    lo = max(
        0.0,
        delta - params.d / 2.0,
        -params.d / 2.0
        - (params.k + 1) * (0.5 * (params.sigma - params.d) - params.m - alpha),
    )
    return lo, delta


def choose_detector_spec(
    params: ModelParams,
    epsilon: float = 0.05,
    N_grid: Sequence[int] = DEFAULT_N_GRID,
) -> DetectorSpec:
    """Pick the test exponent and normalization for a model.

    Strictly singular models get alpha = alpha_0 + epsilon with a power
    normalization from the middle of the admissible window (epsilon is
    halved if the window at the requested offset is empty); borderline
    models get alpha = alpha_0 with a (log N)^(3/4) normalization.
    Models outside the singular regimes are rejected.
    """
    verdict = classify_regime(params)
    report = verdict.report
    grid = tuple(int(N) for N in N_grid)
    if verdict.regime == Regime.SINGULAR_BORDERLINE:
        return DetectorSpec(
            params=params,
            alpha=report.alpha0,
            gamma=0.75,
            normalization="log",
            N_grid=grid,
        )
    if verdict.regime != Regime.SINGULAR_STRICT:
        raise ValueError(
            f"detector inapplicable: regime is {verdict.regime.value}"
        )
    eps = float(epsilon)
    for _ in range(40):
        alpha = report.alpha0 + eps
        lo, hi = gamma_window(params, alpha)
        if lo < hi:
            return DetectorSpec(
                params=params,
                alpha=alpha,
                gamma=0.5 * (lo + hi),
                normalization="power",
                N_grid=grid,
                epsilon=eps,
            )
        eps *= 0.5
    raise ValueError(
        "no admissible normalization window near the critical exponent; "
        "the model violates the smoothing constraints"
    )


# ---------------------------------------------------------------------
# The statistic
# ---------------------------------------------------------------------


def detector_statistic(
    phi: SpectralField,
    params: ModelParams,
    alpha: float,
    N: int,
    c1: float,
    c2: float,
) -> float:
    """S_N(phi), unnormalized.  Exact: the integrand is a degree-(k+1)
    polynomial in a band-limited field, integrated on a dealiased grid."""
    g = phi.project(N).apply_multiplier(alpha)
    poly = hermite_coefficients(params.k + 1, c1)
    return torus_integral_of_polynomial(g, poly) + expected_statistic_mean(
        params, c2
    )


def expected_statistic_mean(params: ModelParams, c2: float) -> float:
    """E S_N(Z) = (2pi)^d (k+1) c_2(N): the Hermite part is centered."""
    return TWO_PI**params.d * (params.k + 1) * c2


def _batch_statistics(
    coeffs: np.ndarray,
    lattice: Lattice,
    params: ModelParams,
    alpha: float,
    N: int,
    c1: float,
    c2: float,
) -> np.ndarray:
    """detector_statistic over a (replicas, modes) array, vectorized."""
    if N > lattice.N:
        raise ValueError(f"cutoff {N} exceeds source cutoff {lattice.N}")
    sub = Lattice.ball(params.d, N)
    mask = lattice.norms_sq <= N * N
    g = coeffs[:, mask] * sub.weight(alpha)[None, :]
    # Same grid size as the single-field path keeps the two routes
    # numerically interchangeable.
    M = next_fast_len((params.k + 1) * N + 1)
    values = _to_grid(g, params.d, M, sub.flat_embed_indices(M))
    poly = hermite_coefficients(params.k + 1, c1)
    # Horner over the grid, reducing to the mean at the end.
    result = np.full(values.shape, poly[-1])
    for coef in reversed(poly[:-1]):
        result = result * values + coef
    axes = tuple(range(-params.d, 0))
    integral = TWO_PI**params.d * np.mean(result, axis=axes)
    return integral + expected_statistic_mean(params, c2)


# ---------------------------------------------------------------------
# Trend test
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class TrendResult:
    s: int
    z_score: float
    p_value: float  # two-sided, normal approximation

    @property
    def direction(self) -> str:
        return "increasing" if self.s > 0 else "decreasing" if self.s < 0 else "flat"


def mann_kendall(values) -> TrendResult:
    """Nonparametric trend test on a short sequence (no tie correction;
    the inputs here are continuous statistics)."""
    v = np.asarray(values, dtype=np.float64)
    n = len(v)
    if n < 2:
        raise ValueError("trend test needs at least two values")
    s = int(sum(np.sign(v[j] - v[i]) for i in range(n) for j in range(i + 1, n)))
    var = n * (n - 1) * (2 * n + 5) / 18.0
    z = 0.0 if s == 0 else (s - math.copysign(1, s)) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return TrendResult(s=s, z_score=z, p_value=p)


# ---------------------------------------------------------------------
# Experiment
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class StatisticTrace:
    label: str
    N_values: tuple
    raw: np.ndarray  # (replicas, cutoffs)
    normalized: np.ndarray
    median_abs: np.ndarray  # per cutoff, of |normalized|
    iqr_abs: np.ndarray
    median_signed: np.ndarray

    @property
    def trend(self) -> TrendResult:
        return mann_kendall(self.median_abs)

    @property
    def strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.median_abs) > 0))

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.median_abs) < 0))


@dataclass(frozen=True)
class ExperimentResult:
    spec: DetectorSpec
    constants: tuple  # RenormConstants per cutoff
    traces: Dict[str, StatisticTrace]
    separation: Optional[float]  # median|Z~| / median|u~| at the top cutoff

    def trace(self, label: str) -> StatisticTrace:
        return self.traces[label]


def statistic_trace(
    spec: DetectorSpec,
    coeffs: np.ndarray,
    lattice: Lattice,
    constants: Sequence[RenormConstants],
    label: str,
) -> StatisticTrace:
    raws = []
    normed = []
    for N, cs in zip(spec.N_grid, constants):
        s = _batch_statistics(
            coeffs, lattice, spec.params, spec.alpha, N, cs.c1, cs.c2
        )
        raws.append(s)
        normed.append(s / spec.norm_factor(N))
    raw = np.stack(raws, axis=1)
    normalized = np.stack(normed, axis=1)
    a = np.abs(normalized)
    return StatisticTrace(
        label=label,
        N_values=spec.N_grid,
        raw=raw,
        normalized=normalized,
        median_abs=np.median(a, axis=0),
        iqr_abs=np.quantile(a, 0.75, axis=0) - np.quantile(a, 0.25, axis=0),
        median_signed=np.median(normalized, axis=0),
    )


def experiment_constants(spec: DetectorSpec, method: str = "auto"):
    return tuple(
        renorm_constants(spec.params, N, spec.alpha, method=method)
        for N in spec.N_grid
    )


def run_experiment(
    spec: DetectorSpec,
    z_coeffs: np.ndarray,
    lattice: Lattice,
    u_coeffs: Optional[np.ndarray] = None,
    constants: Optional[Sequence[RenormConstants]] = None,
    extra: Optional[Dict[str, np.ndarray]] = None,
) -> ExperimentResult:
    """Evaluate the detector over replica ensembles.

    z_coeffs (and optionally u_coeffs, plus any extra labeled families)
    are (replicas, modes) coefficient arrays on `lattice`, simulated at a
    cutoff at least max(N_grid); the same fields are re-projected at every
    grid cutoff.  Constants are computed once per cutoff unless supplied.
    """
    if constants is None:
        constants = experiment_constants(spec)
    traces = {"Z": statistic_trace(spec, z_coeffs, lattice, constants, "Z")}
    if u_coeffs is not None:
        traces["u"] = statistic_trace(spec, u_coeffs, lattice, constants, "u")
    for label, arr in (extra or {}).items():
        traces[label] = statistic_trace(spec, arr, lattice, constants, label)
    separation = None
    if "u" in traces:
        top_u = traces["u"].median_abs[-1]
        separation = float(traces["Z"].median_abs[-1] / top_u) if top_u > 0 else math.inf
    return ExperimentResult(
        spec=spec,
        constants=tuple(constants),
        traces=traces,
        separation=separation,
    )
