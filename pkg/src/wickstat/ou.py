"""Exact sampling of the stationary linear field and its time evolution.

The linearised equation d/dt Z + (1 - Laplacian)^{sigma/2} Z = M(grad) eta
diagonalizes in Fourier: each mode is an Ornstein-Uhlenbeck process with
relaxation rate <l>^sigma and stationary variance

    E |Zhat(t, l)|^2 = |M(l)|^2 <l>^{-sigma},

and two-time covariance E[Zhat(t1, l) Zhat(t2, -l)] carrying the factor
exp(-|t1 - t2| <l>^sigma).  Sampling draws independent real and imaginary
parts of variance v/2 on a fixed half lattice and mirrors them, which
enforces a real field and the target variance exactly.

Draw-order contract (load-bearing for reproducibility): every field draw
consumes standard normals of shape (H + 1, 2) where H is the half-lattice
size; row 0 column 0 is the zero mode, rows 1.. are the half-lattice modes
in lattice order.  Batched simulations may prefetch many such blocks from
the same generator; numpy fills arrays in C order, so prefetching K steps
at once consumes the stream identically to K sequential draws.
"""

from __future__ import annotations

import numpy as np

from .fourier import Lattice, SpectralField, TWO_PI, multiplier_weight
from .model import ModelParams


def stationary_mode_variance(params: ModelParams, l) -> float:
    """E |Zhat(t, l)|^2 for a single mode."""
    l = np.atleast_2d(np.asarray(l))
    out = params.noise_weight_sq(l) * multiplier_weight(l, -params.sigma)
    return float(out[0])


def mode_variances(params: ModelParams, lattice: Lattice) -> np.ndarray:
    return params.noise_weight_sq(lattice.points) * lattice.weight(-params.sigma)


def mode_rates(params: ModelParams, lattice: Lattice) -> np.ndarray:
    """Relaxation rate <l>^sigma per mode."""
    return lattice.weight(params.sigma)


def draw_block_shape(lattice: Lattice) -> tuple:
    """Shape of the standard-normal block one field draw consumes."""
    return (lattice.half_indices.size + 1, 2)


def coeffs_from_draws(lattice: Lattice, variances: np.ndarray, draws: np.ndarray):
    """Map standard-normal draws (..., H + 1, 2) to Hermitian coefficients.

    Vectorized over leading axes so batched simulations reuse the exact
    draw order of the scalar path.
    """
    half = lattice.half_indices
    neg = lattice.neg_index[half]
    out_shape = draws.shape[:-2] + (lattice.size,)
    coeffs = np.zeros(out_shape, dtype=np.complex128)
    coeffs[..., lattice.zero_index] = draws[..., 0, 0] * np.sqrt(
        variances[lattice.zero_index]
    )
    scale = np.sqrt(variances[half] / 2.0)
    z = (draws[..., 1:, 0] + 1j * draws[..., 1:, 1]) * scale
    coeffs[..., half] = z
    coeffs[..., neg] = np.conj(z)
    return coeffs


def hermitian_gaussian(
    lattice: Lattice, variances: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One centred Hermitian Gaussian coefficient vector with the given
    per-mode variances E|c(l)|^2."""
    return coeffs_from_draws(
        lattice, variances, rng.standard_normal(draw_block_shape(lattice))
    )


def sample_stationary(
    params: ModelParams, N: int, rng: np.random.Generator
) -> SpectralField:
    """A draw of the stationary field at cutoff N."""
    lattice = Lattice.ball(params.d, N)
    return SpectralField(
        lattice, hermitian_gaussian(lattice, mode_variances(params, lattice), rng)
    )


def ou_step(
    params: ModelParams, field: SpectralField, dt: float, rng: np.random.Generator
) -> SpectralField:
    """Advance the field by dt with the exact transition kernel.

    Per mode: Zhat(t + dt) = e^{-dt <l>^sigma} Zhat(t) + xi with xi a
    Hermitian-coupled complex Gaussian of variance v_l (1 - e^{-2 dt <l>^sigma});
    stationarity is preserved exactly for any dt.
    """
    if dt <= 0:
        raise ValueError(f"time step must be > 0, got {dt}")
    lattice = field.lattice
    decay = np.exp(-dt * mode_rates(params, lattice))
    noise_var = mode_variances(params, lattice) * (1.0 - decay**2)
    xi = hermitian_gaussian(lattice, noise_var, rng)
    return SpectralField(lattice, decay * field.coeffs + xi)


def two_time_covariance(
    params: ModelParams, N: int, M: int, t1: float, t2: float, x1, x2
) -> float:
    """Closed-form E[Z_M(t1, x1) Z_N(t2, x2)], a deterministic lattice sum
    over |l| <= min(M, N); the oracle that Monte Carlo runs are tested
    against."""
    lattice = Lattice.ball(params.d, min(M, N))
    dx = np.atleast_1d(np.asarray(x1, dtype=np.float64)) - np.atleast_1d(
        np.asarray(x2, dtype=np.float64)
    )
    weights = mode_variances(params, lattice) * np.exp(
        -abs(t1 - t2) * mode_rates(params, lattice)
    )
    phases = np.cos(lattice.points @ dx)
    return float(np.sum(weights * phases)) * TWO_PI ** (-params.d)
