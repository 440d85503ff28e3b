"""Dyadic block decomposition, Holder-type norms, and the block-decay
regularity estimator, anchored on lacunary fields with known exponents."""

import math

import numpy as np
import pytest

from wickstat.besov import (
    DyadicPartition,
    besov_norm,
    block_norms,
    estimate_regularity,
    lacunary_field,
    lp_block,
    smoothing_check,
)
from wickstat.dynamics import SimConfig, simulate_ensemble
from wickstat.fourier import (
    Lattice,
    PhysicalGrid,
    SpectralField,
    from_physical,
)
from wickstat.model import ModelParams
from wickstat.ou import hermitian_gaussian, sample_stationary
from wickstat.presets import load_preset
from wickstat.rng import RngStream
from scipy.fft import next_fast_len

TWO_PI = 2.0 * math.pi


def random_field(lattice: Lattice, seed: int) -> SpectralField:
    rng = RngStream(seed).child(0).generator()
    return SpectralField(
        lattice, hermitian_gaussian(lattice, np.ones(lattice.size), rng)
    )


def pointwise_product(f: SpectralField, g: SpectralField, out_N: int) -> SpectralField:
    """Exact product of two band-limited fields, truncated to band out_N."""
    M = next_fast_len(f.lattice.N + g.lattice.N + out_N + 1)
    values = f.to_physical(M).values * g.to_physical(M).values
    return from_physical(PhysicalGrid(d=f.lattice.d, M=M, values=values), out_N)


# ---------------------------------------------------------------------
# Partition of unity
# ---------------------------------------------------------------------


@pytest.mark.parametrize("d,N", [(1, 1), (1, 4), (1, 64), (1, 1024), (2, 16), (3, 4)])
def test_partition_sums_to_one_everywhere(d, N):
    part = DyadicPartition.for_lattice(Lattice.ball(d, N))
    total = part.tables.sum(axis=0)
    assert np.max(np.abs(total - 1.0)) <= 1e-12


def test_partition_block_range_and_errors():
    part = DyadicPartition.for_lattice(Lattice.ball(1, 64))
    assert part.block_indices == range(-1, 6)
    with pytest.raises(ValueError, match="out of range"):
        part.table(-2)
    with pytest.raises(ValueError, match="out of range"):
        part.table(6)


def test_low_block_captures_constants():
    lattice = Lattice.ball(1, 16)
    e0 = SpectralField.basis(lattice, (0,))
    low = lp_block(e0, -1)
    np.testing.assert_allclose(low.coeffs, e0.coeffs, atol=1e-15)
    for m in range(0, 3):
        assert np.max(np.abs(lp_block(e0, m).coeffs)) == 0.0


@pytest.mark.parametrize("d,N", [(1, 100), (2, 12)])
def test_blocks_sum_back_to_field(d, N):
    f = random_field(Lattice.ball(d, N), seed=31 + d)
    part = DyadicPartition.for_lattice(f.lattice)
    total = sum(lp_block(f, m).coeffs for m in part.block_indices)
    np.testing.assert_allclose(total, f.coeffs, atol=1e-12)


def test_block_support_matches_annulus():
    lattice = Lattice.ball(1, 64)
    for m in range(0, 5):
        for l in (1, 2 ** (m + 3) if 2 ** (m + 3) <= 64 else 64):
            if 2**m <= abs(l) <= 2 ** (m + 2):
                continue
            e = SpectralField.basis(lattice, (l,))
            assert np.max(np.abs(lp_block(e, m).coeffs)) == 0.0
    # A pure mode at exactly 2^m sits on the block boundary, where the
    # annular multiplier vanishes; it belongs entirely to block m-1.
    for m in (1, 2, 4):
        e = SpectralField.basis(lattice, (2**m,))
        assert np.max(np.abs(lp_block(e, m).coeffs)) == 0.0
        np.testing.assert_allclose(lp_block(e, m - 1).coeffs, e.coeffs, atol=1e-15)


# ---------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------


def test_norm_of_pure_low_mode_and_zero_field():
    for d, expected in ((1, TWO_PI ** -0.5), (2, 1.0 / TWO_PI)):
        lattice = Lattice.ball(d, 4)
        e0 = SpectralField.basis(lattice, (0,) * d)
        for alpha in (-1.0, 0.0, 1.3):
            assert besov_norm(e0, alpha) == pytest.approx(expected, rel=1e-12)
        assert besov_norm(SpectralField.zeros(lattice), 0.5) == 0.0


def test_l2_block_norms_match_parseval():
    lattice = Lattice.ball(2, 8)
    f = random_field(lattice, seed=9)
    part = DyadicPartition.for_lattice(lattice)
    got = block_norms(f, p=2.0)
    exact = np.array(
        [
            math.sqrt(np.sum(np.abs(part.table(m) * f.coeffs) ** 2))
            for m in part.block_indices
        ]
    )
    np.testing.assert_allclose(got, exact, rtol=1e-12)


def test_block_norms_batch_matches_single():
    lattice = Lattice.ball(1, 32)
    fields = [random_field(lattice, seed=s) for s in (1, 2, 3)]
    batch = block_norms(np.stack([f.coeffs for f in fields]), lattice=lattice)
    for i, f in enumerate(fields):
        np.testing.assert_allclose(batch[i], block_norms(f), rtol=1e-13)


def test_besov_norm_monotone_in_smoothness():
    f = random_field(Lattice.ball(1, 64), seed=17)
    alphas = np.linspace(-1.0, 2.0, 13)
    norms = [besov_norm(f, a) for a in alphas]
    assert all(n1 <= n2 + 1e-15 for n1, n2 in zip(norms, norms[1:]))


def test_product_norm_bounded_by_factor_norms():
    # Empirical constant for ||fg|| <= K ||f|| ||g|| in the matched Holder
    # scales; boundedness is the claim, the 2.0 cap is the frozen envelope
    # of the measured maximum 0.933 over this seeded family.
    rng = RngStream(7).child(3).generator()
    lattice = Lattice.ball(1, 16)
    ones = np.ones(lattice.size)
    ratios = []
    for _ in range(100):
        while True:
            a = rng.uniform(-0.9, 1.2)
            b = rng.uniform(-0.9, 1.2)
            if a + b > 0.05:
                break
        f = SpectralField(lattice, hermitian_gaussian(lattice, ones, rng))
        g = SpectralField(lattice, hermitian_gaussian(lattice, ones, rng))
        fg = pointwise_product(f, g, 32)
        ratios.append(besov_norm(fg, min(a, b)) / (besov_norm(f, a) * besov_norm(g, b)))
    ratios = np.array(ratios)
    assert np.all(ratios > 0.0)
    assert ratios.max() < 2.0


# ---------------------------------------------------------------------
# Regularity estimation
# ---------------------------------------------------------------------


def test_estimator_is_exact_on_lacunary_fields():
    for alpha in (0.7, -0.3):
        fit = estimate_regularity([lacunary_field(alpha, 1024)], bootstrap=10, seed=3)
        assert fit.alpha_hat == pytest.approx(alpha, abs=1e-6)
        assert fit.band_lo <= fit.alpha_hat <= fit.band_hi
        assert fit.fit_blocks == tuple(range(0, 9))


def test_estimator_on_stationary_field_sup_blocks():
    # The sup-norm of a Gaussian block carries a sqrt(log #modes) factor,
    # so the fitted exponent sits visibly below (sigma-d)/2 at this cutoff;
    # the acceptance run uses high blocks at N=4096 where the bias shrinks.
    params = ModelParams(d=1, sigma=2.0, k=3)
    rng = RngStream(7).child(1).generator()
    samples = [sample_stationary(params, 256, rng) for _ in range(200)]
    fit = estimate_regularity(samples, seed=11)
    assert 0.25 < fit.alpha_hat < 0.40


def test_estimator_l2_blocks_hit_known_exponents():
    # Quadratic block means average out the sup-norm log factor, so the
    # known exponents are recovered at a small cutoff already.
    for sigma, target, tol in ((2.0, 0.5, 0.08), (0.75, -0.125, 0.05)):
        params = ModelParams(d=1, sigma=sigma, k=3)
        rng = RngStream(7).child(5).generator()
        samples = [sample_stationary(params, 256, rng) for _ in range(200)]
        fit = estimate_regularity(samples, p=2.0, seed=11)
        assert fit.alpha_hat == pytest.approx(target, abs=tol)


def test_estimator_rejects_degenerate_input():
    with pytest.raises(ValueError, match="too few blocks"):
        estimate_regularity([random_field(Lattice.ball(1, 8), seed=1)])
    with pytest.raises(ValueError, match="no samples"):
        estimate_regularity([])


def test_kernel_integrated_forcing_regularity():
    # The auxiliary field integrates the smoothed cubic forcing, gaining
    # sigma over the forcing's own exponent; its lattice second moments
    # approach the predicted 0.375 decay slowly from below (the exact
    # kernel's local slope only crosses 0.375 near mode 220), so the band
    # here is the measured desk-scale value, not the asymptote.
    config = SimConfig(
        params=load_preset("frac_d1_borderline"),
        N=256,
        dt=0.02,
        t_burn=25.0,
        u_time=0.0,
        master_seed=5,
    )
    result = simulate_ensemble(config, 50, compute_u=False, compute_y=True)
    samples = [
        SpectralField(result.lattice, result.y_coeffs[r]) for r in range(50)
    ]
    fit = estimate_regularity(samples, fit_range=(2, 3, 4, 5, 6), p=2.0, seed=11)
    assert 0.20 < fit.alpha_hat < 0.36


# ---------------------------------------------------------------------
# Smoothing
# ---------------------------------------------------------------------


def test_projection_alone_never_inflates_the_norm():
    for seed in (1, 2, 3):
        lattice = Lattice.ball(1, 64)
        rng = RngStream(100 + seed).child(1).generator()
        f = SpectralField(
            lattice, hermitian_gaussian(lattice, np.ones(lattice.size), rng)
        )
        ratios = smoothing_check(f, 0.3, 0.0, [2, 4, 8, 16, 32, 64, 128])
        assert np.max(ratios) <= 1.0 + 1e-10
        np.testing.assert_allclose(ratios[-2:], 1.0, atol=1e-12)


def test_smoothing_trades_decay_for_smoothness_on_lacunary():
    f = lacunary_field(0.7, 1024)
    ratios = smoothing_check(f, 0.7, 0.35, [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024])
    assert ratios[0] == pytest.approx(0.7845841, abs=1e-6)
    assert ratios[-1] == pytest.approx(0.48296816, abs=1e-6)
    assert np.max(ratios) < 0.9


def test_smoothed_products_of_rough_fields_shrink():
    # Two lacunary factors declared rougher than they are (norm slack
    # 0.2 each); the normalized product norm then decays visibly across
    # the cutoff ladder, wobbling on parity but falling two-step-wise.
    f = lacunary_field(-0.25, 512)
    g = lacunary_field(-0.25, 512, signs=[(-1) ** i for i in range(12)])
    gamma = 1.0
    alpha = -0.45 * 2 + gamma
    values = []
    for N in (4, 8, 16, 32, 64, 128, 256, 512):
        product = pointwise_product(f.project(N), g.project(N), 2 * N)
        values.append(float(N) ** -gamma * besov_norm(product, alpha))
    values = np.array(values)
    assert values[0] == pytest.approx(0.46679, abs=1e-4)
    assert values[-1] == pytest.approx(0.15014, abs=1e-4)
    assert np.all(values[2:] < values[:-2])
    assert values[-1] < 0.35 * values[0]
