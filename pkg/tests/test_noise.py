"""Noise module: stratified midpoints, exact joint draws, coefficient formulas.

Expected values tagged as quadrature oracles were computed with mpmath /
scipy.integrate.quad against the defining integrals and frozen here.
"""

import numpy as np
import pytest
from scipy.integrate import quad

from parlmc import (
    DomainError,
    coeff_a_vanilla,
    coeff_b_kinetic,
    draw_kinetic_noise,
    draw_midpoints,
    draw_vanilla_noise,
    kinetic_covariance,
    psi,
    stream,
)
from parlmc.errors import ConfigurationError
from parlmc.noise import (
    ROLE_MIDPOINTS,
    ROLE_PATH,
    kinetic_coefficient_matrix,
    vanilla_coefficient_matrix,
)

# Frozen quadrature-oracle values (mpmath, 40 digits).
B_ORACLE_J1 = 0.19356576966960984  # gamma=1, h=1, R=2, U_2=0.75, j=1
B_ORACLE_J2 = 0.02880078307140487  # gamma=1, h=1, R=2, U_2=0.75, j=2
VAR_XI_BAR = 0.18126924692201814   # gamma=1, h=0.1
VAR_XI_FULL = 0.0006189190658564340


def _kinetic_integrands(R, gamma, h, U):
    taus = np.append(np.asarray(U) * h, h)

    def g(i):
        if i < R + 1:
            t = taus[i]
            return lambda s: (1 - np.exp(-gamma * (t - s))) if s <= t else 0.0
        return lambda s: np.exp(-gamma * (h - s))

    return g, taus


class TestPsi:
    def test_limit_at_zero(self):
        assert psi(0.0) == 1.0

    def test_reference_value(self):
        assert psi(1.0) == pytest.approx(0.6321205588285577, abs=1e-15)

    def test_tiny_argument_series(self):
        x = 1e-12
        assert abs(psi(x) - (1 - x / 2)) < 1e-15

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            psi(-1e-9)

    def test_decreasing(self):
        xs = np.linspace(0.0, 20.0, 4001)
        vals = psi(xs)
        assert np.all(np.diff(vals) < 0)


class TestMidpoints:
    def test_single_stratum_uniform(self):
        u = draw_midpoints(1, stream(0, 0, ROLE_MIDPOINTS))
        assert u.shape == (1,)
        assert 0.0 <= u[0] < 1.0

    def test_stratified_mean(self):
        u = draw_midpoints(4, stream(1, 0, ROLE_MIDPOINTS), size=100_000)
        # U_3 is uniform on [0.5, 0.75]: mean 0.625, sd of the mean estimator
        m = u[:, 2].mean()
        se = (0.25 / np.sqrt(12)) / np.sqrt(100_000)
        assert abs(m - 0.625) < 3 * se

    def test_bounds_and_order(self):
        u = draw_midpoints(8, stream(2, 5, ROLE_MIDPOINTS), size=2000)
        r = np.arange(8)
        assert np.all(u >= r / 8) and np.all(u <= (r + 1) / 8)
        assert np.all(np.diff(u, axis=-1) > 0)

    def test_deterministic_given_seed(self):
        a = draw_midpoints(4, stream(9, 3, ROLE_MIDPOINTS))
        b = draw_midpoints(4, stream(9, 3, ROLE_MIDPOINTS))
        assert np.array_equal(a, b)

    def test_zero_strata_rejected(self):
        with pytest.raises(ConfigurationError):
            draw_midpoints(0, stream(0, 0, ROLE_MIDPOINTS))


class TestVanillaCoefficients:
    def test_direct_evaluation(self):
        U = np.array([0.1, 0.3, 0.65, 0.9])
        assert coeff_a_vanilla(4, U, 1, 3) == pytest.approx(0.25)
        assert coeff_a_vanilla(4, U, 2, 3) == pytest.approx(0.25)
        assert coeff_a_vanilla(4, U, 3, 3) == pytest.approx(0.15)

    def test_single_stratum_reduction(self):
        assert coeff_a_vanilla(1, np.array([0.37]), 1, 1) == pytest.approx(0.37)

    def test_boundary_zero(self):
        U = np.array([0.0, 0.5])
        assert coeff_a_vanilla(2, U, 1, 1) == 0.0

    def test_index_error(self):
        with pytest.raises(IndexError):
            coeff_a_vanilla(4, np.array([0.1, 0.3, 0.6, 0.9]), 3, 2)

    def test_matrix_matches_scalar(self):
        U = draw_midpoints(5, stream(3, 0, ROLE_MIDPOINTS))
        mat = vanilla_coefficient_matrix(5, U)
        for r in range(1, 6):
            for j in range(1, r + 1):
                assert mat[r - 1, j - 1] == coeff_a_vanilla(5, U, j, r)
            assert np.all(mat[r - 1, r:] == 0.0)
        assert np.all(mat >= 0.0) and np.all(mat <= 1 / 5 + 1e-15)


class TestKineticCoefficients:
    def test_quadrature_oracle(self):
        U = np.array([0.25, 0.75])
        assert coeff_b_kinetic(2, 1.0, 1.0, U, 1, 2) == pytest.approx(B_ORACLE_J1, abs=1e-13)
        assert coeff_b_kinetic(2, 1.0, 1.0, U, 2, 2) == pytest.approx(B_ORACLE_J2, abs=1e-13)

    def test_vanishing_friction_limit(self):
        U = np.array([0.25, 0.75])
        assert abs(coeff_b_kinetic(2, 1e-14, 1.0, U, 1, 2)) < 1e-12

    def test_bounds(self):
        rng = stream(4, 0, ROLE_MIDPOINTS)
        for R in (1, 2, 4, 8):
            U = draw_midpoints(R, rng)
            for r in range(1, R + 1):
                for j in range(1, r + 1):
                    b = coeff_b_kinetic(R, 2.0, 0.05, U, j, r)
                    u2 = (0.05 / R) * min(j, R * U[r - 1])
                    u1 = (j - 1) * 0.05 / R
                    assert 0.0 <= b <= u2 - u1 + 1e-15

    def test_matrix_matches_scalar(self):
        U = draw_midpoints(4, stream(5, 0, ROLE_MIDPOINTS))
        mat = kinetic_coefficient_matrix(4, 1.5, 0.1, U)
        for r in range(1, 5):
            for j in range(1, r + 1):
                assert mat[r - 1, j - 1] == pytest.approx(
                    coeff_b_kinetic(4, 1.5, 0.1, U, j, r), rel=1e-14
                )

    def test_prefix_sum_telescopes(self):
        # sum_{j<=r} b_j equals the integral over [0, U_r h]: h U_r - (1 - e^{-gamma h U_r}) / gamma
        gamma, h, R = 1.3, 0.7, 4
        U = np.arange(1, R + 1) / R  # right endpoints: each b_j covers its full stratum
        for r in range(1, R + 1):
            total = sum(coeff_b_kinetic(R, gamma, h, U, j, r) for j in range(1, r + 1))
            closed = h * U[r - 1] - (1 - np.exp(-gamma * h * U[r - 1])) / gamma
            oracle = quad(lambda s: 1 - np.exp(-gamma * (U[r - 1] * h - s)), 0, U[r - 1] * h)[0]
            assert total == pytest.approx(closed, rel=1e-12)
            assert total == pytest.approx(oracle, rel=1e-10)


class TestVanillaNoise:
    def test_full_increment_variance(self):
        U = draw_midpoints(1, stream(6, 0, ROLE_MIDPOINTS), size=100_000)
        d = draw_vanilla_noise(1, 0.1, 1, U, stream(6, 0, ROLE_PATH))
        var = d.xi_full[:, 0].var(ddof=1)
        se = 0.2 * np.sqrt(2 / (100_000 - 1))
        assert abs(var - 0.2) < 3 * se

    def test_midpoint_cross_covariance(self):
        U = np.array([0.3, 0.7])
        d = draw_vanilla_noise(2, 0.1, 1, U, stream(7, 0, ROLE_PATH), size=100_000)
        cov = np.cov(d.xi_mid[:, 0, 0], d.xi_mid[:, 1, 0])[0, 1]
        # 2 h min(U) = 0.06; SE of the covariance estimator
        se = np.sqrt((2 * 0.1 * 0.3 * 2 * 0.1 * 0.7 + 0.06**2) / (100_000 - 1))
        assert abs(cov - 0.06) < 3 * se

    def test_terminal_gap_variance(self):
        U = np.array([0.4])
        d = draw_vanilla_noise(1, 0.1, 1, U, stream(8, 0, ROLE_PATH), size=100_000)
        gap = d.xi_full[:, 0] - d.xi_mid[:, 0, 0]
        target = 2 * 0.1 * (1 - 0.4)
        se = target * np.sqrt(2 / (100_000 - 1))
        assert abs(gap.var(ddof=1) - target) < 3 * se

    def test_deterministic_given_seed(self):
        U = draw_midpoints(3, stream(10, 2, ROLE_MIDPOINTS))
        a = draw_vanilla_noise(3, 0.05, 4, U, stream(10, 2, ROLE_PATH))
        b = draw_vanilla_noise(3, 0.05, 4, U, stream(10, 2, ROLE_PATH))
        assert np.array_equal(a.xi_mid, b.xi_mid) and np.array_equal(a.xi_full, b.xi_full)


class TestKineticCovariance:
    def test_xi_bar_variance(self):
        cov = kinetic_covariance(1, 1.0, 0.1, np.array([0.5]))
        assert cov[2, 2] == pytest.approx(VAR_XI_BAR, rel=1e-13)

    def test_xi_full_variance(self):
        cov = kinetic_covariance(1, 1.0, 0.1, np.array([0.5]))
        assert cov[1, 1] == pytest.approx(VAR_XI_FULL, rel=1e-12)

    def test_large_friction_limit(self):
        cov = kinetic_covariance(1, 1e3, 0.1, np.array([0.5]))
        assert cov[2, 2] == pytest.approx(1e-3, rel=1e-12)

    @pytest.mark.parametrize("R", [1, 2, 4, 8])
    @pytest.mark.parametrize("eta", [0.01, 0.05, 0.1])
    def test_matches_quadrature_on_grid(self, R, eta):
        gamma = 2.0
        h = eta / gamma
        # stratum midpoints plus one seeded draw
        for U in ((np.arange(R) + 0.5) / R, draw_midpoints(R, stream(11, R, ROLE_MIDPOINTS))):
            cov = kinetic_covariance(R, gamma, h, U)
            g, taus = _kinetic_integrands(R, gamma, h, U)
            for i in range(R + 2):
                for j in range(i + 1):
                    val = 2 * quad(
                        lambda s: g(i)(s) * g(j)(s), 0, h,
                        points=list(taus), limit=200, epsabs=1e-16, epsrel=1e-13,
                    )[0]
                    assert cov[i, j] == pytest.approx(val, rel=1e-10, abs=1e-18)

    def test_symmetric_psd(self):
        U = draw_midpoints(6, stream(12, 0, ROLE_MIDPOINTS))
        cov = kinetic_covariance(6, 3.0, 0.02, U)
        assert np.array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() > -1e-10


class TestKineticNoise:
    def test_monte_carlo_covariance(self):
        R, gamma, h = 2, 1.0, 0.1
        U = np.array([0.2, 0.8])
        d = draw_kinetic_noise(R, gamma, h, 1, U, stream(13, 0, ROLE_PATH), size=100_000)
        x = np.concatenate([d.xi_mid[:, :, 0], d.xi_full, d.xi_bar], axis=1)
        emp = np.cov(x, rowvar=False)
        ana = kinetic_covariance(R, gamma, h, U)
        se = np.sqrt((np.outer(np.diag(ana), np.diag(ana)) + ana**2) / (100_000 - 1))
        assert np.all(np.abs(emp - ana) < 3 * se)

    def test_position_noise_higher_order_than_velocity(self):
        # Var(xi_full) ~ h^3 while Var(xi_bar) ~ h: ratio vanishes as h -> 0
        cov = kinetic_covariance(1, 1.0, 1e-4, np.array([0.5]))
        assert cov[1, 1] / cov[2, 2] < 1e-3

    def test_deterministic_given_seed(self):
        U = draw_midpoints(2, stream(14, 1, ROLE_MIDPOINTS))
        a = draw_kinetic_noise(2, 1.0, 0.1, 3, U, stream(14, 1, ROLE_PATH))
        b = draw_kinetic_noise(2, 1.0, 0.1, 3, U, stream(14, 1, ROLE_PATH))
        assert np.array_equal(a.xi_bar, b.xi_bar) and np.array_equal(a.xi_mid, b.xi_mid)


def test_streams_differ_across_keys():
    base = stream(21, 0, ROLE_PATH).standard_normal(4)
    assert not np.array_equal(base, stream(21, 1, ROLE_PATH).standard_normal(4))
    assert not np.array_equal(base, stream(21, 0, ROLE_MIDPOINTS).standard_normal(4))
    assert not np.array_equal(base, stream(22, 0, ROLE_PATH).standard_normal(4))
