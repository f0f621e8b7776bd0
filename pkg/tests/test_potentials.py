"""Potential oracles: gradients, curvature constants, accounting, CSV ingestion."""

import numpy as np
import pytest

from parlmc import (
    ConfigurationError,
    DomainError,
    LogisticRidgePotential,
    QuadraticPotential,
    SyntheticDelayPotential,
    check_gradient_fd,
    gradient_batch,
)


class TestQuadraticGradient:
    def test_identity(self):
        pot = QuadraticPotential(np.eye(2))
        assert np.allclose(pot.gradient([1.0, 2.0]), [1.0, 2.0])

    def test_shifted_diagonal(self):
        pot = QuadraticPotential.from_diagonal([1.0, 10.0], mean=[1.0, 0.0])
        assert np.allclose(pot.gradient([2.0, 1.0]), [1.0, 10.0])

    def test_spec_constants_are_extreme_eigenvalues(self):
        a = np.array([[2.0, 0.5], [0.5, 1.0]])
        pot = QuadraticPotential(a)
        eigs = np.linalg.eigvalsh(a)
        assert pot.spec.strong_convexity == pytest.approx(eigs[0])
        assert pot.spec.smoothness == pytest.approx(eigs[-1])
        assert pot.spec.condition_number == pytest.approx(eigs[-1] / eigs[0])

    def test_rejects_asymmetric(self):
        with pytest.raises(ConfigurationError):
            QuadraticPotential(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ConfigurationError):
            QuadraticPotential(np.array([[1.0, 0.0], [0.0, -0.5]]))

    def test_dimension_mismatch(self, quad_2d):
        with pytest.raises(ConfigurationError):
            quad_2d.gradient([1.0, 2.0, 3.0])

    def test_nonfinite_input(self, quad_2d):
        with pytest.raises(DomainError):
            quad_2d.gradient([np.nan, 0.0])


class TestLogisticGradient:
    def test_single_datum_at_origin(self):
        pot = LogisticRidgePotential(np.array([[1.0, 0.0]]), np.array([1.0]), ridge=1.0)
        assert np.allclose(pot.gradient([0.0, 0.0]), [-0.5, 0.0])

    def test_constants(self, logistic_small):
        smax = np.linalg.svd(logistic_small.X, compute_uv=False)[0]
        assert logistic_small.spec.strong_convexity == pytest.approx(0.7)
        assert logistic_small.spec.smoothness == pytest.approx(0.7 + smax**2 / 4)

    def test_labels_validated(self):
        with pytest.raises(ConfigurationError):
            LogisticRidgePotential(np.ones((3, 2)), np.array([1.0, 0.0, -1.0]), ridge=1.0)

    def test_minimizer_is_stationary(self, logistic_small):
        spec = logistic_small.spec
        g = logistic_small.gradient(spec.minimizer)
        bound = 1e-8 * spec.smoothness * (1 + np.linalg.norm(spec.minimizer))
        assert np.linalg.norm(g) <= bound


class TestCurvatureSandwich:
    """Testable forms of m I <= Hessian <= M I over random pairs."""

    @pytest.mark.parametrize("fixture", ["quad_2d", "logistic_small"])
    def test_monotonicity_and_lipschitz(self, fixture, request):
        pot = request.getfixturevalue(fixture)
        m, M = pot.spec.strong_convexity, pot.spec.smoothness
        p = pot.spec.dimension
        rng = np.random.default_rng(99)
        a = rng.standard_normal((1200, p)) * 2
        b = rng.standard_normal((1200, p)) * 2
        ga = pot.gradient(a)
        gb = pot.gradient(b)
        diff = a - b
        gdiff = ga - gb
        inner = np.sum(gdiff * diff, axis=-1)
        sq = np.sum(diff * diff, axis=-1)
        assert np.all(inner >= m * sq * (1 - 1e-10))
        assert np.all(np.sum(gdiff**2, axis=-1) <= (M**2) * sq * (1 + 1e-10))


class TestBatchAndCounter:
    def test_batch_matches_elementwise(self, quad_2d):
        rng = np.random.default_rng(5)
        points = [rng.standard_normal(2) for _ in range(6)]
        batched = gradient_batch(quad_2d, points, parallel_width=3)
        for point, g in zip(points, batched):
            assert np.array_equal(g, quad_2d.gradient(point))

    def test_round_accounting(self, quad_2d):
        quad_2d.counter.reset()
        points = [np.zeros(2)] * 4
        gradient_batch(quad_2d, points, parallel_width=4)
        assert quad_2d.counter.sequential_rounds == 1
        gradient_batch(quad_2d, points, parallel_width=2)
        assert quad_2d.counter.sequential_rounds == 3  # += ceil(4/2)
        assert quad_2d.counter.total_gradient_evals == 8

    def test_gradient_vanishes_at_minimizer(self, quad_2d):
        [g] = gradient_batch(quad_2d, [quad_2d.spec.minimizer], parallel_width=1)
        assert np.allclose(g, 0.0, atol=1e-12)

    def test_concurrent_counting_exact(self, quad_2d):
        quad_2d.counter.reset()
        gradient_batch(quad_2d, [np.zeros(2)] * 64, parallel_width=8)
        assert quad_2d.counter.total_gradient_evals == 64
        assert quad_2d.counter.sequential_rounds == 8


class TestFiniteDifferences:
    def test_quadratic_near_exact(self, quad_2d):
        rng = np.random.default_rng(1)
        for _ in range(5):
            err = check_gradient_fd(quad_2d, rng.standard_normal(2), step=1e-5)
            assert err < 1e-8

    def test_logistic(self, logistic_small):
        rng = np.random.default_rng(2)
        for _ in range(5):
            err = check_gradient_fd(logistic_small, rng.standard_normal(3), step=1e-5)
            assert err < 1e-6

    def test_zero_step_rejected(self, quad_2d):
        with pytest.raises(DomainError):
            check_gradient_fd(quad_2d, np.zeros(2), step=0.0)


class TestCsvIngestion:
    def _write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        return path

    def test_round_trip(self, tmp_path):
        path = self._write(tmp_path, "y,x1,x2\n1,0.5,-1.0\n-1,0.1,0.2\n1,-0.3,0.9\n")
        pot = LogisticRidgePotential.from_csv(path, ridge=0.5)
        assert pot.spec.dimension == 2
        assert pot.X.shape == (3, 2)
        assert np.array_equal(pot.y, [1.0, -1.0, 1.0])

    def test_bad_header(self, tmp_path):
        path = self._write(tmp_path, "label,x1\n1,0.5\n")
        with pytest.raises(ConfigurationError, match="header"):
            LogisticRidgePotential.from_csv(path, ridge=0.5)

    def test_bad_label_reports_line(self, tmp_path):
        path = self._write(tmp_path, "y,x1\n1,0.5\n2,0.3\n")
        with pytest.raises(ConfigurationError, match=":3:"):
            LogisticRidgePotential.from_csv(path, ridge=0.5)

    def test_short_row_reports_line(self, tmp_path):
        path = self._write(tmp_path, "y,x1,x2\n1,0.5,0.2\n-1,0.1\n")
        with pytest.raises(ConfigurationError, match=":3:"):
            LogisticRidgePotential.from_csv(path, ridge=0.5)

    def test_non_numeric_reports_line(self, tmp_path):
        path = self._write(tmp_path, "y,x1\n1,abc\n")
        with pytest.raises(ConfigurationError, match=":2:"):
            LogisticRidgePotential.from_csv(path, ridge=0.5)


def test_delay_potential_sleeps():
    pot = SyntheticDelayPotential(2, 0.01)
    import time

    t0 = time.perf_counter()
    pot.gradient(np.ones(2))
    assert time.perf_counter() - t0 >= 0.01
