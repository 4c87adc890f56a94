import numpy as np
import pytest
from scipy.stats import norm

from emldiff import rng as _rng
from emldiff.bridge import BridgeConfig
from emldiff.likelihood import (
    _ou_negloglik_grad,
    _phi1,
    _phi1_prime,
    euler_loglik_gap,
    euler_transition_density,
    ou_exact_loglik,
    ou_ml_fit,
    profile_likelihood,
    rogers_density,
    sml_series_loglik,
    sml_transition_density,
)
from emldiff.models import (
    ObservationSeries,
    UnitDiffusionModel,
    cir_volatility,
    const_basis,
    euler_simulate,
    ou_exact_sample,
    ou_exact_transition,
    ou_model,
    zero_offset,
)

ZERO_MODEL = UnitDiffusionModel(label="zero", offset=zero_offset(), basis=(const_basis(),))
CONST_MODEL = ZERO_MODEL  # theta picks the constant


def exact_ou_density(a0, a1, x, y, delta):
    mean, var = ou_exact_transition(a0, a1, x, delta)
    return float(norm.pdf(y, loc=mean, scale=np.sqrt(var)))


class TestEulerDensity:
    def test_standard_normal_peak(self):
        got = euler_transition_density(ZERO_MODEL, (0.0,), 1.3, 1.3, 1.0)
        assert got == pytest.approx(1.0 / np.sqrt(2 * np.pi), rel=1e-14)

    def test_quarter_variance(self):
        got = euler_transition_density(ZERO_MODEL, (0.0,), 1.3, 1.3, 0.25)
        assert got == pytest.approx(2.0 / np.sqrt(2 * np.pi), rel=1e-14)

    def test_linear_model_off_peak(self):
        # drift vanishes at x=4, so this is phi(4.1; 4, 1/12): cross-checked
        # against scipy.stats.norm
        got = euler_transition_density(ou_model(), (10.0, 2.5), 4.0, 4.1, 1 / 12)
        assert got == pytest.approx(norm.pdf(4.1, 4.0, np.sqrt(1 / 12)), rel=1e-13)
        assert got == pytest.approx(1.3014965461318, rel=1e-10)


class TestSmlDensity:
    def test_single_interval_equals_euler(self):
        d = sml_transition_density(ou_model(), (10.0, 2.5), 4.0, 4.1, 1 / 12, M=1, S=100, seed=1)
        assert d.value == euler_transition_density(ou_model(), (10.0, 2.5), 4.0, 4.1, 1 / 12)
        assert d.stderr == 0.0

    @pytest.mark.parametrize("M", [2, 5, 30])
    def test_zero_drift_weights_collapse(self, M):
        # every importance weight telescopes to phi(y; x, Delta)
        d = sml_transition_density(ZERO_MODEL, (0.0,), 0.3, 0.7, 1 / 12, M=M, S=1000, seed=2)
        target = float(norm.pdf(0.7, 0.3, np.sqrt(1 / 12)))
        assert d.value == pytest.approx(target, rel=1e-12)
        assert d.stderr < 1e-12 * target

    def test_matches_exact_linear_density(self):
        exact = exact_ou_density(10.0, 2.5, 4.0, 4.0, 1 / 12)
        d = sml_transition_density(ou_model(), (10.0, 2.5), 4.0, 4.0, 1 / 12, M=30, S=20_000, seed=42)
        assert abs(d.value - exact) / exact < 0.02
        assert d.stderr < 0.01 * exact

    def test_integrates_to_one(self):
        # shared seed across the y-grid, trapezoid over +-6 transition sds
        mean, var = ou_exact_transition(10.0, 2.5, 4.0, 1 / 12)
        sd = np.sqrt(var)
        ys = np.linspace(mean - 6 * sd, mean + 6 * sd, 61)
        vals = [
            sml_transition_density(ou_model(), (10.0, 2.5), 4.0, float(y), 1 / 12, M=30, S=10_000, seed=55).value
            for y in ys
        ]
        integral = np.trapezoid(vals, ys)
        assert abs(integral - 1.0) < 0.01

    def test_undefined_drift_along_paths_reported(self):
        # sqrt drift is undefined below zero; bridge paths that dip negative
        # produce non-finite weights and a diagnostic failure
        from emldiff.likelihood import EstimationError
        from emldiff.models import BasisFunction

        sqrt_model = UnitDiffusionModel(
            label="sqrt", offset=zero_offset(),
            basis=(BasisFunction(fn=lambda x: np.sqrt(x), label="sqrt(x)"),),
        )
        with np.errstate(invalid="ignore"), pytest.raises(EstimationError, match="non-finite"):
            sml_transition_density(sqrt_model, (1.0,), 0.05, 0.05, 1.0, M=20, S=200, seed=3)

    def test_series_loglik_common_random_numbers(self):
        ser = ou_exact_sample(10.0, 2.5, 4.0, 1 / 12, 30, _rng.substream(5, _rng.DATA, 0))
        a = sml_series_loglik(ser, ou_model(), (10.0, 2.5), M=10, S=200, seed=9)
        b = sml_series_loglik(ser, ou_model(), (10.0, 2.5), M=10, S=200, seed=9)
        assert a == b

    def test_series_loglik_tracks_exact(self):
        ser = ou_exact_sample(10.0, 2.5, 4.0, 1 / 12, 200, _rng.substream(6, _rng.DATA, 0))
        approx = sml_series_loglik(ser, ou_model(), (10.0, 2.5), M=20, S=500, seed=4)
        exact = ou_exact_loglik(ser, 10.0, 2.5)
        assert abs(approx - exact) < 0.02 * abs(exact) + 1.0


class TestExactLinearLikelihood:
    def test_unimodal_in_a0_at_stationary_pair(self):
        ser = ObservationSeries(np.array([4.0, 4.0]), 1 / 12)
        center = ou_exact_loglik(ser, 10.0, 2.5)
        assert center > ou_exact_loglik(ser, 11.0, 2.5)
        assert center > ou_exact_loglik(ser, 9.0, 2.5)

    def test_relaxation_factor_series_branch(self):
        for z in (1e-7, 1e-5, 1e-3, 0.5):
            assert _phi1(z) == pytest.approx((1 - np.exp(-z)) / z, rel=1e-9)
        # derivative: series branch for tiny z (the direct formula cancels there)
        for z in (1e-7, 1e-5):
            assert _phi1_prime(z) == pytest.approx(-0.5 + z / 3.0, abs=1e-9)
        for z in (1e-3, 0.5, 2.0):
            h = 1e-6
            fd = ((1 - np.exp(-(z + h))) / (z + h) - (1 - np.exp(-(z - h))) / (z - h)) / (2 * h)
            assert _phi1_prime(z) == pytest.approx(fd, abs=1e-7)

    def test_gradient_matches_finite_differences(self):
        ser = ou_exact_sample(10.0, 2.5, 4.0, 1 / 12, 300, _rng.substream(7, _rng.DATA, 0))
        left, right = ser.x[:-1], ser.x[1:]
        theta = np.array([9.3, 2.1])
        _, grad = _ou_negloglik_grad(theta, left, right, ser.delta_obs)
        eps = 1e-6
        for i in range(2):
            d = np.zeros(2)
            d[i] = eps
            fp, _ = _ou_negloglik_grad(theta + d, left, right, ser.delta_obs)
            fm, _ = _ou_negloglik_grad(theta - d, left, right, ser.delta_obs)
            assert grad[i] == pytest.approx((fp - fm) / (2 * eps), rel=1e-5)

    def test_fit_consistency_within_asymptotic_error(self):
        ser = ou_exact_sample(10.0, 2.5, 4.0, 1 / 12, 10_000, _rng.substream(8, _rng.DATA, 0))
        a0, a1 = ou_ml_fit(ser)
        # asymptotic standard errors from the finite-difference Hessian
        left, right = ser.x[:-1], ser.x[1:]
        eps = 1e-4
        H = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                th = np.array([a0, a1])
                di, dj = np.zeros(2), np.zeros(2)
                di[i] = eps
                dj[j] = eps
                fpp, _ = _ou_negloglik_grad(th + di + dj, left, right, ser.delta_obs)
                fpm, _ = _ou_negloglik_grad(th + di - dj, left, right, ser.delta_obs)
                fmp, _ = _ou_negloglik_grad(th - di + dj, left, right, ser.delta_obs)
                fmm, _ = _ou_negloglik_grad(th - di - dj, left, right, ser.delta_obs)
                H[i, j] = (fpp - fpm - fmp + fmm) / (4 * eps * eps)
        se = np.sqrt(np.diag(np.linalg.inv(H)))
        assert abs(a0 - 10.0) < 3 * se[0]
        assert abs(a1 - 2.5) < 3 * se[1]

    def test_fit_beats_perturbed_loglik(self):
        ser = ou_exact_sample(10.0, 2.5, 4.0, 1 / 12, 500, _rng.substream(9, _rng.DATA, 0))
        a0, a1 = ou_ml_fit(ser)
        best = ou_exact_loglik(ser, a0, a1)
        assert best >= ou_exact_loglik(ser, a0 + 0.3, a1)
        assert best >= ou_exact_loglik(ser, a0, a1 + 0.2)


class TestRogersDensity:
    def test_zero_drift_is_plain_gaussian(self):
        d = rogers_density(ZERO_MODEL, (0.0,), 0.2, 0.5, 0.3, S=64, seed=1)
        assert d.value == float(norm.pdf(0.5, 0.2, np.sqrt(0.3)))

    def test_constant_drift_shifted_normal_identity(self):
        c, x0, x, delta = 1.7, 0.2, 0.5, 0.3
        d = rogers_density(CONST_MODEL, (c,), x0, x, delta, S=64, seed=1)
        shifted = float(norm.pdf(x, x0 + c * delta, np.sqrt(delta)))
        assert abs(d.value - shifted) <= 1e-10 * shifted
        assert d.stderr < 1e-12

    def test_matches_exact_linear_density(self):
        exact = exact_ou_density(10.0, 2.5, 4.0, 4.1, 1 / 12)
        d = rogers_density(ou_model(), (10.0, 2.5), 4.0, 4.1, 1 / 12, S=20_000, seed=3)
        assert abs(d.value - exact) / exact < 0.02

    def test_agrees_with_bridge_sampler_estimate(self):
        # the two Monte Carlo routes agree within 3 combined standard errors
        # at every probe pair
        probes = ((4.0, 4.0), (4.0, 4.2), (4.0, 3.8), (3.8, 4.1), (4.2, 3.9))
        for i, (x, y) in enumerate(probes):
            ds = sml_transition_density(ou_model(), (10.0, 2.5), x, y, 1 / 12, M=30, S=20_000, seed=70 + i)
            dr = rogers_density(ou_model(), (10.0, 2.5), x, y, 1 / 12, S=20_000, seed=80 + i)
            # allow for the O(1/M) lattice bias of the bridge route on top of
            # the Monte Carlo spread
            bias_allowance = 0.005 * ds.value
            assert abs(ds.value - dr.value) < 3 * np.hypot(ds.stderr, dr.stderr) + bias_allowance, (x, y)

    def test_time_lattice_refinement_stable(self):
        # doubling the inner bridge lattice moves the value by < 0.2%
        d64 = rogers_density(ou_model(), (10.0, 2.5), 4.0, 4.1, 1 / 12, S=20_000, seed=3, bridge_steps=64)
        d128 = rogers_density(ou_model(), (10.0, 2.5), 4.0, 4.1, 1 / 12, S=20_000, seed=3, bridge_steps=128)
        assert abs(d128.value - d64.value) / d64.value < 0.002


class TestEulerLoglikGap:
    def test_zero_drift_gap_is_exactly_zero(self):
        gap, se = euler_loglik_gap(0.0, 0.0, 1.0, 1.0, 1.0, M=10, S=200, seed=2, theta_grid=[(0.0, 0.0)])
        assert gap == 0.0 and se == 0.0

    def test_gap_decreases_with_refinement(self):
        gaps = {}
        for M in (5, 10, 20, 40):
            gaps[M] = euler_loglik_gap(10.0, 2.5, 4.0, 4.0, 1 / 12, M=M, S=4000, seed=9)
        ms = [5, 10, 20, 40]
        for a, b in zip(ms, ms[1:]):
            g_a, se_a = gaps[a]
            g_b, se_b = gaps[b]
            assert g_b < g_a + 2 * np.hypot(se_a, se_b), f"M={a}->{b}"
        g5, se5 = gaps[5]
        g40, se40 = gaps[40]
        assert g5 - g40 > 2 * np.hypot(se5, se40)

    def test_requires_interior_states(self):
        with pytest.raises(ValueError, match="M must be"):
            euler_loglik_gap(1.0, 1.0, 0.0, 0.0, 1.0, M=1, S=10, seed=0)


class TestProfileLikelihood:
    def _square_root_series(self, K=300, seed=21, sigma=0.5):
        from emldiff.models import cir_unit_model, cir_unit_params

        b = cir_unit_params(2.0, 1.0, sigma)
        y0 = 2.0 / sigma
        yser = euler_simulate(cir_unit_model(), b, y0, 1 / 52, K, 20, _rng.substream(seed, _rng.DATA, 0))
        return ObservationSeries((sigma * yser.x / 2.0) ** 2, 1 / 52)

    def test_all_points_valid_and_finite(self):
        ser = self._square_root_series()
        prof = profile_likelihood(
            ser, cir_volatility(sigma=0.5), [(0.3,), (0.5,), (0.8,)],
            BridgeConfig(M=5, S=30, seed=3), BridgeConfig(M=5, S=40, seed=4),
        )
        assert np.all(prof.valid)
        assert np.all(np.isfinite(prof.loglik))
        assert np.all(np.isfinite(prof.theta_star))

    def test_constant_increment_series_smoke(self):
        ser = ObservationSeries(1.0 + 0.01 * np.arange(21), 1 / 52)
        prof = profile_likelihood(
            ser, cir_volatility(sigma=0.5), [(0.3,), (0.6,), (0.9,)],
            BridgeConfig(M=4, S=20, seed=5), BridgeConfig(M=4, S=30, seed=6),
        )
        assert np.all(np.isfinite(prof.loglik[prof.valid]))
        assert prof.valid.sum() == 3

    def test_pure_function_of_inputs(self):
        ser = self._square_root_series(K=80)
        args = (ser, cir_volatility(sigma=0.5), [(0.4,), (0.6,)],
                BridgeConfig(M=4, S=20, seed=7), BridgeConfig(M=4, S=25, seed=8))
        p1, p2 = profile_likelihood(*args), profile_likelihood(*args)
        assert np.array_equal(p1.loglik, p2.loglik)
        assert np.array_equal(p1.theta_star, p2.theta_star)

    def test_invalid_grid_point_marked_not_fatal(self):
        # negative-reaching series breaks the square-root transform domain
        ser = ObservationSeries(np.array([1.0, 0.5, -0.2, 0.4]), 1 / 52)
        with np.errstate(invalid="ignore"):
            prof = profile_likelihood(
                ser, cir_volatility(sigma=0.5), [(0.5,)],
                BridgeConfig(M=3, S=10, seed=1), BridgeConfig(M=3, S=10, seed=1),
            )
        assert not prof.valid[0]
        assert np.isnan(prof.loglik[0])

    def test_csv_round_trip_columns(self, tmp_path):
        ser = self._square_root_series(K=60)
        prof = profile_likelihood(
            ser, cir_volatility(sigma=0.5), [(0.4,), (0.6,)],
            BridgeConfig(M=3, S=15, seed=2), BridgeConfig(M=3, S=20, seed=2),
        )
        out = tmp_path / "prof.csv"
        prof.to_csv(out)
        lines = [l for l in out.read_text().split("\n") if l and not l.startswith("#")]
        assert lines[0] == "vartheta_1,loglik,theta_star_0,theta_star_1,valid"
        assert len(lines) == 3
