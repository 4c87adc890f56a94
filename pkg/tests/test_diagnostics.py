import math

import numpy as np
import pytest

from emldiff import rng as _rng
from emldiff.bridge import sample_ou_bridge_paths
from emldiff.diagnostics import (
    BridgeFunctional,
    DriftEnvelope,
    check_expectation_bound,
    drift_envelope,
    envelope_bound,
    rn_histogram,
    rn_samples,
    standard_functionals,
)
from emldiff.models import (
    UnitDiffusionModel,
    ait_sahalia_volatility,
    const_basis,
    lamperti_transform,
    ou_model,
    quadratic_model,
    zero_offset,
)

CONST_MODEL = UnitDiffusionModel(label="const", offset=zero_offset(), basis=(const_basis(),))


class TestRnSamples:
    def test_constant_drift_deterministic_density(self):
        # integrand is c^2 everywhere: every sample is exp(-Delta c^2 / 2)
        c, Delta = 2.0, 0.5
        s = rn_samples(CONST_MODEL, (c,), 0.0, 1.0, Delta, M=10, S=100, seed=1)
        expected = math.exp(-0.5 * Delta * c * c)
        assert np.all(s.raw == s.raw[0])
        assert s.raw[0] == pytest.approx(expected, rel=1e-12)
        assert np.all(s.normalized == 1.0)
        assert np.var(s.normalized) == 0.0

    def test_raw_values_positive(self):
        s = rn_samples(ou_model(), (10.0, 2.5), 4.0, 4.1, 1 / 12, M=20, S=2000, seed=2)
        assert np.all(s.raw > 0)
        assert np.mean(s.normalized) == pytest.approx(1.0, abs=1e-12)

    def test_independent_normalizer_unbiased(self):
        # normalizing one batch by another batch's mean recovers 1 up to MC error
        kwargs = dict(model=ou_model(), theta=(10.0, 2.5), x=4.0, y=4.1, Delta=1 / 12, M=20, S=20_000)
        s1 = rn_samples(seed=10, **kwargs)
        s2 = rn_samples(seed=11, **kwargs)
        ratio = np.mean(s1.raw) / np.mean(s2.raw)
        rel_se = np.hypot(
            np.std(s1.raw, ddof=1) / (np.mean(s1.raw) * np.sqrt(s1.raw.size)),
            np.std(s2.raw, ddof=1) / (np.mean(s2.raw) * np.sqrt(s2.raw.size)),
        )
        assert abs(ratio - 1.0) < 3 * rel_se

    def test_time_discretization_stable(self):
        # doubling the lattice moves the mean density by < 0.5% on all
        # built-in test models
        tf = lamperti_transform(ait_sahalia_volatility(0.001, 3.0))
        cases = [
            (ou_model(), (10.0, 2.5), 4.0, 4.1),
            (quadratic_model(), (1.0, -1.0, -0.5), 1.0, 1.2),
            (tf.model, (0.1, -1.0, -10.0), float(tf.forward(0.04)), float(tf.forward(0.05))),
        ]
        for model, theta, x, y in cases:
            m1 = np.mean(rn_samples(model, theta, x, y, 1 / 12, M=20, S=40_000, seed=3).raw)
            m2 = np.mean(rn_samples(model, theta, x, y, 1 / 12, M=40, S=40_000, seed=3).raw)
            assert abs(m2 - m1) / m1 < 0.005, model.label

    def test_overflow_guarded(self):
        steep = UnitDiffusionModel(label="steep", offset=zero_offset(), basis=(const_basis(),))
        with pytest.raises(FloatingPointError, match="overflow"):
            rn_samples(steep, (300.0,), 0.0, 0.0, 1.0, M=10, S=10, seed=1)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            rn_samples(CONST_MODEL, (1.0,), 0.0, 1.0, 0.5, M=1, S=10, seed=0)


class TestExpectationBound:
    def test_zero_functional_equality(self):
        g0 = BridgeFunctional(lambda p: np.zeros(p.shape[:-1]), "zero", 0)
        rep = check_expectation_bound(ou_model(), (10.0, 2.5), 4.0, 4.0, 1 / 12, g0, M=10, S=500, seed=4)
        assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.holds

    def test_constant_functional_holds(self):
        g3 = BridgeFunctional(lambda p: np.full(p.shape[:-1], 3.0), "three", 0)
        rep = check_expectation_bound(ou_model(), (10.0, 2.5), 4.0, 4.0, 1 / 12, g3, M=10, S=500, seed=5)
        assert rep.lhs < 1e-12
        assert rep.holds

    def test_zero_drift_laws_coincide(self):
        g = BridgeFunctional(lambda p: np.mean(p[..., 1:-1], axis=-1), "mean", 1)
        rep = check_expectation_bound(CONST_MODEL, (0.0,), 0.3, -0.2, 0.5, g, M=16, S=20_000, seed=6)
        assert rep.lhs < 3 * rep.lhs_se + 1e-12
        assert rep.holds

    def test_linear_model_with_exact_oracle(self):
        a0, a1, x, y, Delta, M = 10.0, 2.5, 4.0, 4.0, 1 / 12, 30

        def oracle(S, rng):
            return sample_ou_bridge_paths(a0, a1, x, y, M, Delta / M, S, rng)

        g = BridgeFunctional(lambda p: np.mean(p[..., 1:-1], axis=-1), "path-mean", 1)
        rep = check_expectation_bound(
            ou_model(), (a0, a1), x, y, Delta, g, M=M, S=10_000, seed=7, exact_bridge_sampler=oracle
        )
        assert rep.holds

    def test_full_suite_holds(self):
        tf = lamperti_transform(ait_sahalia_volatility(0.001, 3.0))
        cases = [
            (ou_model(), (10.0, 2.5), 4.0, 4.0),
            (quadratic_model(), (1.0, -1.0, -0.5), 1.0, 1.2),
            (tf.model, (0.1, -1.0, -10.0), float(tf.forward(0.04)), float(tf.forward(0.05))),
        ]
        funcs = standard_functionals()
        assert len(funcs) == 10
        for model, theta, x, y in cases:
            for fi, g in enumerate(funcs):
                rep = check_expectation_bound(model, theta, x, y, 1 / 12, g, M=30, S=4000, seed=100 + fi)
                assert rep.holds, f"{model.label}:{g.label}"


class TestEnvelope:
    def test_constant_drift(self):
        env = drift_envelope(CONST_MODEL, (3.0,), (-1.0, 1.0), 101)
        assert env.sup_val == 9.0 and env.inf_val == 9.0
        assert not env.may_be_unbounded

    def test_linear_drift_narrow_interval(self):
        # mu = -z: integrand z^2 - 1 has min -1 at 0, max 3 at the ends
        env = drift_envelope(ou_model(), (0.0, 1.0), (-2.0, 2.0), 4001)
        assert env.sup_val == pytest.approx(3.0, abs=1e-6)
        assert env.inf_val == pytest.approx(-1.0, abs=1e-9)

    def test_linear_drift_wide_interval_flagged(self):
        env = drift_envelope(ou_model(), (0.0, 1.0), (-10.0, 10.0), 4001)
        assert env.sup_val == pytest.approx(99.0, abs=1e-6)
        assert env.may_be_unbounded

    def test_bounded_periodic_drift_not_flagged(self):
        # sin drift: integrand a*cos(z) + a^2 sin(z)^2 is globally bounded, so
        # the closed-form bound stays finite and useful on wide intervals
        from emldiff.models import BasisFunction

        periodic = UnitDiffusionModel(
            label="periodic", offset=zero_offset(),
            basis=(BasisFunction(fn=np.sin, label="sin", deriv=np.cos),),
        )
        env = drift_envelope(periodic, (0.8,), (-20.0, 20.0), 8001)
        assert not env.may_be_unbounded
        assert env.sup_val <= 0.8 + 0.64 + 1e-9
        assert np.isfinite(envelope_bound(env, 0.5, 1.0))

    def test_interval_validation(self):
        with pytest.raises(ValueError):
            drift_envelope(CONST_MODEL, (1.0,), (2.0, 1.0), 100)


class TestEnvelopeBound:
    def test_flat_integrand_gives_zero(self):
        assert envelope_bound(DriftEnvelope(9.0, 9.0, (-1, 1), False), 0.5, 1.0) == 0.0

    def test_arithmetic_example(self):
        # (exp(0.05) - 1)/2, computed independently via expm1
        got = envelope_bound(DriftEnvelope(0.2, 0.0, (-1, 1), False), 0.5, 1.0)
        assert got == pytest.approx(math.expm1(0.05) / 2.0, abs=1e-15)
        assert got == pytest.approx(0.025635548188012, abs=1e-9)

    def test_unbounded_flag_gives_vacuous_bound(self):
        assert envelope_bound(DriftEnvelope(99.0, -1.0, (-10, 10), True), 0.5, 1.0) == float("inf")

    def test_consistent_with_constant_drift_zero_variance(self):
        # constant drift: normalized samples are exactly 1 AND the closed-form
        # bound is exactly 0; the two statements agree
        s = rn_samples(CONST_MODEL, (2.0,), 0.0, 1.0, 0.5, M=10, S=50, seed=1)
        env = drift_envelope(CONST_MODEL, (2.0,), (-3.0, 3.0), 101)
        assert np.var(s.normalized) == 0.0
        assert envelope_bound(env, 0.5, 1.0) == 0.0


class TestHistogram:
    def test_constant_drift_single_bin(self):
        s = rn_samples(CONST_MODEL, (2.0,), 0.0, 1.0, 0.5, M=10, S=300, seed=1)
        edges, counts = rn_histogram(s, bins=200)
        assert counts.sum() == 300
        nz = np.nonzero(counts)[0]
        assert nz.size == 1
        assert edges[nz[0]] <= 1.0 <= edges[nz[0] + 1]

    def test_binning_covers_all_samples(self):
        s = rn_samples(ou_model(), (10.0, 2.5), 4.0, 4.1, 1 / 12, M=20, S=5000, seed=2)
        edges, counts = rn_histogram(s)
        assert counts.sum() == 5000
        assert len(edges) == 201
