import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from app.core.errors import DomainError
from app.service.dan_models import (
    Rademacher,
    StandardNormal,
    UniformSym,
    ad188_value,
    bn,
    build_slow_vary_tail,
    early_norming_ratio,
    norming_arrays,
    norming_table,
    parse_model,
)
from app.service.experiments import COUNTEREXAMPLE_GRID_RATIO, counterexample_bound, run_ad188_check

MODELS = [Rademacher(), StandardNormal(), UniformSym(half_width=2.0), build_slow_vary_tail(0.5)]


class TestTruncatedSecondMoment:
    def test_normal_closed_form(self):
        m = StandardNormal()
        assert m.truncated_second_moment(0.0) == 0.0
        assert m.truncated_second_moment(40.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("x", [0.25, 1.0, 2.0, 4.0, 8.0])
    def test_normal_against_quadrature(self, x):
        expected, _ = integrate.quad(lambda s: s * s * norm.pdf(s), -x, x, epsabs=1e-14, epsrel=1e-13)
        assert StandardNormal().truncated_second_moment(x) == pytest.approx(expected, rel=0, abs=1e-10)

    def test_uniform(self):
        m = UniformSym(half_width=1.0)
        assert m.truncated_second_moment(0.5) == pytest.approx(0.125 / 3.0)
        assert m.truncated_second_moment(2.0) == pytest.approx(1.0 / 3.0)

    def test_rademacher_step(self):
        m = Rademacher()
        np.testing.assert_array_equal(m.truncated_second_moment(np.array([0.5, 0.999, 1.0, 7.0])), [0, 0, 1, 1])

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.id)
    def test_nondecreasing_on_grid(self, model):
        x = np.concatenate([[0.0], np.geomspace(1e-3, 1e6, 999)])
        assert np.all(np.diff(model.truncated_second_moment(x)) >= 0.0)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.id)
    def test_empirical_matches_analytic(self, rng, model):
        x = model.sample(rng, 10**6)
        for level in np.geomspace(0.3, 30.0, 10):
            y = np.where(np.abs(x) <= level, x * x, 0.0)
            se = float(np.std(y)) / math.sqrt(y.size)
            assert abs(float(np.mean(y)) - model.truncated_second_moment(level)) <= 5.0 * se + 1e-12, level

    def test_negative_level_rejected(self):
        with pytest.raises(DomainError):
            StandardNormal().truncated_second_moment(-1.0)

    def test_symmetric_truncated_mean(self):
        assert StandardNormal().truncated_mean(3.0) == 0.0


class TestEta:
    def test_rademacher_exact(self):
        js = np.array([1, 2, 3, 4, 5, 9, 100, 12345, 10**6])
        np.testing.assert_allclose(Rademacher().eta_many(js), np.maximum(2.0, np.sqrt(js)), rtol=0, atol=1e-10)

    def test_uniform_matches_closed_form(self):
        # l(s) = 1/3 for s >= 1, so eta_j = max(2, sqrt(j/3))
        js = np.array([1, 10, 12, 100, 10**4])
        np.testing.assert_allclose(UniformSym().eta_many(js), np.maximum(2.0, np.sqrt(js / 3.0)), rtol=1e-10)

    def test_normal_is_the_infimum(self):
        m = StandardNormal()
        for j in (50, 10**4, 10**6):
            eta = m.eta(j)
            assert m.truncated_second_moment(eta) / eta**2 <= 1.0 / j
            below = eta * (1.0 - 1e-9)
            assert m.truncated_second_moment(below) / below**2 > 1.0 / j

    def test_nondecreasing(self):
        js = np.arange(1, 5000)
        for model in (StandardNormal(), build_slow_vary_tail(0.5)):
            assert np.all(np.diff(model.eta_many(js)) >= 0)

    def test_index_checked(self):
        with pytest.raises(DomainError):
            Rademacher().eta_many([0])


class TestNormingTable:
    def test_rademacher(self):
        table = norming_table(Rademacher(), [1, 10, 1000])
        assert [row.b2 for row in table.rows] == [1.0, 10.0, 1000.0]
        assert all(row.sigma_star == 1.0 for row in table.rows)
        assert bn(Rademacher(), 10**4) == 100.0

    def test_rows_must_increase(self):
        with pytest.raises(DomainError):
            norming_table(StandardNormal(), [10, 5])

    def test_slow_vary_exact_levels(self):
        m = build_slow_vary_tail(0.5)
        eta, l_eta, b2, sigma = norming_arrays(m, [10, 1000, 10**5])
        np.testing.assert_allclose(b2, np.array([10, 1000, 10**5]) * l_eta)
        np.testing.assert_allclose(sigma, np.sqrt(l_eta))
        assert np.all(eta >= m.b + 1.0)


class TestSlowVaryTail:
    def test_moment_tracks_target(self):
        m = build_slow_vary_tail(0.5, grid_ratio=2.0)
        for k in (0, 5, 40):
            x = m.atoms[k]
            assert m.truncated_second_moment(x) == pytest.approx(m.target(x) - 1.0, rel=1e-10)

    def test_masses_form_a_law(self):
        m = build_slow_vary_tail(0.5, grid_ratio=COUNTEREXAMPLE_GRID_RATIO)
        assert 0.0 < m.mass_at_zero < 1.0
        assert np.all(m.masses >= 0)
        assert m.atoms[-1] <= 1e100

    def test_infinite_variance(self):
        m = build_slow_vary_tail(0.5)
        assert math.isinf(m.second_moment)
        with pytest.raises(DomainError):
            m.variance_ratio(100)

    def test_empirical_truncated_moment(self, rng):
        m = build_slow_vary_tail(0.5)
        x = m.sample(rng, 200_000)
        empirical = float(np.mean(np.where(np.abs(x) <= 16.0, x * x, 0.0)))
        assert empirical == pytest.approx(m.truncated_second_moment(16.0), rel=0.1)
        assert abs(float(np.mean(np.sign(x)))) < 0.02

    @pytest.mark.parametrize("alpha, ratio", [(0.0, 2.0), (1.0, 2.0), (0.5, 1.0)])
    def test_parameters_checked(self, alpha, ratio):
        with pytest.raises(DomainError):
            build_slow_vary_tail(alpha, ratio)


class TestSampling:
    def test_rademacher_values(self, rng):
        x = Rademacher().sample(rng, 1000)
        assert set(np.unique(x)) == {-1.0, 1.0}

    def test_normal_variance(self, rng):
        x = StandardNormal().sample(rng, 100_000)
        assert float(np.var(x)) == pytest.approx(1.0, abs=0.02)

    def test_size_checked(self, rng):
        with pytest.raises(DomainError):
            StandardNormal().sample(rng, 0)


class TestAd188:
    def test_rademacher_is_zero(self):
        assert all(row.value == 0.0 for row in run_ad188_check(Rademacher(), [10, 1000, 10**5]))

    def test_normal_decays(self):
        values = [row.value for row in run_ad188_check(StandardNormal(), [10**2, 10**4, 10**6])]
        assert values[0] > values[1] > values[2]
        assert values[2] < values[0] / 10.0

    def test_slow_vary_decays(self):
        m = build_slow_vary_tail(0.5, grid_ratio=COUNTEREXAMPLE_GRID_RATIO)
        values = [ad188_value(m, n) for n in (10**2, 10**4, 10**6)]
        assert values[0] > values[1] > values[2]
        assert values[2] < values[0] / 3.0


class TestNormingDecay:
    def test_early_levels_negligible(self):
        m = build_slow_vary_tail(0.5, grid_ratio=COUNTEREXAMPLE_GRID_RATIO)
        ratios = [early_norming_ratio(m, n) for n in (10**4, 10**6, 10**8)]
        assert ratios[0] > ratios[1] > ratios[2]
        assert ratios[2] < 0.5

    def test_bound_shape(self):
        assert counterexample_bound(1e8, 0.5) < counterexample_bound(1e4, 0.5)


class TestVarianceRatio:
    def test_normal_tends_to_one(self):
        assert StandardNormal().variance_ratio(10**4) == pytest.approx(1.0, abs=1e-6)

    def test_rademacher_exact(self):
        assert Rademacher().variance_ratio(1000) == 1.0


class TestParseModel:
    @pytest.mark.parametrize(
        "spec, model_id",
        [("rademacher", "rademacher"), ("normal", "normal"), ("uniform:2", "uniform:2"), ("slowvary:0.5:1.05", "slowvary:0.5:1.05")],
    )
    def test_ids(self, spec, model_id):
        assert parse_model(spec).id == model_id

    @pytest.mark.parametrize("spec", ["cauchy", "uniform:-1", "slowvary:2", "slowvary:abc"])
    def test_invalid(self, spec):
        with pytest.raises(DomainError):
            parse_model(spec)
