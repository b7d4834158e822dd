import math

import numpy as np
import pytest
from scipy.stats import norm

from app.core.errors import DomainError, NumericRefusal
from app.service.seeding import ReplicateSeeder
from app.service.weights import parse_weight
from app.service.wiener import (
    WienerGrid,
    abs_moment,
    abs_sup_cdf,
    grid_weighted_sup,
    limit_lp_functional,
    limit_sup_functional,
    near_origin_sups,
    refine_paths,
    sample_wiener_path,
    sample_wiener_paths,
    surrogate_crossing_n,
    window_lower_bound,
    window_lower_bound_closed_form,
    window_sup_functional,
    window_times,
)

# discrete-monitoring shift of a Brownian maximum on a mesh of width 1/m
DISCRETE_MAX_SHIFT = 0.5826


def max_fraction_below(grid, rng, replicates, level, two_sided):
    hits = 0
    for _ in range(replicates // 1000):
        paths = sample_wiener_paths(grid, rng, 1000)
        peak = np.max(np.abs(paths) if two_sided else paths, axis=1)
        hits += int(np.count_nonzero(peak <= level))
    return hits / replicates


class TestWienerGrid:
    def test_structure(self):
        grid = WienerGrid(m=64, r=0.9, eps_floor=1e-6)
        assert grid.times[-1] == 1.0
        assert np.all(np.diff(grid.times) > 0)
        assert grid.times[0] >= 1e-6
        assert grid.times[0] < 1e-6 / 0.9
        assert np.all(np.isin(np.arange(1, 65) / 64, grid.times))

    def test_describe(self):
        grid = WienerGrid(m=16)
        assert grid.describe()["points"] == grid.size

    @pytest.mark.parametrize("kwargs", [{"m": 0}, {"r": 1.0}, {"r": 0.0}, {"eps_floor": 1.5}])
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            WienerGrid(**kwargs)


class TestWienerPaths:
    def test_marginal_variance_and_covariance(self, rng):
        grid = WienerGrid(m=10, eps_floor=1e-3)
        paths = sample_wiener_paths(grid, rng, 40_000)
        i3, i5, i7 = (int(np.argmin(np.abs(grid.times - t))) for t in (0.3, 0.5, 0.7))
        assert 0.487 <= float(np.var(paths[:, i5])) <= 0.513
        cov = float(np.mean(paths[:, i3] * paths[:, i7]))
        assert cov == pytest.approx(0.3, abs=0.01)

    def test_single_path_matches_batch_draw(self):
        grid = WienerGrid(m=32, eps_floor=1e-4)
        one = sample_wiener_path(grid, np.random.default_rng(5))
        batch = sample_wiener_paths(grid, np.random.default_rng(5), 1)
        assert one.shape == (grid.size,)
        np.testing.assert_array_equal(one, batch[0])

    def test_one_sided_maximum(self, rng):
        grid = WienerGrid(m=4096, eps_floor=1e-2)
        observed = max_fraction_below(grid, rng, 20_000, 1.0, two_sided=False)
        expected = 2.0 * norm.cdf(1.0 + DISCRETE_MAX_SHIFT / math.sqrt(grid.m)) - 1.0
        assert observed == pytest.approx(expected, abs=0.01)

    @pytest.mark.slow
    def test_two_sided_maximum(self, rng):
        grid = WienerGrid(m=2**14, eps_floor=1e-2)
        observed = max_fraction_below(grid, rng, 40_000, 1.0, two_sided=True)
        assert observed == pytest.approx(abs_sup_cdf(1.0 + DISCRETE_MAX_SHIFT / math.sqrt(grid.m)), abs=0.01)


class TestOracles:
    def test_abs_sup_cdf(self):
        assert abs_sup_cdf(1.0) == pytest.approx(0.37078, abs=1e-4)
        assert abs_sup_cdf(0.0) == 0.0
        assert abs_sup_cdf(6.0) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("p, expected", [(1.0, math.sqrt(2.0 / math.pi)), (2.0, 1.0), (4.0, 3.0)])
    def test_abs_moment(self, p, expected):
        assert abs_moment(p) == pytest.approx(expected, rel=1e-12)

    def test_abs_moment_checked(self):
        with pytest.raises(DomainError):
            abs_moment(0.0)


class TestWeightedSup:
    def test_scaling_identity(self, rng):
        grid = WienerGrid(m=256, eps_floor=1e-4)
        paths = sample_wiener_paths(grid, rng, 50)
        w = parse_weight("sqrtloglog:1")
        np.testing.assert_allclose(
            grid_weighted_sup(grid.times, paths, w.scaled(2.0)), 0.5 * grid_weighted_sup(grid.times, paths, w), rtol=1e-14
        )

    def test_empty_range(self, rng, const_weight):
        grid = WienerGrid(m=8)
        with pytest.raises(DomainError):
            grid_weighted_sup(grid.times, sample_wiener_paths(grid, rng, 2), const_weight, lo=2.0)

    def test_near_origin_sups(self, rng):
        grid = WienerGrid(m=128, eps_floor=1e-8)
        paths = sample_wiener_paths(grid, rng, 40)
        w = parse_weight("power:0.4")
        sups = near_origin_sups(grid.times, paths, w, [1.0, 0.1, 0.001])
        assert sups.shape == (40, 3)
        # shrinking the window can only lower the sup
        assert np.all(np.diff(sups, axis=1) <= 0.0)
        np.testing.assert_array_equal(sups[:, 0], grid_weighted_sup(grid.times, paths, w))
        with pytest.raises(DomainError):
            near_origin_sups(grid.times, paths, w, [0.0])

    def test_divergent_weight_refused(self, rng):
        with pytest.raises(NumericRefusal):
            limit_sup_functional(parse_weight("power:0.5"), WienerGrid(m=16), ReplicateSeeder(1, "sup"), 10)

    def test_meta(self):
        dist = limit_sup_functional(parse_weight("sqrtlog:1"), WienerGrid(m=256, eps_floor=1e-6), ReplicateSeeder(2, "sup"), 300)
        assert dist.count == 300
        assert dist.meta["functional"] == "sup|sqrtlog:1"
        assert "refinement_shift" in dist.meta
        assert dist.meta["criterion"] == "all_c"

    @pytest.mark.slow
    def test_default_grid_converged_for_constant_weight(self, const_weight):
        dist = limit_sup_functional(const_weight, WienerGrid(), ReplicateSeeder(3, "sup"), 2000, workers=2)
        assert dist.meta["converged"] is True
        assert dist.meta["refinement_shift"] < 0.005


class TestRefinePaths:
    def test_coupling(self, rng):
        grid = WienerGrid(m=32, r=0.8, eps_floor=1e-3)
        paths = sample_wiener_paths(grid, rng, 7)
        times, values = refine_paths(grid.times, paths, rng, grid.r, grid.eps_floor)
        below = times.size - (2 * grid.size - 1)
        assert below > 0
        assert np.all(np.diff(times) > 0)
        np.testing.assert_array_equal(times[below::2], grid.times)
        np.testing.assert_array_equal(values[:, below::2], paths)
        assert times[0] >= grid.times[0] * grid.eps_floor * (1.0 - 1e-12)


class TestLimitLp:
    @pytest.mark.parametrize(
        "spec, p, expected",
        [
            ("const:1", 1.0, 2.0 / 3.0 * math.sqrt(2.0 / math.pi)),
            ("const:1", 2.0, 0.5),
            ("power:0.5", 1.0, math.sqrt(2.0 / math.pi)),
        ],
    )
    def test_means(self, spec, p, expected):
        dist = limit_lp_functional(parse_weight(spec), p, WienerGrid(m=1024, eps_floor=1e-6), ReplicateSeeder(4, spec), 4000)
        se = float(np.std(dist.values)) / math.sqrt(dist.count)
        assert abs(dist.mean - expected) < 3.0 * se
        assert dist.meta["tail_bias_bound"] < 1e-4

    def test_infinite_integral_refused(self):
        with pytest.raises(NumericRefusal):
            limit_lp_functional(parse_weight("power:2"), 1.0, WienerGrid(m=16), ReplicateSeeder(1, "lp"), 10)


class TestWindow:
    def test_times(self):
        times = window_times(4)
        assert times[0] == pytest.approx(0.25)
        assert times[-1] == pytest.approx(0.5)
        assert times.size >= 64 * 0.5 * math.log10(4)
        with pytest.raises(DomainError):
            window_times(3)

    def test_power_half_grows_with_n(self, rng):
        w = parse_weight("power:0.5")
        small = window_sup_functional(w, 10**2, rng, 2000).median
        large = window_sup_functional(w, 10**6, rng, 2000).median
        assert large > small + 0.1

    def test_lower_bound_closed_form(self):
        w = parse_weight("sqrtloglog:1")
        for n in (1e4, 1e6, 1e12):
            assert window_lower_bound(w, int(n)) == pytest.approx(window_lower_bound_closed_form(n), rel=1e-8)

    def test_surrogate_crossing(self):
        assert window_lower_bound_closed_form(1e6) == pytest.approx(0.5443, abs=1e-3)
        crossing = surrogate_crossing_n()
        assert window_lower_bound_closed_form(crossing) == pytest.approx(1.0)
        assert 1e20 < crossing < 1e21
