import math

import numpy as np
import pytest

from app.core.errors import DomainError
from app.service.weights import (
    WeightFamily,
    WeightFunction,
    eval_weight,
    load_custom_knots,
    parse_weight,
    validate_class_q,
)


class TestParseWeight:
    def test_ids_round_trip(self):
        for spec in ("power:0.4", "sqrtloglog:1", "sqrtlog:1", "const:1", "2*sqrtloglog:1"):
            assert parse_weight(spec).id == spec

    def test_scale_prefix(self):
        w = parse_weight("2*sqrtloglog:1")
        assert w.family == WeightFamily.SQRT_LOGLOG
        assert w.scale == 2.0

    def test_default_monotone_delta(self):
        assert parse_weight("sqrtloglog:1").monotone_delta == pytest.approx(math.exp(-math.e))
        assert parse_weight("sqrtlog:1").monotone_delta == pytest.approx(math.exp(-1.0))

    @pytest.mark.parametrize("spec", ["banana:1", "power:-1", "power:abc", "0*const:1", "x*const:1", "custom:"])
    def test_invalid(self, spec):
        with pytest.raises(DomainError):
            parse_weight(spec)


class TestEvaluation:
    def test_power(self):
        assert eval_weight(parse_weight("power:0.5"), 0.25) == pytest.approx(0.5)

    @pytest.mark.parametrize("nu", [0.1, 0.4, 0.5, 1.0, 2.5])
    def test_power_scaling(self, nu):
        # q(st) = s^nu q(t)
        w = parse_weight(f"power:{nu}")
        t = np.logspace(-6, 0, 25)
        for s in (1e-3, 0.1, 0.5, 0.9):
            np.testing.assert_allclose(w(s * t), s ** nu * w(t), rtol=1e-12)

    def test_sqrtlog_uses_guarded_log(self):
        w = parse_weight("sqrtlog:1")
        # log(2) < e, so the guarded log is 1
        assert w(0.5) == pytest.approx(math.sqrt(0.5))
        t = math.exp(-4.0)
        assert w(t) == pytest.approx(math.sqrt(4.0 * t))

    def test_sqrtloglog(self):
        w = parse_weight("sqrtloglog:1")
        t = math.exp(-math.exp(2.0))
        assert w(t) == pytest.approx(math.sqrt(2.0 * t))

    def test_squared_matches_square(self):
        t = np.logspace(-10, 0, 50)
        for spec in ("power:0.3", "sqrtloglog:1", "sqrtlog:2", "const:3", "1.5*sqrtlog:1"):
            w = parse_weight(spec)
            np.testing.assert_allclose(w.squared(t), w(t) ** 2, rtol=1e-12)

    @pytest.mark.parametrize("t", [0.0, -0.1, 1.5, float("nan")])
    def test_domain(self, t):
        with pytest.raises(DomainError):
            parse_weight("const:1")(t)

    def test_scaled(self):
        w = parse_weight("sqrtloglog:1")
        t = np.array([1e-8, 1e-3, 0.5])
        np.testing.assert_allclose(w.scaled(2.0)(t), 2.0 * w(t), rtol=1e-15)
        assert w.scaled(2.0).id == "2*sqrtloglog:1"


class TestReciprocalIntegral:
    def test_power_closed_form(self):
        assert parse_weight("power:0.5").reciprocal_integral(0.25, 1.0) == pytest.approx(1.0)

    def test_power_one_is_log(self):
        assert parse_weight("power:1").reciprocal_integral(0.5, 1.0) == pytest.approx(math.log(2.0))

    def test_constant(self):
        assert parse_weight("const:2").reciprocal_integral(0.25, 0.5) == pytest.approx(0.125)

    def test_quadrature_is_additive(self):
        w = parse_weight("sqrtlog:1")
        whole = w.reciprocal_integral(0.1, 0.2)
        parts = w.reciprocal_integral(0.1, 0.15) + w.reciprocal_integral(0.15, 0.2)
        assert whole == pytest.approx(parts, rel=1e-10)


class TestValidateClassQ:
    def test_standard_families_pass(self):
        for spec in ("power:0.4", "sqrtloglog:1", "sqrtlog:1", "const:1"):
            report = validate_class_q(parse_weight(spec))
            assert report.passed, spec
            assert report.violations == []

    def test_decreasing_custom_weight_reported(self):
        w = WeightFunction(family=WeightFamily.CUSTOM, knots=((1e-6, 1.0), (1e-3, 0.5), (1.0, 1.0)))
        report = validate_class_q(w)
        assert report.positive
        assert not report.monotone
        assert 0 < len(report.violations) <= 20
        assert all(v.q_right < v.q_left for v in report.violations)

    def test_sqrt_ratio_tail(self):
        report = validate_class_q(parse_weight("power:0.5"))
        assert report.sqrt_ratio_at_min == pytest.approx(1.0)

    def test_grid_size_checked(self):
        with pytest.raises(DomainError):
            validate_class_q(parse_weight("const:1"), grid_size=1)


class TestCustomKnots:
    def test_load_and_interpolate(self, tmp_path):
        path = tmp_path / "knots.csv"
        path.write_text("t,q\n1.0,1.0\n0.01,0.1\n")
        knots = load_custom_knots(path)
        assert knots == ((0.01, 0.1), (1.0, 1.0))
        w = parse_weight(f"custom:{path}")
        # log-log interpolation of q = sqrt(t)
        assert w(0.1) == pytest.approx(math.sqrt(0.1))

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DomainError):
            load_custom_knots(path)
