import math

import numpy as np
import pytest

from app.core.errors import DomainError, NumericRefusal
from app.core.schemas import LpVerdict, TailDecision, Verdict
from app.service.criterion import (
    classify_criterion,
    integral_blocks,
    lp_criterion,
    require_finite_criterion,
    require_finite_lp,
    tail_decision,
)
from app.service.weights import parse_weight


class TestIntegralBlocks:
    def test_power_half_blocks_are_constant(self):
        # q^2/t = 1, so every dyadic block equals ln2 * exp(-c)
        blocks = integral_blocks(parse_weight("power:0.5"), 1.0, max_depth=20)
        np.testing.assert_allclose(blocks, math.log(2.0) * math.exp(-1.0), rtol=1e-12)

    def test_constant_weight_block_zero(self):
        # block 0 of t^-1 exp(-c/t) on [1/2, 1] against a fine midpoint rule
        blocks = integral_blocks(parse_weight("const:1"), 1.0, max_depth=8)
        t = np.linspace(0.5, 1.0, 200001)
        mid = 0.5 * (t[1:] + t[:-1])
        reference = float(np.sum(np.exp(-1.0 / mid) / mid) * (t[1] - t[0]))
        assert blocks[0] == pytest.approx(reference, rel=1e-8)

    def test_arguments_checked(self):
        with pytest.raises(DomainError):
            integral_blocks(parse_weight("const:1"), 0.0)
        with pytest.raises(DomainError):
            integral_blocks(parse_weight("const:1"), 1.0, max_depth=2)

    @pytest.mark.parametrize("weight", ["power:0.4", "power:0.5", "sqrtloglog:1", "sqrtlog:1", "const:1"])
    def test_blocks_nonnegative_and_decreasing_in_c(self, weight):
        w = parse_weight(weight)
        previous = None
        for c in (0.1, 0.5, 1.0, 2.0, 10.0):
            blocks = integral_blocks(w, c, max_depth=40)
            assert np.all(blocks >= 0.0)
            if previous is not None:
                assert np.all(blocks <= previous)
            previous = blocks


class TestTailDecision:
    def test_geometric_decay(self):
        blocks = 0.9 ** np.arange(40)
        decision, ratio, _ = tail_decision(blocks, 0.05)
        assert decision == TailDecision.SUMMABLE
        assert ratio == pytest.approx(0.9)

    def test_slow_geometric_decay_still_sums(self):
        blocks = 2.0 ** (-0.01 * np.arange(60))
        assert tail_decision(blocks, 0.05)[0] == TailDecision.SUMMABLE

    def test_power_law_tails(self):
        k = np.arange(60) + 0.5
        assert tail_decision(k ** -0.5, 0.05)[0] == TailDecision.DIVERGENT
        assert tail_decision(k ** -2.0, 0.05)[0] == TailDecision.SUMMABLE
        assert tail_decision(k ** -1.0, 0.05)[0] == TailDecision.INCONCLUSIVE

    def test_flat_and_vanishing(self):
        assert tail_decision(np.ones(30), 0.05)[0] == TailDecision.DIVERGENT
        assert tail_decision(np.zeros(30), 0.05)[0] == TailDecision.SUMMABLE


class TestClassifyCriterion:
    @pytest.mark.parametrize("spec", ["power:0.4", "sqrtlog:1", "const:1"])
    def test_all_c(self, spec):
        assert classify_criterion(parse_weight(spec)).verdict == Verdict.ALL_C

    def test_power_half_diverges(self):
        verdict = classify_criterion(parse_weight("power:0.5"))
        assert verdict.verdict == Verdict.DIVERGENT
        assert verdict.c_threshold_estimate is None

    def test_sqrtloglog_threshold_one(self):
        verdict = classify_criterion(parse_weight("sqrtloglog:1"))
        assert verdict.verdict == Verdict.SOME_C
        assert verdict.c_threshold_estimate == pytest.approx(1.0, abs=0.05)

    def test_scaling_law(self):
        # I(lam q, c) = I(q, lam^2 c)
        verdict = classify_criterion(parse_weight("2*sqrtloglog:1"))
        assert verdict.verdict == Verdict.SOME_C
        assert verdict.c_threshold_estimate == pytest.approx(0.25, abs=0.02)

    def test_series_reported_per_c(self):
        verdict = classify_criterion(parse_weight("sqrtlog:1"), c_grid=[0.1, 1.0, 10.0], max_depth=30)
        assert verdict.tested_c == [0.1, 1.0, 10.0]
        assert [s.c for s in verdict.series] == [0.1, 1.0, 10.0]
        assert all(len(s.blocks) == s.depth + 1 for s in verdict.series)

    def test_grid_checked(self):
        with pytest.raises(DomainError):
            classify_criterion(parse_weight("const:1"), c_grid=[1.0, 0.5])
        with pytest.raises(DomainError):
            classify_criterion(parse_weight("const:1"), c_grid=[])


class TestLpCriterion:
    @pytest.mark.parametrize(
        "spec, p, expected",
        [
            ("const:1", 1.0, LpVerdict.FINITE),
            ("power:0.5", 1.0, LpVerdict.FINITE),
            ("power:2", 1.0, LpVerdict.INFINITE),
            ("power:1.5", 1.0, LpVerdict.INFINITE),
            ("sqrtloglog:1", 2.0, LpVerdict.FINITE),
        ],
    )
    def test_verdicts(self, spec, p, expected):
        assert lp_criterion(parse_weight(spec), p).verdict == expected

    @pytest.mark.filterwarnings("error::RuntimeWarning")
    @pytest.mark.parametrize("nu", [17, 18, 20, 40])
    def test_steep_powers_are_infinite(self, nu):
        # t^nu underflows to zero near the origin for nu >= 18
        report = lp_criterion(parse_weight(f"power:{nu}"), 1.0)
        assert report.verdict == LpVerdict.INFINITE
        assert report.series.decision == TailDecision.DIVERGENT


class TestGates:
    def test_divergent_weight_refused(self):
        with pytest.raises(NumericRefusal):
            require_finite_criterion(parse_weight("power:0.5"))

    def test_some_c_weight_allowed(self):
        assert require_finite_criterion(parse_weight("sqrtloglog:1")) == Verdict.SOME_C

    def test_infinite_lp_refused(self):
        with pytest.raises(NumericRefusal) as info:
            require_finite_lp(parse_weight("power:2"), 1.0)
        assert info.value.exit_code == 3
