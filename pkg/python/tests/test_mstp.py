"""Tests for the disjointness constant, the covering lemma and the doubling lower bound."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from shrinklab import (
    CoveringInstance,
    EpsilonZeroError,
    HypothesisError,
    NonMonotoneError,
    RadiusSchedule,
    TorusPoint,
    covering_lemma_check,
    disjointness_check,
    epsilon_alpha,
    lemma_campaign,
    mstp_lower_bound,
    orbit,
)
from shrinklab.mstp import (
    ball_measure,
    finest_resolution,
    proportion_check,
    replay_instance,
    unit_ball_volume,
)


def eighths(radius):
    points = (np.arange(8) / 8.0)[:, None]
    return CoveringInstance(4, 0.2, points, (radius,) * 8)


class TestEpsilon:
    def test_golden_limit(self, golden):
        est = epsilon_alpha([golden], 1000)
        assert est.value == pytest.approx(1 / (4 * math.sqrt(5)), rel=2e-3)
        assert est.value > 1 / (4 * math.sqrt(5))

    def test_small_horizon(self, golden):
        est = epsilon_alpha([golden], 1)
        assert est.q == 1 and est.l == 1
        assert est.value == pytest.approx((3 - math.sqrt(5)) / 4, rel=1e-8)

    def test_rational_rotation_has_no_disjointness(self):
        assert epsilon_alpha(["1/4"], 2).value > 0
        assert epsilon_alpha(["1/4"], 3).value == 0

    @pytest.mark.parametrize("q", [1, 2, 5, 13, 34, 100])
    def test_epsilon_balls_are_disjoint(self, golden, q):
        eps = epsilon_alpha([golden], 100)
        points = orbit(TorusPoint.of(0.0), [-golden], 2 * q)
        assert disjointness_check(points, eps.value / q)

    @pytest.mark.slow
    def test_golden_epsilon_settles(self, golden):
        coarse = epsilon_alpha([golden], 2**14)
        fine = epsilon_alpha([golden], 2**15)
        assert 0 < fine.value <= coarse.value
        assert fine.value == pytest.approx(coarse.value, rel=1e-2)

    def test_volume_helpers(self):
        assert unit_ball_volume(2) == 4
        assert ball_measure(0.1, 2) == pytest.approx(0.04)
        assert ball_measure(0.7, 1) == 1.0


class TestCoveringLemma:
    def test_wide_balls_satisfy_both(self):
        verdict = covering_lemma_check(eighths(0.06))
        assert verdict.alternative == "both"
        assert verdict.union_first == pytest.approx(0.48)
        assert verdict.union_all == pytest.approx(0.96)

    def test_tiny_balls_need_second_alternative(self):
        verdict = covering_lemma_check(eighths(1e-4))
        assert verdict.alternative == "ii"
        assert verdict.margin_i < 0
        assert not verdict.falsified

    def test_q_too_small(self):
        inst = CoveringInstance(3, 0.1, (np.arange(6) / 6.0)[:, None], (0.01,) * 6)
        with pytest.raises(HypothesisError):
            covering_lemma_check(inst)

    def test_radii_must_not_increase(self):
        points = (np.arange(8) / 8.0)[:, None]
        inst = CoveringInstance(4, 0.2, points, (0.01,) * 7 + (0.02,))
        with pytest.raises(HypothesisError):
            covering_lemma_check(inst)

    def test_balls_must_be_disjoint(self):
        points = (np.arange(8) / 8.0)[:, None]
        with pytest.raises(HypothesisError):
            covering_lemma_check(CoveringInstance(4, 0.3, points, (0.01,) * 8))

    def test_replay_from_json_record(self):
        inst = eighths(0.06)
        record = json.loads(json.dumps({"seed": 0, "index": 0, "instance": inst.to_json()}))
        assert replay_instance(record) == covering_lemma_check(inst)

    def test_proportion_without_contacts(self):
        assert proportion_check(eighths(1e-4)) == []

    def test_proportion_is_one_dimensional(self):
        points = np.column_stack([np.arange(8) / 8.0, np.zeros(8)])
        with pytest.raises(HypothesisError):
            proportion_check(CoveringInstance(4, 0.2, points, (1e-4,) * 8))


class TestCampaign:
    def test_one_dimensional_campaign(self):
        result = lemma_campaign(6, seed=11, dimensions=(1,), q_values=(4, 8))
        assert len(result.rows) == 6
        assert result.falsifications == ()
        assert [r.q for r in result.rows] == [4, 8, 4, 8, 4, 8]
        assert result.undecided_by_dimension == {1: 0}
        assert all(r.resolution is None for r in result.rows)
        assert result.max_resolution is None
        result.raise_on_falsification()

    def test_reproducible(self):
        a = lemma_campaign(4, seed=2, dimensions=(1,), q_values=(4,))
        b = lemma_campaign(4, seed=2, dimensions=(1,), q_values=(4,), workers=2)
        assert a == b

    @pytest.mark.slow
    def test_two_dimensional_campaign(self):
        result = lemma_campaign(3, seed=5, dimensions=(2,), q_values=(4,))
        assert result.falsifications == ()
        assert all(r.resolution is not None for r in result.rows)
        assert result.max_resolution <= finest_resolution(2)

    def test_finest_resolution(self):
        assert finest_resolution(2) == 4096
        assert finest_resolution(3) == 256
        assert finest_resolution(1) == 2**24

    @pytest.mark.slow
    def test_thousand_one_dimensional_instances(self):
        result = lemma_campaign(1000, seed=2024, dimensions=(1,), q_values=(4, 8, 16))
        assert len(result.rows) == 1000
        assert result.falsifications == ()
        assert result.undecided == 0

    @pytest.mark.slow
    def test_two_dimensional_campaign_with_workers(self):
        result = lemma_campaign(12, seed=9, dimensions=(2,), q_values=(4, 8), workers=4)
        assert result.falsifications == ()
        assert set(result.undecided_by_dimension) == {2}


class TestDoublingLowerBound:
    def test_reaches_eta_immediately(self, golden):
        schedule = RadiusSchedule.from_function(lambda l: Fraction(3, 10 * (l + 1)), 32, 1)
        report = mstp_lower_bound([golden], TorusPoint.of(0.0), schedule, 4)
        assert report.reached_at == 0
        assert len(report.rows) == 5
        assert report.rows[-1].horizon == 32
        assert report.nondecreasing
        assert report.recurrence_holds()

    def test_rational_rotation_has_no_bound(self):
        schedule = RadiusSchedule.from_function(lambda l: Fraction(3, 10 * (l + 1)), 8, 1)
        with pytest.raises(EpsilonZeroError):
            mstp_lower_bound(["1/4"], TorusPoint.of(0.0), schedule, 2)

    @pytest.mark.slow
    def test_fourteen_doublings(self, golden):
        schedule = RadiusSchedule.from_function(lambda l: Fraction(3, 10 * (l + 1)), 2**15, 1)
        report = mstp_lower_bound([golden], TorusPoint.of(0.0), schedule, 14)
        assert report.epsilon.value > 0
        assert report.eta == pytest.approx(2 * report.epsilon.value / 10)
        assert report.reached_at is not None and report.reached_at <= 14
        assert report.nondecreasing
        assert report.rows[-1].horizon == 2**15

    def test_rejects_increasing_radii(self, golden):
        schedule = RadiusSchedule.from_function(lambda l: Fraction(l + 1, 100), 8, 1)
        with pytest.raises(NonMonotoneError):
            mstp_lower_bound([golden], TorusPoint.of(0.0), schedule, 2)
