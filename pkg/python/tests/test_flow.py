"""Tests for reparametrized flows: integration, return maps, mu_phi and the no-STP experiment."""

import logging
import math
from fractions import Fraction

import numpy as np
import pytest

from shrinklab import (
    CertificateError,
    ConfigError,
    FlowSpec,
    RadiusSchedule,
    TorusPoint,
    build_liouville_vector,
    flow_integrate,
    mu_phi_weight,
    nostp_experiment,
    return_map,
    return_time_quadrature,
)
from shrinklab.flow import (
    _chi_square,
    _marginal_probabilities,
    invariance_check,
    iterate_return_map,
    nostp_schedule,
    sample_mu_phi,
    section_survey,
    time_one_covered,
    time_one_map,
)
from shrinklab.targets import ScheduleBlock

GOLDEN = (math.sqrt(5) - 1) / 2


def wavy(dimension, alpha, amplitude=0.5):
    """phi = 1 + amplitude * cos(2 pi x_(d+1))."""
    last = [0] * dimension + [1]
    return FlowSpec.from_params(dimension, alpha, [
        {"k": [0] * (dimension + 1), "cos": 1.0},
        {"k": last, "cos": amplitude},
    ])


class TestFlowSpec:
    def test_bounds(self):
        spec = wavy(1, [GOLDEN])
        assert spec.phi_min == 0.5
        assert spec.phi_max == 1.5
        assert spec.C == 2.0
        assert spec.density_ratio == 3.0

    def test_amplitude_combines_cos_and_sin(self):
        spec = FlowSpec.from_params(1, [GOLDEN], [
            {"k": [0, 0], "cos": 2.0},
            {"k": [1, 0], "cos": 0.3, "sin": 0.4},
        ])
        assert spec.phi_min == pytest.approx(1.5)

    def test_not_positive(self):
        with pytest.raises(ConfigError):
            wavy(1, [GOLDEN], amplitude=1.0)

    def test_mode_length(self):
        with pytest.raises(ConfigError):
            FlowSpec.from_params(1, [GOLDEN], [{"k": [0], "cos": 1.0}])

    def test_malformed_term(self):
        with pytest.raises(ConfigError):
            FlowSpec.from_params(1, [GOLDEN], [{"cos": 1.0}])

    def test_json_round_trip(self):
        spec = wavy(2, [GOLDEN, math.sqrt(2) - 1])
        assert FlowSpec.from_json(spec.to_json()) == spec

    def test_normalizer_of_constant_speed(self):
        assert FlowSpec.constant([GOLDEN], 2.0).normalizer == pytest.approx(0.5)

    def test_normalizer_of_wavy_speed(self):
        assert wavy(1, [GOLDEN]).normalizer == pytest.approx(2 / math.sqrt(3), rel=1e-10)


class TestIntegration:
    def test_unit_speed_is_linear(self):
        spec = FlowSpec.constant([0.3])
        p = flow_integrate(spec, TorusPoint.of(0.1, 0.2), 2.5)
        assert p.coords == pytest.approx((0.85, 0.7), abs=1e-9)

    def test_zero_time(self):
        x = TorusPoint.of(0.1, 0.2)
        assert flow_integrate(wavy(1, [GOLDEN]), x, 0.0) == x

    def test_backwards_undoes_forwards(self):
        spec = wavy(1, [GOLDEN])
        x = TorusPoint.of(0.4, 0.9)
        back = flow_integrate(spec, flow_integrate(spec, x, 1.7), -1.7)
        assert back.coords == pytest.approx(x.coords, abs=1e-7)

    def test_bad_tolerance(self):
        with pytest.raises(ConfigError):
            flow_integrate(FlowSpec.constant([0.3]), TorusPoint.of(0.0, 0.0), 1.0, tol=0.0)

    def test_point_dimension(self):
        with pytest.raises(ConfigError):
            flow_integrate(FlowSpec.constant([0.3]), TorusPoint.of(0.0), 1.0)

    def test_time_one_map_unit_speed(self):
        pts = np.array([[0.1, 0.2], [0.9, 0.5]])
        out = time_one_map(FlowSpec.constant([0.3]), pts)
        assert out == pytest.approx(np.array([[0.4, 0.2], [0.2, 0.5]]), abs=1e-12)

    def test_time_one_map_matches_adaptive(self):
        spec = wavy(1, [GOLDEN])
        x = TorusPoint.of(0.25, 0.6)
        fixed = time_one_map(spec, x.as_array()[None, :], steps=32)[0]
        adaptive = flow_integrate(spec, x, 1.0)
        assert fixed == pytest.approx(np.array(adaptive.coords), abs=1e-7)


class TestReturnMap:
    @pytest.mark.parametrize("spec, expected", [
        (FlowSpec.constant([GOLDEN]), 1.0),
        (FlowSpec.constant([GOLDEN], 2.0), 0.5),
        (wavy(1, [GOLDEN]), 2 / math.sqrt(3)),
    ])
    def test_quadrature(self, spec, expected):
        assert return_time_quadrature(spec, TorusPoint.of(0.3)) == pytest.approx(expected,
                                                                                  abs=1e-9)

    def test_return_is_the_translation(self):
        spec = wavy(1, [GOLDEN])
        data = return_map(spec, TorusPoint.of(0.3))
        assert data.time == pytest.approx(2 / math.sqrt(3), abs=1e-7)
        assert data.image.coords[0] == pytest.approx((0.3 + GOLDEN) % 1.0, abs=1e-7)
        assert data.time_error < 1e-7

    def test_iterates(self):
        spec = wavy(2, [GOLDEN, math.sqrt(2) - 1])
        out = iterate_return_map(spec, TorusPoint.of(0.1, 0.2), 3)
        assert len(out) == 3
        expected = ((0.1 + 3 * GOLDEN) % 1.0, (0.2 + 3 * (math.sqrt(2) - 1)) % 1.0)
        assert out[-1].image.coords == pytest.approx(expected, abs=1e-6)

    def test_section_dimension(self):
        with pytest.raises(ConfigError):
            return_map(wavy(1, [GOLDEN]), TorusPoint.of(0.1, 0.2))

    def test_survey_within_bounds(self):
        spec = FlowSpec.from_params(1, [GOLDEN], [
            {"k": [0, 0], "cos": 1.0},
            {"k": [1, 1], "cos": 0.3, "sin": 0.2},
        ])
        survey = section_survey(spec, 5, seed=2)
        assert len(survey.sections) == 5
        assert survey.within_bounds(spec)
        assert survey.max_time_error < 1e-7

    @pytest.mark.slow
    @pytest.mark.parametrize("spec", [
        FlowSpec.constant([GOLDEN]),
        wavy(1, [GOLDEN]),
        FlowSpec.from_params(2, [GOLDEN, math.sqrt(2) - 1], [
            {"k": [0, 0, 0], "cos": 1.0},
            {"k": [0, 0, 1], "cos": 0.3},
            {"k": [1, 0, 1], "cos": 0.1, "sin": 0.2},
        ]),
    ], ids=["constant", "wavy", "three-term"])
    def test_hundred_section_points(self, spec):
        survey = section_survey(spec, 100, seed=7)
        assert len(survey.sections) == 100
        assert survey.max_deviation < 1e-7
        assert survey.max_time_error < 1e-7
        assert survey.within_bounds(spec)


class TestInvariantMeasure:
    def test_weight_of_constant_speed(self):
        spec = FlowSpec.constant([GOLDEN], 2.0)
        assert mu_phi_weight(spec, TorusPoint.of(0.3, 0.8)) == pytest.approx(1.0)

    def test_weight_integrates_to_one(self):
        spec = wavy(1, [GOLDEN])
        axis = (np.arange(64) + 0.5) / 64
        grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
        assert np.mean(mu_phi_weight(spec, grid)) == pytest.approx(1.0, rel=1e-9)

    def test_samples_are_reproducible(self):
        spec = wavy(1, [GOLDEN])
        a = sample_mu_phi(spec, 1000, seed=4)
        b = sample_mu_phi(spec, 1000, seed=4)
        assert a.shape == (1000, 2)
        assert np.array_equal(a, b)

    def test_uniform_points_are_not_mu_phi(self):
        spec = wavy(1, [GOLDEN])
        probs = _marginal_probabilities(spec, 8)
        uniform = np.random.default_rng(0).random((20_000, 2))
        stats = _chi_square(uniform, probs, 8)
        assert stats[1] > 100.0

    def test_time_one_map_preserves_mu_phi(self):
        spec = wavy(1, [GOLDEN])
        report = invariance_check(spec, 4000, seed=1, bins=8)
        assert len(report.after) == 2
        assert max(report.after) < 3 * report.threshold
        assert max(report.before) < 3 * report.threshold


@pytest.fixture(scope="module")
def eq7_flow(liouville_d2_eq7):
    alpha, cert = liouville_d2_eq7
    return wavy(2, alpha), cert


class TestNoSTP:
    def test_schedule(self, liouville_d2_eq7):
        schedule = nostp_schedule(liouville_d2_eq7[1], 2)
        assert [(b.start, b.end) for b in schedule.blocks] == [(1, 4), (5, 71807)]
        assert schedule.dimension == 3 and schedule.root == 2
        assert schedule.block_mass_float(0) == pytest.approx(4 / 3**1.5)
        assert schedule.block_mass_float(1) == pytest.approx(0.9996, abs=1e-4)

    def test_faithful_blocks_verify(self, eq7_flow):
        spec, cert = eq7_flow
        report = nostp_experiment(spec, cert)
        assert report.regime == "faithful"
        assert len(report.verified) == 2
        assert [b.k_max for b in report.blocks] == [2, 997]
        assert all(b.time_one_contained for b in report.blocks)
        assert [b.flow_time for b in report.blocks] == [5, 71808]
        assert 3.5 <= report.decay_exponent <= 4.5
        ratios = report.mass_to_bound
        assert ratios[1] > ratios[0]
        assert all(b.hit_fraction is None for b in report.blocks)
        assert report.measured_exponent is None

    def test_time_one_window(self):
        block = ScheduleBlock(5, 71807, Fraction(1, 16 * 108))
        assert time_one_covered(block, 71808, 108, 997, 1.5)
        assert not time_one_covered(ScheduleBlock(5, 71900, Fraction(1, 16 * 108)),
                                    71808, 108, 997, 1.5)
        assert not time_one_covered(block, 71808, 108, 996, 1.5)

    def test_schedule_beyond_flow_horizon(self, eq7_flow, caplog):
        spec, cert = eq7_flow
        first, second = nostp_schedule(cert, 2).blocks
        stretched = RadiusSchedule(
            (first, ScheduleBlock(second.start, second.end + 10, second.radius_pow)), 3, 2)
        with caplog.at_level(logging.WARNING, logger="shrinklab.flow"):
            report = nostp_experiment(spec, cert, schedule=stretched)
        assert [b.time_one_contained for b in report.blocks] == [True, False]
        assert [b.containment for b in report.blocks] == [True, False]
        assert report.decay_exponent is None
        assert "leave flow time" in caplog.text

    def test_schedule_shape_must_match(self, eq7_flow):
        spec, cert = eq7_flow
        with pytest.raises(ConfigError):
            nostp_experiment(spec, cert, schedule=nostp_schedule(cert, 1))

    def test_faithful_needs_eq7(self, liouville_d1_eq3):
        alpha, cert = liouville_d1_eq3
        with pytest.raises(CertificateError):
            nostp_experiment(wavy(1, alpha), cert)

    def test_n_max_beyond_certificate(self, eq7_flow):
        spec, cert = eq7_flow
        with pytest.raises(CertificateError):
            nostp_experiment(spec, cert, 3)

    def test_alpha_must_match(self, eq7_flow):
        spec, cert = eq7_flow
        with pytest.raises(CertificateError):
            nostp_experiment(spec.with_alpha([0.1, 0.2]), cert)

    def test_faithful_refuses_simulation(self, eq7_flow):
        spec, cert = eq7_flow
        with pytest.raises(ConfigError):
            nostp_experiment(spec, cert, simulate=True, seed=1)

    def test_simulation_needs_seed(self, eq7_flow):
        spec, cert = eq7_flow
        with pytest.raises(ConfigError):
            nostp_experiment(spec, cert, regime="simulable")

    @pytest.mark.slow
    def test_simulable_convergent_flow(self):
        alpha, cert = build_liouville_vector(1, "eq7", 3, on_convergents=True)
        assert cert.denominators == (2, 5, 3202)
        report = nostp_experiment(wavy(1, alpha), cert, regime="simulable", samples=500, seed=1)
        assert [b.end + 1 for b in report.blocks[:2]] == [4, 400]
        assert [b.containment for b in report.blocks] == [False, True, True]
        assert report.decay_exponent == pytest.approx(2.449, abs=1e-2)
        assert report.blocks[1].hit_fraction is not None
        assert report.blocks[2].hit_fraction is None
        assert report.hits_below_bound
        assert report.measured_exponent is not None
        assert report.measured_exponent > 0
