"""Tests for radius schedules, hit sets and the two schedule constructions."""

import dataclasses
from fractions import Fraction

import pytest

from shrinklab import (
    BudgetError,
    CertificateError,
    ConfigError,
    RadiusSchedule,
    TargetSequence,
    TorusPoint,
    VerificationError,
    bc_monte_carlo,
    empty_limsup_schedule,
    hit_set,
    non_bc_schedule,
    verify_empty_limsup,
    verify_non_bc,
)
from shrinklab.config import DEFAULT_BUDGETS
from shrinklab.targets import TRANSLATION_CENTERS, ScheduleBlock, strips_disjoint_at


@pytest.fixture(scope="module")
def golden_limsup(golden):
    return empty_limsup_schedule([golden], 2)


class TestRadiusSchedule:
    def test_constant(self):
        s = RadiusSchedule.constant(Fraction(1, 10), 0, 9, 1)
        assert s.radius_at(5) == pytest.approx(0.1)
        assert s.radius_at(10) == 0.0
        assert s.block_index(10) is None

    def test_overlapping_blocks(self):
        blocks = (ScheduleBlock(0, 5, Fraction(1, 2)), ScheduleBlock(5, 9, Fraction(1, 4)))
        with pytest.raises(ConfigError):
            RadiusSchedule(blocks, 1)

    def test_harmonic_partial_sum(self):
        s = RadiusSchedule.from_function(lambda l: Fraction(1, l + 1), 4, 1)
        assert s.monotone
        assert s.partial_sum() == Fraction(25, 12)
        assert s.partial_sum(1) == Fraction(3, 2)

    def test_radii_array_pads_with_zero(self):
        s = RadiusSchedule.from_function(lambda l: Fraction(1, l + 1), 4, 1)
        assert s.radii_array(6).tolist() == pytest.approx([1.0, 0.5, 1 / 3, 0.25, 0.0, 0.0])

    def test_active_clips(self):
        s = RadiusSchedule((ScheduleBlock(0, 9, Fraction(1, 4)),
                            ScheduleBlock(10, 99, Fraction(1, 9))), 1)
        ranges = [(lo, hi) for _, lo, hi in s.active(5, 20)]
        assert ranges == [(5, 9), (10, 20)]

    def test_not_monotone_with_gap(self):
        s = RadiusSchedule((ScheduleBlock(0, 3, Fraction(1, 4)),
                            ScheduleBlock(5, 9, Fraction(1, 9))), 1)
        assert not s.monotone

    def test_block_mass_with_root(self):
        s = RadiusSchedule((ScheduleBlock(1, 4, Fraction(1, 5)),), 2, 2)
        assert s.block_mass(0) == Fraction(4, 5)
        assert s.mass_at_least(0, Fraction(1, 2))
        assert not s.mass_at_least(0, Fraction(9, 10))
        assert s.radius(s.blocks[0]) == pytest.approx(5 ** -0.5)

    def test_divergence_report(self):
        s = RadiusSchedule.from_function(lambda l: Fraction(1, l + 1), 3, 1)
        report = s.divergence_report()
        assert [row["cumulative"] for row in report] == [1, Fraction(3, 2), Fraction(11, 6)]

    def test_json_round_trip_with_huge_indices(self):
        s = RadiusSchedule((ScheduleBlock(1, 10**40, Fraction(1, 10**40)),), 1, 1)
        assert RadiusSchedule.from_json(s.to_json()) == s

    def test_malformed_json(self):
        with pytest.raises(ConfigError):
            RadiusSchedule.from_json({"blocks": []})


class TestHitSet:
    @pytest.fixture
    def quarter_target(self):
        schedule = RadiusSchedule.constant(Fraction(1, 10), 0, 9, 1)
        return TargetSequence(TorusPoint.of(0.0), schedule)

    def test_float_mode(self, quarter_target):
        report = hit_set(["1/4"], quarter_target, TorusPoint.of(0.0), 10)
        assert report.hits == (0, 4, 8)
        assert not report.truncated

    def test_exact_mode_agrees(self, quarter_target):
        report = hit_set(["1/4"], quarter_target, TorusPoint.of(0.0), 10, exact=True)
        assert report.hits == (0, 4, 8)

    def test_horizon_excludes_last_index(self, quarter_target):
        assert hit_set(["1/4"], quarter_target, TorusPoint.of(0.0), 8).hits == (0, 4)

    def test_max_hits(self, quarter_target):
        report = hit_set(["1/4"], quarter_target, TorusPoint.of(0.0), 10, max_hits=2)
        assert report.hits == (0, 4)
        assert report.truncated

    def test_rows(self, quarter_target):
        report = hit_set(["1/4"], quarter_target, TorusPoint.of(0.0), 10)
        assert report.rows(3) == [[3, 0, 0.0], [3, 4, 0.0], [3, 8, 0.0]]

    def test_budget(self, quarter_target):
        budgets = dataclasses.replace(DEFAULT_BUDGETS, orbit_indices=5)
        with pytest.raises(BudgetError):
            hit_set(["1/4"], quarter_target, TorusPoint.of(0.0), 10, budgets=budgets)

    def test_center_dimension(self):
        with pytest.raises(ConfigError):
            TargetSequence(TorusPoint.of(0.0, 0.0), RadiusSchedule.constant(0.1, 0, 3, 1))


class TestBorelCantelliMonteCarlo:
    @pytest.fixture
    def target(self):
        return TargetSequence(TorusPoint.of(0.5), RadiusSchedule.constant(Fraction(1, 20), 0, 199, 1))

    def test_dense_orbit_hits_everything(self, golden, target):
        result = bc_monte_carlo([golden], target, 200, 2000, seed=3)
        assert result.fraction == 1.0
        assert result.error == 0.0

    def test_reproducible_across_workers(self, golden, target):
        a = bc_monte_carlo([golden], target, 200, 5000, seed=3, min_hits=3)
        b = bc_monte_carlo([golden], target, 200, 5000, seed=3, min_hits=3, workers=3)
        assert a == b

    def test_window_outside_schedule(self, golden, target):
        result = bc_monte_carlo([golden], target, 5000, 100, seed=1, window=(1000, 2000))
        assert result.fraction == 0.0

    def test_needs_samples(self, golden, target):
        with pytest.raises(ConfigError):
            bc_monte_carlo([golden], target, 200, 0, seed=1)


class TestEmptyLimsup:
    def test_schedule_shape(self, golden_limsup):
        schedule, cert = golden_limsup
        assert cert.p_max == 2
        assert cert.shifts == (0, 1, 4)
        assert len(cert.entries) == (25 - 5 + 1) + (125 - 25 + 1)
        assert len(schedule) == len(cert.entries)
        assert schedule.root == 1

    def test_radii_are_reciprocal_levels(self, golden_limsup):
        schedule, cert = golden_limsup
        first = min(cert.entries, key=lambda e: e.n)
        assert schedule.radius_pow_at(first.n) == Fraction(1, 5)

    def test_verifies(self, golden_limsup):
        _, cert = golden_limsup
        report = verify_empty_limsup(cert)
        assert report.translation_invariant
        assert [row["p"] for row in report.blocks] == [1, 2]
        assert report.regime == "faithful"

    def test_strips_disjoint_around_every_center(self, golden_limsup):
        cert = golden_limsup[1]
        assert all(strips_disjoint_at(cert, c) for c in TRANSLATION_CENTERS)
        assert strips_disjoint_at(cert, 0.9)

    def test_overlapping_strips_detected_at_every_center(self, golden_limsup):
        cert = golden_limsup[1]
        bad = dataclasses.replace(cert, strip_radii=(Fraction(9, 20), *cert.strip_radii[1:]))
        assert not any(strips_disjoint_at(bad, c) for c in TRANSLATION_CENTERS)

    def test_truncated_levels_are_simulable(self, golden):
        schedule, cert = empty_limsup_schedule([golden], 2, max_levels=3)
        assert len(cert.entries) == 6
        assert len(schedule) == 6
        assert cert.regime == "simulable"
        report = verify_empty_limsup(cert)
        assert report.regime == "simulable"
        assert [row["active"] for row in report.blocks] == [3, 3]

    def test_max_levels_at_least_one(self, golden):
        with pytest.raises(ConfigError):
            empty_limsup_schedule([golden], 1, max_levels=0)

    def test_zero_blocks(self, golden):
        schedule, cert = empty_limsup_schedule([golden], 0)
        assert len(schedule) == 0
        assert verify_empty_limsup(cert).blocks == ()

    def test_asking_beyond_certificate(self, golden_limsup):
        with pytest.raises(ConfigError):
            verify_empty_limsup(golden_limsup[1], 3)

    def _replace_first(self, cert, **changes):
        entries = (dataclasses.replace(cert.entries[0], **changes), *cert.entries[1:])
        return dataclasses.replace(cert, entries=entries)

    def test_tampered_radius(self, golden_limsup):
        bad = self._replace_first(golden_limsup[1], radius_pow=Fraction(1, 2))
        with pytest.raises(VerificationError) as info:
            verify_empty_limsup(bad)
        assert info.value.check == "b"

    def test_tampered_index(self, golden_limsup):
        bad = self._replace_first(golden_limsup[1], n=golden_limsup[1].entries[0].n + 1)
        with pytest.raises(VerificationError) as info:
            verify_empty_limsup(bad)
        assert info.value.check == "a"

    def test_index_outside_block(self, golden_limsup):
        cert = golden_limsup[1]
        bad = self._replace_first(cert, n=cert.block_starts[1] + 5)
        with pytest.raises(VerificationError) as info:
            verify_empty_limsup(bad)
        assert info.value.check == "index"

    def test_strip_too_narrow(self, golden_limsup):
        cert = golden_limsup[1]
        bad = dataclasses.replace(cert, strip_radii=(Fraction(1, 10), *cert.strip_radii[1:]))
        with pytest.raises(VerificationError) as info:
            verify_empty_limsup(bad)
        assert info.value.check == "c"

    def test_strips_overlap(self, golden_limsup):
        cert = golden_limsup[1]
        bad = dataclasses.replace(cert, strip_radii=(Fraction(9, 20), *cert.strip_radii[1:]))
        with pytest.raises(VerificationError) as info:
            verify_empty_limsup(bad)
        assert info.value.check == "d"


class TestNonBorelCantelli:
    def test_faithful_schedule(self, liouville_d1_eq3):
        _, cert = liouville_d1_eq3
        schedule = non_bc_schedule(cert)
        assert [(b.start, b.end) for b in schedule.blocks] == [(1, 1), (2, 63), (64, 294911)]
        assert schedule.monotone
        for i in range(len(schedule)):
            assert Fraction(1, 2) <= schedule.block_mass(i) <= 1

    def test_faithful_needs_eq3(self, liouville_d2_eq7):
        with pytest.raises(CertificateError):
            non_bc_schedule(liouville_d2_eq7[1])

    def test_n_max_beyond_certificate(self, liouville_d1_eq3):
        with pytest.raises(CertificateError):
            non_bc_schedule(liouville_d1_eq3[1], 5)

    def test_faithful_verification(self, liouville_d1_eq3):
        alpha, cert = liouville_d1_eq3
        report = verify_non_bc(alpha, cert, non_bc_schedule(cert))
        assert report.regime == "faithful"
        assert all(b.measure is None for b in report.blocks)
        assert report.constant == 4.0
        assert report.tail_constant == pytest.approx(8.0)

    def test_mismatched_schedule(self, liouville_d1_eq3, convergent_eq3):
        alpha, cert = liouville_d1_eq3
        other = non_bc_schedule(convergent_eq3[1], 3, regime="simulable")
        with pytest.raises(VerificationError) as info:
            verify_non_bc(alpha, cert, other)
        assert info.value.check == "schedule"

    def test_simulable_measures_shrink(self, convergent_eq3):
        alpha, cert = convergent_eq3
        schedule = non_bc_schedule(cert, regime="simulable")
        report = verify_non_bc(alpha, cert, schedule, regime="simulable")
        measured = [b for b in report.blocks if b.n >= 2]
        assert [round(b.measure.value, 2) for b in measured] == [0.99, 0.44, 0.25]
        assert report.measures_decreasing
        for b in measured:
            assert b.measure.value <= float(b.measure_bound) + 1e-9
