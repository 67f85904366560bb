"""Tests for candidate probability laws and the Born derivation checks."""

import math

import numpy as np
import pytest

from branchlab.bornlaw import (
    GeneralAffineFamily,
    LawKind,
    Probe,
    affine_quadratic,
    born_law,
    check_constraints,
    compose_auxiliary,
    counterexample_law,
    counting_law,
    custom_law,
    default_probes,
    derive_born,
    general_affine,
    lagrange_residual,
    lambda_spread,
    law_from_name,
    range_violation,
    single_detector_reduction,
)
from branchlab.tensorcore import Factor, StateVector, normalize, single_factor_state
from branchlab.types import LawError, StateError

THREE_POINT = [math.sqrt(0.5), math.sqrt(0.3), math.sqrt(0.2)]


class TestLawConstruction:
    """Constructors and evaluation."""

    def test_born_is_identity(self):
        x = np.linspace(0, 1, 11)
        assert np.array_equal(born_law().evaluate(1, x), x)

    def test_affine_quadratic_values(self):
        law = affine_quadratic()
        assert float(law.evaluate(1, 0.9)) == pytest.approx(0.8 * 0.9 + 0.2 * 0.81)

    def test_affine_quadratic_rejects_negative(self):
        with pytest.raises(LawError):
            affine_quadratic(-0.1, 0.2)

    def test_counterexample_zero_epsilon_is_born(self):
        assert counterexample_law(0.0).kind == LawKind.BORN

    def test_counterexample_claims_two_outcomes(self):
        assert counterexample_law(0.05).claimed_n == "2"

    def test_counterexample_epsilon_range(self):
        with pytest.raises(LawError):
            counterexample_law(0.2)

    def test_general_affine_offsets_cycle(self):
        law = general_affine(2.0, [0.1, -0.1])
        assert law.offset(1) == 0.1
        assert law.offset(2) == -0.1
        assert law.offset(3) == 0.1

    def test_counting_law(self):
        law = counting_law(4)
        assert np.all(law.evaluate(1, [0.1, 0.9]) == 0.25)

    def test_identifier(self):
        assert born_law().identifier == "born"
        assert affine_quadratic().identifier == "affine_quadratic(alpha=0.8,beta=0.2)"

    def test_law_from_name(self):
        law = law_from_name("odd_counterexample", epsilon=0.05)
        assert law.kind == LawKind.ODD_COUNTEREXAMPLE

    def test_law_from_name_unknown(self):
        with pytest.raises(LawError):
            law_from_name("nope")

    def test_law_from_name_bad_params(self):
        with pytest.raises(LawError):
            law_from_name("born", epsilon=0.1)

    @pytest.mark.parametrize(
        "law",
        [
            born_law(),
            affine_quadratic(),
            counterexample_law(0.05),
            general_affine(2.0, 0.01),
            counting_law(3),
            custom_law(lambda k, x: x**1.5, "power"),
        ],
        ids=lambda law: law.identifier,
    )
    def test_log_evaluate_matches_evaluate(self, law):
        x = np.array([1e-6, 0.01, 0.3, 0.5, 0.9, 1.0])
        logged = np.exp(law.log_evaluate(1, np.log(x)))
        assert np.allclose(logged, law.evaluate(1, x), rtol=1e-12, atol=0)

    def test_log_evaluate_survives_underflow(self):
        law = affine_quadratic()
        value = law.log_evaluate(1, -2000.0)
        assert np.isfinite(value)
        assert float(value) == pytest.approx(math.log(0.8) - 2000.0)


class TestConstraints:
    """Sum-to-one and range checks."""

    @pytest.mark.parametrize("n", [2, 3, 5, 8])
    def test_born_sums_to_one(self, n):
        report = check_constraints(born_law(), n, 2000, rng_seed=n)
        assert report.max_sum_violation <= 1e-12
        assert report.max_range_violation == 0.0
        assert report.samples == 2000

    def test_counterexample_holds_for_two_outcomes(self):
        report = check_constraints(counterexample_law(0.05), 2, 5000, rng_seed=1)
        assert report.max_sum_violation <= 1e-12

    def test_counterexample_fails_for_three_outcomes(self):
        report = check_constraints(
            counterexample_law(0.05), 3, 100, rng_seed=1, extra_points=[THREE_POINT]
        )
        assert report.max_sum_violation > 0.01

    def test_counterexample_violation_at_named_point(self):
        law = counterexample_law(0.05)
        total = sum(float(law.evaluate(k, a * a)) for k, a in enumerate(THREE_POINT, start=1))
        expected = 0.05 * (math.sin(2 * math.pi * 0.3) + math.sin(2 * math.pi * 0.2))
        assert total - 1 == pytest.approx(expected, abs=1e-12)

    def test_affine_quadratic_fails(self):
        report = check_constraints(affine_quadratic(), 2, 1000, rng_seed=3)
        assert report.max_sum_violation > 1e-3

    def test_needs_two_outcomes(self):
        with pytest.raises(LawError):
            check_constraints(born_law(), 1, 10, rng_seed=0)

    def test_extra_points_shape_checked(self):
        with pytest.raises(LawError):
            check_constraints(born_law(), 3, 10, rng_seed=0, extra_points=[[1.0, 0.0]])

    def test_range_violation_of_negative_offset(self):
        assert range_violation(general_affine(2.0, -0.1), 2) == pytest.approx(0.1)

    def test_counterexample_stays_in_range(self):
        assert range_violation(counterexample_law(0.05), 2) == 0.0


class TestReduction:
    """Splitting ψ along a detected target."""

    def test_orthonormal_components(self):
        factor = Factor("s", (1, 2))
        psi = single_factor_state(factor, [0.6, 0.8])
        target = single_factor_state(factor, [1.0, 0.0])
        result = single_detector_reduction(psi, target)
        assert result.a1 == pytest.approx(0.6, abs=1e-15)
        assert result.remainder is not None
        assert np.allclose(result.remainder.amps, [0.0, 1.0], atol=1e-15)

    def test_target_itself_is_degenerate(self):
        factor = Factor("s", (1, 2))
        psi = single_factor_state(factor, [0.6, 0.8])
        result = single_detector_reduction(psi, psi)
        assert result.degenerate
        assert result.a1 == pytest.approx(1.0, abs=1e-12)

    def test_random_reconstruction(self, rng):
        factor = Factor("s", tuple(range(5)))

        def draw() -> StateVector:
            amps = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            return normalize(StateVector((factor,), amps))

        psi, target = draw(), draw()
        result = single_detector_reduction(psi, target)
        assert result.remainder is not None
        overlap = np.vdot(target.amps, result.remainder.amps)
        assert abs(overlap) <= 1e-12
        rebuilt = (
            result.phase * result.a1 * target.amps
            + math.sqrt(1 - result.a1**2) * result.remainder.amps
        )
        assert np.max(np.abs(rebuilt - psi.amps)) <= 1e-12

    def test_unnormalised_rejected(self):
        factor = Factor("s", (1, 2))
        with pytest.raises(StateError):
            single_detector_reduction(
                single_factor_state(factor, [1.0, 1.0]),
                single_factor_state(factor, [1.0, 0.0]),
            )


class TestLagrange:
    """Derivative quotients (1/a)·∂P/∂a."""

    def test_born_common_value_two(self):
        report = lagrange_residual(born_law(), THREE_POINT)
        assert report.max_residual <= 1e-6
        assert all(v == pytest.approx(2.0, abs=1e-6) for v in report.values)

    def test_zero_component_skipped(self):
        report = lagrange_residual(born_law(), [1.0, 0.0])
        assert report.skipped == [2]
        assert report.values[1] is None

    def test_affine_quadratic_values_differ(self):
        report = lagrange_residual(affine_quadratic(), [math.sqrt(0.9), math.sqrt(0.1)])
        assert report.max_residual > 0.1

    def test_counterexample_lambda_varies_across_points(self):
        points = [[math.sqrt(x), math.sqrt(1 - x)] for x in (0.1, 0.2, 0.4)]
        assert lambda_spread(counterexample_law(0.05), points) > 0.05

    def test_born_lambda_spread_vanishes(self):
        points = [[math.sqrt(x), math.sqrt(1 - x)] for x in (0.1, 0.2, 0.4)]
        assert lambda_spread(born_law(), points) <= 1e-6


class TestComposition:
    """Product rule for an outcome-dependent second experiment."""

    def test_born_satisfies_product_rule(self):
        a = [math.sqrt(0.6), math.sqrt(0.4)]
        b = [[1 / math.sqrt(3)] * 3, [1 / math.sqrt(2)] * 2]
        report = compose_auxiliary(born_law(), a, b)
        assert report.max_violation <= 1e-14
        assert len(report.violations) == 5

    def test_composed_state_normalised(self):
        a = [math.sqrt(0.6), math.sqrt(0.4)]
        b = [[1 / math.sqrt(3)] * 3, [1 / math.sqrt(2)] * 2]
        report = compose_auxiliary(born_law(), a, b)
        assert report.composed is not None
        assert report.composed.norm() == pytest.approx(1.0, abs=1e-12)
        assert report.composed.factor_names == ("system", "auxiliary")

    def test_counterexample_hand_expansion(self):
        eps = 0.05
        law = counterexample_law(eps)
        a = [math.sqrt(0.9), math.sqrt(0.1)]
        b = [[1 / math.sqrt(2)] * 2, [1 / math.sqrt(2)] * 2]
        report = compose_auxiliary(law, a, b)

        def p(x: float) -> float:
            return x + eps * math.sin(2 * math.pi * x)

        oracle = abs(p(0.45) - p(0.9) * p(0.5))
        assert report.max_violation == pytest.approx(oracle, rel=1e-9)
        assert report.max_violation == pytest.approx(0.603 * eps, rel=0.05)

    def test_nonzero_offset_fails(self):
        c = 0.05
        a = [math.sqrt(0.1), math.sqrt(0.9)]
        b = [[math.sqrt(0.05), math.sqrt(0.95)], [math.sqrt(0.5), math.sqrt(0.5)]]
        report = compose_auxiliary(general_affine(2.0, c), a, b)
        assert report.max_violation > c / 2

    def test_joint_law_uses_composed_index(self):
        """Outcome (2, 1) is the third composed outcome and picks up the third offset."""
        law = general_affine(2.0, (0.0, 0.0, 0.1))
        a = [math.sqrt(0.5), math.sqrt(0.5)]
        b = [[math.sqrt(0.5), math.sqrt(0.5)], [1.0]]
        report = compose_auxiliary(law, a, b)
        assert report.violations[(1, 1)] <= 1e-15
        assert report.violations[(1, 2)] <= 1e-15
        assert report.violations[(2, 1)] == pytest.approx(0.1, abs=1e-12)

    def test_mismatched_auxiliary_count(self):
        with pytest.raises(StateError):
            compose_auxiliary(born_law(), [1.0, 0.0], [[1.0]])

    def test_unnormalised_auxiliary(self):
        with pytest.raises(StateError):
            compose_auxiliary(born_law(), [1.0], [[0.5, 0.5]])


class TestDeriveBorn:
    """Solving the affine family from the composition conditions."""

    def test_two_outcomes(self):
        solution = derive_born(GeneralAffineFamily(2), default_probes(2))
        assert solution.lam == pytest.approx(2.0, abs=1e-10)
        assert solution.offsets == pytest.approx([0.0, 0.0], abs=1e-10)
        assert solution.rank == 3

    def test_five_outcomes(self):
        solution = derive_born(GeneralAffineFamily(5), default_probes(5))
        assert solution.lam == pytest.approx(2.0, abs=1e-10)
        assert max(abs(c) for c in solution.offsets) <= 1e-10

    def test_invariant_under_probe_change(self):
        first = derive_born(GeneralAffineFamily(3), default_probes(3))
        probes = [
            Probe(k, x, (0.1, 0.3, 0.9)) for k in range(1, 4) for x in (0.15, 0.45, 0.85)
        ]
        second = derive_born(GeneralAffineFamily(3), probes)
        assert abs(first.lam - second.lam) <= 1e-10
        assert np.max(np.abs(np.subtract(first.offsets, second.offsets))) <= 1e-10

    def test_noisy_probes(self):
        ys = tuple(float(y) for y in np.linspace(0.1, 0.9, 9))
        probes = [Probe(k, float(x), ys) for k in (1, 2) for x in np.linspace(0.1, 0.9, 9)]
        solution = derive_born(GeneralAffineFamily(2), probes, noise=1e-3, rng_seed=11)
        assert solution.lam == pytest.approx(2.0, abs=1e-2)
        assert solution.offsets == pytest.approx([0.0, 0.0], abs=1e-2)

    def test_noise_perturbs_measured_weights(self):
        exact = derive_born(GeneralAffineFamily(2), default_probes(2))
        noisy = derive_born(GeneralAffineFamily(2), default_probes(2), noise=1e-3, rng_seed=5)
        again = derive_born(GeneralAffineFamily(2), default_probes(2), noise=1e-3, rng_seed=5)
        assert exact.residual <= 1e-12
        assert noisy.residual > 1e-6
        assert noisy.lam != exact.lam
        assert (noisy.lam, noisy.offsets) == (again.lam, again.offsets)

    def test_slope_taken_from_composed_weights(self):
        """Rows pair (λ/2)x + c(k) with the slope of x·y against y, whatever the y spacing."""
        probes = [
            Probe(1, 0.3, (0.05, 0.2)),
            Probe(1, 0.7, (0.4, 0.45, 0.99)),
            Probe(2, 0.1, (0.6, 0.61)),
            Probe(2, 0.5, (0.01, 0.5, 0.9, 0.95)),
        ]
        solution = derive_born(GeneralAffineFamily(2), probes)
        assert solution.lam == pytest.approx(2.0, abs=1e-10)
        assert solution.offsets == pytest.approx([0.0, 0.0], abs=1e-10)

    def test_outcome_out_of_range(self):
        probes = [*default_probes(2), Probe(3, 0.5, (0.25, 0.75))]
        with pytest.raises(LawError, match="outside"):
            derive_born(GeneralAffineFamily(2), probes)

    def test_single_y_is_degenerate(self):
        probes = [Probe(k, x, (0.5,)) for k in (1, 2) for x in (0.2, 0.6)]
        with pytest.raises(LawError):
            derive_born(GeneralAffineFamily(2), probes)

    def test_single_x_is_rank_deficient(self):
        probes = [Probe(k, 0.2, (0.25, 0.75)) for k in (1, 2)]
        with pytest.raises(LawError):
            derive_born(GeneralAffineFamily(2), probes)

    def test_no_probes(self):
        with pytest.raises(LawError):
            derive_born(GeneralAffineFamily(2), [])
