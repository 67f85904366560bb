"""Tests for ancilla fine-graining."""

from fractions import Fraction

import numpy as np
import pytest

from branchlab.finegrain import (
    READY,
    FineGrainPlan,
    SwapVerdict,
    branch_count_probability,
    fine_grain,
    swap_admissibility,
    uniformize_workaround,
)
from branchlab.tensorcore import subspace_weight, symbol_of
from branchlab.types import StateError


class TestPlan:
    """Exact rational plans."""

    def test_from_weights(self):
        plan = FineGrainPlan.from_weights(["3/5", "2/5"])
        assert plan.M == 5
        assert plan.numerators == (3, 2)

    def test_common_denominator(self):
        plan = FineGrainPlan.from_weights([Fraction(1, 6), Fraction(1, 3), Fraction(1, 2)])
        assert plan.M == 6
        assert plan.numerators == (1, 2, 3)

    def test_float_rejected(self):
        with pytest.raises(StateError):
            FineGrainPlan.from_weights([0.5, 0.5])

    def test_must_sum_to_one(self):
        with pytest.raises(StateError):
            FineGrainPlan.from_weights(["1/2", "1/3"])

    def test_negative_rejected(self):
        with pytest.raises(StateError):
            FineGrainPlan.from_weights(["3/2", "-1/2"])

    def test_garbage_rejected(self):
        with pytest.raises(StateError):
            FineGrainPlan.from_weights(["half", "half"])

    def test_dict_round_trip(self):
        plan = FineGrainPlan.from_weights(["3/5", "2/5"])
        assert FineGrainPlan.from_dict(plan.to_dict()) == plan

    def test_inconsistent_plan_rejected(self):
        with pytest.raises(StateError):
            FineGrainPlan(5, (3, 3))


class TestFineGrain:
    """Equal-amplitude fine-grained branches."""

    def test_three_fifths_two_fifths(self):
        fg = fine_grain(["3/5", "2/5"])
        assert len(fg.branches) == 5
        assert all(b.weight == Fraction(1, 5) for b in fg.branches)
        assert branch_count_probability(fg) == (Fraction(3, 5), Fraction(2, 5))
        assert branch_count_probability(fg.plan) == (Fraction(3, 5), Fraction(2, 5))

    def test_certain_outcome(self):
        fg = fine_grain([1, 0])
        assert branch_count_probability(fg) == (Fraction(1), Fraction(0))
        assert fg.ancilla_size(2) == 0

    def test_rational_triple_matches_coarse_born(self):
        weights = [Fraction(2, 7), Fraction(1, 3), Fraction(8, 21)]
        fg = fine_grain(weights)
        assert branch_count_probability(fg) == tuple(weights)
        for k, w in enumerate(weights, start=1):
            coarse = subspace_weight(fg.state, lambda e, k=k: symbol_of(e, "system") == k)
            assert coarse == pytest.approx(float(w), abs=1e-12)

    def test_branch_amplitudes_are_equal(self):
        fg = fine_grain(["3/5", "2/5"])
        nonzero = fg.state.amps[np.abs(fg.state.amps) > 0]
        assert nonzero.size == 5
        assert np.max(np.abs(np.abs(nonzero) ** 2 - 0.2)) <= 1e-15
        assert fg.state.norm() == pytest.approx(1.0, abs=1e-12)

    def test_other_ancillas_stay_ready(self):
        fg = fine_grain(["3/5", "2/5"])
        stray = subspace_weight(
            fg.state,
            lambda e: symbol_of(e, "system") == 1 and symbol_of(e, "ancilla_2") != READY,
        )
        assert stray == 0.0

    def test_serialisable(self):
        data = fine_grain(["1/2", "1/2"]).to_dict()
        assert data["plan"]["M"] == 2
        assert len(data["branches"]) == 2


class TestSwaps:
    """Symmetry arguments between fine-grained branches."""

    def test_across_outcomes_dissimilar(self):
        report = swap_admissibility(fine_grain(["3/5", "2/5"]), 3, 4)
        assert report.verdict is SwapVerdict.DISSIMILAR
        assert not report.admissible
        assert report.exchanges_system_labels
        assert "ancilla sizes differ (3 vs 2)" in report.detail

    def test_within_outcome_admissible(self):
        report = swap_admissibility(fine_grain(["3/5", "2/5"]), 1, 2)
        assert report.admissible
        assert not report.exchanges_system_labels
        assert report.detail == ""

    def test_index_out_of_range(self):
        with pytest.raises(StateError):
            swap_admissibility(fine_grain(["3/5", "2/5"]), 0, 6)


class TestUniformize:
    """Padding both ancillas to one alphabet."""

    def test_padding_is_neutral(self):
        fg = uniformize_workaround(["3/5", "2/5"])
        assert fg.ancilla_size(1) == fg.ancilla_size(2) == 3
        assert fg.padding == ((2, 3),)
        assert branch_count_probability(fg) == (Fraction(3, 5), Fraction(2, 5))
        assert fg.state.norm() == pytest.approx(1.0, abs=1e-12)

    def test_padded_swaps_admissible(self):
        fg = uniformize_workaround(["3/5", "2/5"])
        report = swap_admissibility(fg, 3, 4)
        assert report.admissible
        assert report.exchanges_system_labels

    def test_needs_two_weights(self):
        with pytest.raises(StateError):
            uniformize_workaround(["1/3", "1/3", "1/3"])
