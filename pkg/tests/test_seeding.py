"""Tests for seed derivation."""

import numpy as np
import pytest

from branchlab.seeding import derive_seed, rng_for


class TestDeriveSeed:
    """derive_seed mixes (master, index) into a 64-bit seed."""

    def test_deterministic(self):
        assert derive_seed(42, 7) == derive_seed(42, 7)

    def test_in_range(self):
        for index in range(100):
            assert 0 <= derive_seed(2**64 - 1, index) < 2**64

    def test_no_collisions(self):
        seeds = {derive_seed(0, i) for i in range(10_000)}
        assert len(seeds) == 10_000

    def test_master_matters(self):
        assert derive_seed(1, 0) != derive_seed(2, 0)

    def test_arguments_not_symmetric(self):
        assert derive_seed(1, 2) != derive_seed(2, 1)

    @pytest.mark.parametrize("master,index", [(-1, 0), (0, -1), (2**64, 0), (0, 2**64)])
    def test_out_of_range(self, master, index):
        with pytest.raises(ValueError, match=r"2\^64"):
            derive_seed(master, index)


class TestRngFor:
    """Per-task numpy generators."""

    def test_same_stream(self):
        assert np.array_equal(rng_for(5, 3).random(10), rng_for(5, 3).random(10))

    def test_distinct_streams(self):
        assert not np.array_equal(rng_for(5, 3).random(10), rng_for(5, 4).random(10))

    def test_matches_derived_seed(self):
        expected = np.random.default_rng(derive_seed(9, 1)).integers(0, 1000, 5)
        assert np.array_equal(rng_for(9, 1).integers(0, 1000, 5), expected)
