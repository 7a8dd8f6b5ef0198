import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edchrom.diagnostics import (
    displacement_plateau,
    front_position,
    longest_plateau,
    oscillation_index,
    operating_line_check,
    plateau_width,
    restrict_point_values,
    self_convergence_order,
    total_mass,
)
from edchrom.isotherm import LangmuirParams


class TestTotalMass:
    def test_zero(self):
        np.testing.assert_array_equal(total_mass(np.zeros((2, 10)), 0.1), [0.0, 0.0])

    @given(st.lists(st.floats(0, 1e6), min_size=1, max_size=200))
    def test_exact_summation(self, values):
        w = np.array(values)[None, :]
        exact = float(sum(Fraction(v) for v in values))
        assert total_mass(w, 1.0)[0] == exact

    @given(st.lists(st.floats(0, 1e3), min_size=2, max_size=100), st.integers(1, 99))
    def test_additive_over_partitions(self, values, cut):
        w = np.array(values)[None, :]
        k = cut % (len(values) - 1) + 1
        whole = total_mass(w, 1.0)[0]
        # every total is correctly rounded, so splitting costs at most the
        # two roundings of the parts
        parts = [total_mass(w[:, :k], 1.0)[0], total_mass(w[:, k:], 1.0)[0]]
        exact = sum(Fraction(v) for v in values)
        assert whole == float(exact)
        assert abs(math.fsum(parts) - whole) <= 2 * math.ulp(whole)


class TestOscillationIndex:
    def test_monotone_step(self):
        assert oscillation_index(np.r_[np.ones(10), np.zeros(10)], 1.0) == 0.0

    def test_single_hump(self):
        assert oscillation_index(np.r_[0, 0.5, 1, 0.7, 0.2, 0], 1.0) == 0.0

    def test_overshoot(self):
        v = np.r_[np.ones(5), 1.2, np.zeros(5)]
        assert oscillation_index(v, 1.0) >= 0.2 - 1e-15  # 1.2 - 1 is not exact in binary

    def test_wiggle_counted(self):
        v = np.r_[np.ones(5), 0.9, 1.0, 0.0, 0.0]
        assert oscillation_index(v, 1.0) == pytest.approx(0.2)

    def test_undershoot_from_w(self):
        c = np.zeros((1, 5))
        w = np.array([[0.0, -0.02, 0.0, 0.0, 0.0]])
        assert oscillation_index(c, 1.0, w, np.array([1.0])) == pytest.approx(0.01)

    def test_max_over_components_and_nonfinite(self):
        c = np.vstack([np.zeros(4), [0, 1.1, 0, 0]])
        assert oscillation_index(c, [1.0, 1.0]) == pytest.approx(0.1 + 0.0)
        assert oscillation_index(np.array([0.0, np.nan]), 1.0) == math.inf


class TestFront:
    def test_step(self):
        v = np.r_[np.ones(7), np.zeros(13)]
        assert front_position(v[None, :], 0, 0.05) == pytest.approx(7 * 0.05)

    def test_tie_goes_downstream(self):
        v = np.array([[1.0, 0.0, 1.0, 0.0]])
        assert front_position(v, 0, 0.25) == pytest.approx(0.75)

    def test_flat(self):
        assert math.isnan(front_position(np.ones((1, 5)), 0, 0.2))

    def test_smooth_front_stable_under_refinement(self):
        pos = []
        for m in (100, 300, 900):
            z = (np.arange(m) + 0.5) / m
            pos.append(front_position((0.5 * (1 - np.tanh((z - 0.437) / 0.03)))[None, :], 0, 1 / m))
        assert abs(pos[-1] - 0.437) <= 1 / 900
        assert abs(pos[0] - pos[-1]) <= 1 / 100


class TestOperatingLine:
    iso = LangmuirParams([4.0, 5.0, 6.0], [4.0, 5.0, 1.0], 0.5)

    def test_experiment_1(self):
        np.testing.assert_array_equal(operating_line_check(self.iso, 2, 1.0), [True, True, False])

    def test_experiment_2_tie_not_flagged(self):
        np.testing.assert_array_equal(operating_line_check(self.iso, 2, 0.5), [False, True, False])

    def test_experiment_3(self):
        np.testing.assert_array_equal(operating_line_check(self.iso, 2, 0.1), [False, False, False])

    def test_requires_positive_displacer(self):
        with pytest.raises(ValueError):
            operating_line_check(self.iso, 2, 0.0)


def test_plateau_width():
    v = np.r_[np.zeros(5), np.full(12, 0.05), np.linspace(0.05, 0, 10)]
    assert plateau_width(v, 0.01) == pytest.approx(0.13)  # flat run plus the ramp's first cell
    assert plateau_width(np.linspace(0, 1, 50), 0.02) == pytest.approx(0.02)
    assert longest_plateau(v, 0.01)[1] == pytest.approx(0.05, rel=1e-3)
    assert longest_plateau(np.zeros(4), 0.1) == (0.0, 0.0)


def train(gap: int, level: float = 0.05) -> np.ndarray:
    """Displacer behind a flat band of component 0, optionally with an empty gap."""
    c = np.zeros((2, 60))
    c[1, :20] = 1.0
    c[0, 20 + gap:35 + gap] = level
    return c


class TestDisplacementPlateau:
    def test_attached_and_steady(self):
        assert displacement_plateau([train(0), train(0)], 0, 1, 0.01)

    def test_gap_to_displacer(self):
        assert not displacement_plateau([train(5), train(5)], 0, 1, 0.01)

    def test_level_must_hold(self):
        assert not displacement_plateau([train(0, 0.05), train(0, 0.049)], 0, 1, 0.01)

    def test_too_narrow(self):
        assert not displacement_plateau([train(0), train(0)], 0, 1, 0.01, min_width=0.2)

    def test_single_snapshot_is_not_enough(self):
        assert not displacement_plateau([train(0)], 0, 1, 0.01)


class TestConvergenceOrder:
    def test_linear_sequence(self):
        exact = np.linspace(0, 1, 11)
        runs = [exact + h for h in (0.4, 0.2, 0.1)]
        assert self_convergence_order(*runs) == pytest.approx(1.0)

    def test_indistinguishable(self):
        v = np.ones(5)
        assert math.isnan(self_convergence_order(v, v, v))

    def test_restrict(self):
        fine = np.arange(9.0)
        np.testing.assert_array_equal(restrict_point_values(fine, 3), [1, 4, 7])
        with pytest.raises(ValueError):
            restrict_point_values(fine, 2)
