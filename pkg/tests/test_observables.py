import math

import numpy as np
import pytest

from heatbounds.dynamics import BlochVector
from heatbounds.observables import (
    NonpositiveTraceError,
    bounds_from_trajectories,
    cgf,
    crossover_time,
    entropic_bound,
    entropic_bound_closed_form,
    entropy_from_norm,
    mean_heat,
    thermodynamic_bound,
    von_neumann_entropy,
)

from conftest import BETA


def reference_entropy(r):
    """Direct artanh-form entropy, evaluated independently of the package."""
    if r == 0.0:
        return math.log(2.0)
    return (
        -math.log(math.sqrt(1.0 - r * r))
        - r * math.atanh(r)
        + math.log(2.0)
    )


class TestEntropy:
    def test_maximally_mixed(self):
        assert von_neumann_entropy(BlochVector(0, 0, 0)) == pytest.approx(
            math.log(2.0), rel=1e-14
        )

    def test_pure_state(self):
        assert von_neumann_entropy(BlochVector(0, 0, 1.0)) == 0.0
        assert von_neumann_entropy(BlochVector(1.0, 0, 0)) == 0.0

    def test_cross_check_two_closed_forms(self):
        # eigenvalue form vs -ln sqrt(1-v^2) - v artanh v + ln 2
        for r in (0.28, 0.5, 0.9, 0.999):
            got = entropy_from_norm(r)
            assert got == pytest.approx(reference_entropy(r), rel=1e-12)

    def test_value_at_028(self):
        assert von_neumann_entropy(BlochVector(0, 0, 0.28)) == pytest.approx(
            0.6534181947937018, abs=1e-12
        )

    def test_domain_error(self):
        with pytest.raises(ValueError):
            von_neumann_entropy(BlochVector(1.0 + 1e-9, 0, 0))

    def test_vectorized(self):
        rs = np.array([0.0, 0.3, 1.0])
        vals = entropy_from_norm(rs)
        assert vals.shape == (3,)
        assert vals[0] == pytest.approx(math.log(2.0))
        assert vals[2] == 0.0

    def test_accepts_component_arrays(self):
        assert von_neumann_entropy([0.0, 0.0, 0.28]) == pytest.approx(
            von_neumann_entropy(BlochVector(0, 0, 0.28))
        )


class TestEntropicBound:
    def test_no_change_no_bound(self):
        v = BlochVector(0.2, 0.1, -0.3)
        assert entropic_bound(v, v) == 0.0

    def test_from_center_always_nonnegative(self):
        center = BlochVector(0, 0, 0)
        for target in (BlochVector(0, 0, 0.4), BlochVector(0.9, 0, 0.1)):
            b = entropic_bound(center, target)
            assert b == pytest.approx(
                math.log(2.0) - von_neumann_entropy(target), rel=1e-12
            )
            assert b >= 0.0

    def test_artanh_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            r0, rt = rng.uniform(0.0, 1.0 - 1e-6, size=2)
            stable = entropy_from_norm(r0) - entropy_from_norm(rt)
            closed = entropic_bound_closed_form(r0, rt)
            assert abs(stable - closed) < 1e-10


class TestThermodynamicBound:
    def test_unit_trace_gives_zero(self):
        assert thermodynamic_bound(1.0) == 0.0

    def test_nonpositive_trace_rejected(self):
        with pytest.raises(NonpositiveTraceError):
            thermodynamic_bound(0.0)
        with pytest.raises(NonpositiveTraceError):
            thermodynamic_bound(np.array([1.0, -0.2]))

    def test_vectorized_log(self):
        out = thermodynamic_bound(np.array([1.0, np.e]))
        assert out[0] == 0.0
        assert out[1] == pytest.approx(-1.0)


class TestMeanHeat:
    def test_sign_convention(self):
        assert mean_heat(-0.25) == pytest.approx(0.25)

    def test_zero_at_zero(self):
        assert mean_heat(0.0) == 0.0

    def test_imaginary_part_guard(self):
        with pytest.raises(ValueError):
            mean_heat(np.array([0.1 + 0.01j]))

    def test_array(self):
        out = mean_heat(np.array([-0.1 + 0j, -0.2 + 0j]))
        assert np.allclose(out, [0.1, 0.2])


class TestCgf:
    def test_zero_field_zero_cgf(self, trajectory_pair):
        traj0, _ = trajectory_pair((0.0, 0.0, 0.28))
        assert np.max(np.abs(cgf(traj0.v0.real))) < 1e-9

    def test_beta_field_equals_minus_thermo_bound(self, trajectory_pair):
        _, traj_b = trajectory_pair((0.0, 0.0, 0.28))
        v0 = traj_b.v0.real
        assert np.allclose(cgf(v0), -thermodynamic_bound(v0), atol=1e-15)

    def test_convexity_gives_jensen_bound(self, bounds_028):
        # ln v0(beta) >= -beta <Q>  <=>  beta <Q> >= thermodynamic bound
        assert np.all(bounds_028.beta_heat >= bounds_028.thermodynamic - 1e-10)

    def test_nonpositive_trace(self):
        with pytest.raises(NonpositiveTraceError):
            cgf(-1.0)


class TestBoundsSeries:
    def test_bounds_sit_below_heat(self, bounds_028, bounds_m05):
        for series in (bounds_028, bounds_m05):
            assert np.all(series.entropic <= series.beta_heat + 1e-8)
            assert np.all(series.thermodynamic <= series.beta_heat + 1e-8)

    def test_initial_values_are_zero(self, bounds_028):
        assert bounds_028.beta_heat[0] == 0.0
        assert bounds_028.entropic[0] == 0.0
        assert abs(bounds_028.thermodynamic[0]) < 1e-14

    def test_requires_sensitivity(self, trajectory_pair):
        _, traj_b = trajectory_pair((0.0, 0.0, 0.28))
        with pytest.raises(ValueError):
            bounds_from_trajectories(traj_b, traj_b, BETA)


class TestCrossoverTime:
    def test_identical_series_no_crossover(self):
        t = np.linspace(0.0, 10.0, 50)
        c = np.ones_like(t)
        assert crossover_time(t, c, c).time is None

    def test_linear_crossing_located(self):
        t = np.linspace(0.0, 10.0, 101)
        b_en = np.full_like(t, 2.0)
        b_th = t  # crosses b_en at exactly t = 2
        res = crossover_time(t, b_en, b_th)
        assert res.time == pytest.approx(2.0, abs=1e-12)

    def test_bisection_refinement_with_interpolant(self):
        t = np.linspace(0.0, 10.0, 21)  # coarse grid
        diff = np.cos(t)  # first root at pi/2

        res = crossover_time(t, np.zeros_like(t), diff, diff_fn=np.cos)
        assert res.time == pytest.approx(math.pi / 2.0, abs=1e-3)

    def test_first_crossing_reported_extra_recorded(self):
        t = np.linspace(0.0, 10.0, 201)
        diff = np.sin(t)  # roots at pi, 2*pi; leading zeros at t = 0 skipped
        res = crossover_time(t, np.zeros_like(t), diff)
        assert res.time == pytest.approx(math.pi, abs=1e-2)
        assert len(res.additional) == 2
        assert res.additional[0] == pytest.approx(2.0 * math.pi, abs=0.1)
        assert res.additional[1] == pytest.approx(3.0 * math.pi, abs=0.1)

    def test_leading_zeros_skipped(self):
        t = np.linspace(0.0, 5.0, 51)
        diff = np.where(t < 1.0, 0.0, -1.0)  # never changes sign
        assert crossover_time(t, np.zeros_like(t), diff).time is None

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ValueError):
            crossover_time(np.arange(5.0), np.zeros(5), np.zeros(4))

    def test_standard_cases(self, bounds_028, bounds_m05):
        res_none = crossover_time(
            bounds_028.times, bounds_028.entropic, bounds_028.thermodynamic
        )
        assert res_none.time is None
        res = crossover_time(
            bounds_m05.times, bounds_m05.entropic, bounds_m05.thermodynamic
        )
        assert res.time is not None
        assert 3.0 < res.time < 5.0
