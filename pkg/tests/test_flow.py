import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnm_melnikov import FirstOrderSystem, IntegrationError, PerturbationSpec, builtin_model, kernels
from nnm_melnikov.flow import integrate, integrate_augmented, integrate_with_variations, resample_uniform


def harmonic_flow(t, w=1.0):
    c, s = np.cos(w * t), np.sin(w * t)
    return np.array([[c, s / w], [-w * s, c]])


class TestIntegrate:
    def test_harmonic_oscillator_exact(self, linear):
        system = FirstOrderSystem(linear)
        traj = integrate(system, [1.0, 0.5], (0.0, 10.0), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(traj.final, harmonic_flow(10.0) @ [1.0, 0.5], atol=1e-10)
        assert traj.energy_drift < 1e-10

    def test_dense_output_matches_exact(self, linear):
        traj = integrate(FirstOrderSystem(linear), [1.0, 0.0], (0.0, 2 * np.pi), rtol=1e-12, atol=1e-14)
        t = np.linspace(0, 2 * np.pi, 37)
        np.testing.assert_allclose(traj(t)[:, 0], np.cos(t), atol=1e-9)

    def test_backward_integration(self, duffing):
        system = FirstOrderSystem(duffing)
        fwd = integrate(system, [0.3, 0.2], (0.0, 3.0))
        back = integrate(system, fwd.final, (3.0, 0.0))
        np.testing.assert_allclose(back.final, [0.3, 0.2], atol=1e-9)

    def test_blow_up_reports_last_time(self):
        # x' = x^2 from x(0) = 1 blows up at t = 1
        with pytest.raises(IntegrationError) as info:
            integrate(lambda t, x: x**2, [1.0], (0.0, 2.0))
        assert info.value.last_time == pytest.approx(1.0, abs=1e-6)

    def test_evaluation_outside_span(self, linear):
        traj = integrate(FirstOrderSystem(linear), [1.0, 0.0], (0.0, 1.0))
        with pytest.raises(ValueError):
            traj(1.5)

    def test_zero_span(self, linear):
        traj = integrate(FirstOrderSystem(linear), [1.0, 0.0], (2.0, 2.0))
        np.testing.assert_array_equal(traj.final, [1.0, 0.0])

    def test_max_step_is_honoured(self, linear):
        traj = integrate(FirstOrderSystem(linear), [1.0, 0.0], (0.0, 5.0), max_step=0.1)
        assert np.max(np.diff(traj.t)) <= 0.1 + 1e-12

    def test_resample_uniform_grid(self, linear):
        traj = integrate(FirstOrderSystem(linear), [1.0, 0.0], (0.0, 2 * np.pi))
        t, x = resample_uniform(traj, 64)
        assert t.size == 64 and t[-1] < 2 * np.pi
        with pytest.raises(ValueError):
            resample_uniform(traj, 100)


class TestVariations:
    def test_monodromy_of_harmonic_oscillator(self, linear):
        sol = integrate_with_variations(FirstOrderSystem(linear), [1.0, 0.0], (0.0, 1.3), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(sol.Y, harmonic_flow(1.3), atol=1e-10)

    def test_fundamental_matrix_matches_finite_differences(self, duffing):
        system = FirstOrderSystem(duffing)
        xi = np.array([0.8, 0.1])
        sol = integrate_with_variations(system, xi, (0.0, 4.0), rtol=1e-12, atol=1e-14)
        h = 1e-6
        fd = np.column_stack([
            (integrate(system, xi + h * e, (0.0, 4.0), rtol=1e-12, atol=1e-14).final
             - integrate(system, xi - h * e, (0.0, 4.0), rtol=1e-12, atol=1e-14).final) / (2 * h)
            for e in np.eye(2)
        ])
        np.testing.assert_allclose(sol.Y, fd, atol=1e-6)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.5, 6.0))
    def test_liouville_for_conservative_flow(self, q, v, T):
        # det Y = 1 for any conservative (divergence-free) flow
        system = FirstOrderSystem(builtin_model("duffing"))
        sol = integrate_with_variations(system, [q, v], (0.0, T), rtol=1e-11, atol=1e-12)
        assert abs(np.linalg.det(sol.Y) - 1.0) < 1e-7

    def test_liouville_with_linear_damping(self):
        # det Y = exp(-eps c T) for x'' + eps c x' + x = 0
        system = FirstOrderSystem(builtin_model("linear_oscillator", {"c": 0.7}), PerturbationSpec(eps=0.2))
        sol = integrate_with_variations(system, [1.0, 0.0], (0.0, 3.0), rtol=1e-12, atol=1e-14)
        assert np.linalg.det(sol.Y) == pytest.approx(np.exp(-0.14 * 3.0), rel=1e-9)

    def test_parameter_sensitivity(self, linear):
        # x' = (v, -w^2 q) with p = w: dx/dw at fixed time from the exact flow
        w = 1.3

        def fun(t, x, w=w):
            return np.array([x[1], -w * w * x[0]])

        def jac(t, x):
            return np.array([[0.0, 1.0], [-w * w, 0.0]])

        def dparams(t, x):
            return np.array([[0.0], [-2 * w * x[0]]])

        sol = integrate_augmented(fun, jac, [1.0, 0.0], (0.0, 2.0), dparams=dparams, rtol=1e-12, atol=1e-14)
        exact = lambda ww: np.array([np.cos(ww * 2.0), -ww * np.sin(ww * 2.0)])
        np.testing.assert_allclose(sol.Z[:, 0], (exact(w + 1e-6) - exact(w - 1e-6)) / 2e-6, atol=1e-6)


@pytest.mark.skipif(not kernels.AVAILABLE, reason="numba not installed")
class TestCompiledKernels:
    def test_conservative_rhs_matches_numpy(self, chain6):
        from nnm_melnikov.family import ShootingOptions, _Shooter

        system = FirstOrderSystem(chain6)
        shooter = _Shooter(system, ShootingOptions())
        xi = np.random.default_rng(3).normal(size=12) * 0.2
        fast = shooter.flow(xi, 2.0, 1e-3)
        slow = shooter._flow_unit_mass(xi, 2.0, 1e-3)
        np.testing.assert_allclose(fast.x, slow.x, atol=1e-10)
        np.testing.assert_allclose(fast.Y, slow.Y, atol=1e-9)
        np.testing.assert_allclose(fast.Z, slow.Z, atol=1e-9)

    def test_forced_rhs_matches_numpy(self, chain6_nl):
        from nnm_melnikov.frc import _ForcedShooter

        shooter = _ForcedShooter(chain6_nl, 0.05)
        xi = np.random.default_rng(4).normal(size=12) * 0.2
        fast = shooter.flow(xi, 3.1, 1.5)
        shooter.table = None
        slow = shooter.flow(xi, 3.1, 1.5)
        np.testing.assert_allclose(fast.x, slow.x, atol=1e-10)
        np.testing.assert_allclose(fast.Y, slow.Y, atol=1e-9)
        np.testing.assert_allclose(fast.Z, slow.Z, atol=1e-9)
