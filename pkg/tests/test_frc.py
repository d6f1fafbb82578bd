import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnm_melnikov import ConvergenceError, DegeneracyError, PerturbationSpec, builtin_model
from nnm_melnikov.frc import (
    check_persistence,
    continue_frc,
    distance_to_orbit,
    energy_balance,
    forced_periodic_orbit,
    peak_window,
    refine_peak,
    response_phase_lag,
    track_folds,
)
from nnm_melnikov.io import ridge_from_table
from nnm_melnikov.ridge import predict_peaks


def linear_response(Omega, e, eps, c=1.0):
    """Steady displacement amplitude of x'' + eps c x' + x = eps e cos(Omega t)."""
    return eps * e / np.sqrt((1 - Omega**2) ** 2 + (eps * c * Omega) ** 2)


def monotone_ridge(omega):
    x = np.linspace(0.1, 2.0, omega.size)
    data = {"lambda": x, "omega": omega, "a": x, "h": x, "Gamma": x, "DGamma": np.ones_like(x),
            "D2Gamma": np.zeros_like(x), "class": np.array(["max_response"] * x.size, dtype=object),
            "x": x, "R": x, "A": np.ones_like(x)}
    return ridge_from_table(data)


@pytest.fixture(scope="module")
def linear_branch(linear):
    return continue_frc(linear, PerturbationSpec(e=1.0, eps=1e-3), (0.99, 1.01), ds=0.05, ds_max=0.5)


class TestLinearFrc:
    def test_matches_closed_form(self, linear_branch):
        br = linear_branch
        assert br.halt_reason == "bounds"
        assert br.omega[0] == pytest.approx(0.99) and br.omega[-1] >= 1.01
        exact = linear_response(br.omega, 1.0, 1e-3)
        assert np.max(np.abs(br.displacement - exact)) < 1e-8
        assert not br.fold.any()

    def test_energy_balance_vanishes_on_branch(self, linear_branch):
        assert np.max(np.abs(linear_branch.energy_balance)) < 1e-10

    def test_refined_peak(self, linear, linear_branch):
        spec = PerturbationSpec(e=1.0, eps=1e-3)
        (i, _, _), = linear_branch.peaks()
        rec = refine_peak(linear, spec, linear_branch, i)
        assert rec.displacement == pytest.approx(1.0 / np.sqrt(1 - 1e-6 / 4), abs=1e-6)
        assert rec.Omega == pytest.approx(1.0, abs=1e-6)
        assert response_phase_lag(rec, linear) == pytest.approx(90.0, abs=0.05)

    def test_no_fold_to_track(self, linear, linear_branch):
        k = len(linear_branch) // 2
        with pytest.raises(DegeneracyError):
            track_folds(linear, PerturbationSpec(e=1.0, eps=1e-3),
                        (linear_branch.xi[k], linear_branch.omega[k]), (0.5, 1.5))

    def test_requires_positive_eps(self, linear):
        with pytest.raises(ValueError):
            continue_frc(linear, PerturbationSpec(e=1.0, eps=0.0), (0.9, 1.1))


class TestForcedOrbit:
    def test_radius_guard(self, duffing):
        with pytest.raises(ConvergenceError, match="ball"):
            forced_periodic_orbit(duffing, PerturbationSpec(e=1.0, eps=0.05), 1.2, [3.0, 0.0], radius=1e-3)

    def test_energy_balance_is_zero_without_damping_work(self, duffing):
        assert energy_balance(duffing, PerturbationSpec(e=1.0, eps=0.0), [1.0, 0.0], 6.0) == 0.0

    def test_period_and_multipliers(self, duffing):
        rec = forced_periodic_orbit(duffing, PerturbationSpec(e=1.0, eps=0.05), 0.8, [0.0, 0.0])
        assert rec.period == pytest.approx(2 * np.pi / 0.8)
        # damped: all multipliers strictly inside the unit circle
        assert np.all(np.abs(rec.multipliers) < 1.0)
        assert np.prod(rec.multipliers).real == pytest.approx(np.exp(-0.05 * rec.period), rel=1e-6)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.5, 1.5), st.floats(0.01, 0.2), st.floats(0.2, 3.0))
def test_linear_forced_orbit_property(Omega, eps, e):
    model = builtin_model("linear_oscillator")
    spec = PerturbationSpec(e=e, eps=eps)
    rec = forced_periodic_orbit(model, spec, Omega, [0.0, 0.0])
    assert rec.displacement == pytest.approx(linear_response(Omega, e, eps), rel=1e-7)
    # damping dissipates exactly the work done by the forcing
    assert abs(rec.energy_balance) < 1e-9 * max(1.0, rec.energy)


class TestPersistence:
    def test_two_orbits_persist_near_backbone(self, duffing_orbit):
        chk = check_persistence(duffing_orbit, PerturbationSpec(e=2.1), 0.01)
        assert chk.verdict == "two_orbits"
        assert chk.found_in_ball == 2
        assert chk.distinct

    def test_no_persistence_below_ridge(self, duffing_orbit):
        chk = check_persistence(duffing_orbit, PerturbationSpec(e=0.5), 0.01, n_phases=8)
        assert chk.verdict == "no_persistence"
        assert chk.found_in_ball == 0

    def test_distance_to_orbit(self, linear_orbit):
        assert distance_to_orbit([2.0, 0.0], linear_orbit) == pytest.approx(1.0, abs=1e-9)
        assert distance_to_orbit(linear_orbit.state(1.0), linear_orbit) < 1e-8


class TestPeakWindow:
    def test_hardening_starts_below(self):
        ridge = monotone_ridge(np.linspace(1.0, 1.4, 30))
        p = predict_peaks(ridge, 1.0).peaks[0]
        lo, hi = peak_window(ridge, p, 0.1)
        assert lo == pytest.approx(0.9) and hi == pytest.approx(p.omega * 1.1)

    def test_softening_starts_above(self):
        ridge = monotone_ridge(np.linspace(1.0, 0.6, 30))
        p = predict_peaks(ridge, 1.0).peaks[0]
        start, stop = peak_window(ridge, p, 0.1)
        assert start == pytest.approx(1.1) and stop == pytest.approx(p.omega * 0.9)
