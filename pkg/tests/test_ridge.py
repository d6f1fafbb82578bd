import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnm_melnikov import DomainError, PerturbationSpec, build_ridge, phase_lag, predict_peaks
from nnm_melnikov.io import ridge_from_table
from nnm_melnikov.ridge import _local_quadratic, harmonic_phase


def synthetic_ridge(x, gamma, folds_at=()):
    """RidgeCurve with identity omega/amplitude maps and folds flagged at given indices."""
    classes = np.array(["max_response"] * x.size, dtype=object)
    d1 = np.gradient(gamma, x)
    for i in folds_at:
        classes[i] = "isola_birth" if np.gradient(d1, x)[i] > 0 else "simple_bifurcation"
    data = {"lambda": x, "omega": 1.0 + 0.1 * x, "a": x, "h": x**2, "Gamma": gamma, "DGamma": d1,
            "D2Gamma": np.gradient(d1, x), "class": classes, "x": x, "R": gamma, "A": np.ones_like(x)}
    return ridge_from_table(data)


class TestLinearRidge:
    def test_gamma_is_c_times_amplitude(self, linear_family, linear):
        ridge = build_ridge(linear_family, linear)
        assert np.max(np.abs(ridge.gamma - linear.c * ridge.amplitude)) < 1e-8
        assert set(ridge.classes) == {"max_response"}
        assert ridge.folds == ()

    def test_prediction_amplitude(self, linear_family, linear):
        ridge = build_ridge(linear_family, linear)
        for e in (0.3, 0.5, 1.7):
            ps = predict_peaks(ridge, e)
            assert len(ps) == 1
            assert ps.peaks[0].amplitude == pytest.approx(e, abs=1e-8)
            assert ps.peaks[0].kind == "max_response"

    def test_out_of_range(self, linear_family, linear):
        ridge = build_ridge(linear_family, linear)
        ps = predict_peaks(ridge, 5.0)
        assert len(ps) == 0
        assert ps.e_range[1] == pytest.approx(ridge.gamma.max())

    def test_family_too_short(self, linear_family, linear):
        from nnm_melnikov.family import OrbitFamily

        short = OrbitFamily(linear_family.orbits[:3], linear_family.parameter[:3], "energy", (None,) * 3)
        with pytest.raises(DomainError):
            build_ridge(short, linear)

    def test_damping_model_decoupled_from_family(self, linear_family):
        from nnm_melnikov import builtin_model

        heavy = builtin_model("linear_oscillator", {"c": 2.5})
        ridge = build_ridge(linear_family, heavy)
        np.testing.assert_allclose(ridge.gamma, 2.5 * ridge.amplitude, atol=1e-8)


class TestDuffingRidge:
    def test_increasing_and_hardening(self, duffing_family, duffing):
        ridge = build_ridge(duffing_family, duffing)
        assert np.all(np.diff(ridge.gamma) > 0)
        assert np.all(np.diff(ridge.omega) > 0)
        # predicted peak bends to the right of the linear frequency
        p = predict_peaks(ridge, 0.5).peaks[0]
        assert p.omega > 1.0

    def test_phase_lag_at_ridge(self, duffing_family, duffing):
        ridge = build_ridge(duffing_family, duffing)
        k = len(ridge) // 2
        orbit = duffing_family[int(np.flatnonzero(duffing_family.amplitudes == ridge.amplitude[k])[0])]
        lag = phase_lag(orbit, duffing, PerturbationSpec(e=ridge.gamma[k]))
        assert lag.predicted_deg == 90.0
        assert lag.measured_deg == pytest.approx(90.0, abs=1e-6)
        lead = phase_lag(orbit, duffing, PerturbationSpec(e=-ridge.gamma[k]))
        assert lead.predicted_deg == -90.0

    def test_phase_lag_off_ridge(self, duffing_orbit, duffing):
        with pytest.raises(DomainError):
            phase_lag(duffing_orbit, duffing, PerturbationSpec(e=3.0))


class TestFoldsAndPredictions:
    def test_local_quadratic_exact_on_parabola(self):
        x = np.linspace(0, 1, 15)
        d1, d2 = _local_quadratic(x, 3 * x**2 - x + 2, 7)
        np.testing.assert_allclose(d1, 6 * x - 1, atol=1e-10)
        np.testing.assert_allclose(d2, 6.0, atol=1e-9)

    def test_predictions_split_at_folds(self):
        x = np.linspace(-0.8, 3.0, 200)
        g = x**3 - 3 * x**2 + 5  # max at 0, min at 2
        ridge = synthetic_ridge(x, g, folds_at=(int(np.argmin(np.abs(x))), int(np.argmin(np.abs(x - 2)))))
        kinds = [p.kind for p in predict_peaks(ridge, 3.0)]
        assert kinds == ["max_response", "min_response", "max_response"]
        # below the first branch's lowest value only the later segments cross
        assert [p.kind for p in predict_peaks(ridge, 2.0)] == ["min_response", "max_response"]

    def test_ridge_table_round_trip(self, duffing_family, duffing, tmp_path):
        from nnm_melnikov import io

        ridge = build_ridge(duffing_family, duffing)
        path = io.write_csv(tmp_path / "r.csv", *io.ridge_table(ridge))
        back = io.ridge_from_table(io.read_csv(path)[1])
        np.testing.assert_array_equal(back.gamma, ridge.gamma)
        np.testing.assert_array_equal(back.x, ridge.x)
        assert back.classes == ridge.classes
        assert predict_peaks(back, 0.5).peaks[0].omega == predict_peaks(ridge, 0.5).peaks[0].omega


@settings(max_examples=25, deadline=None)
@given(st.floats(-np.pi + 1e-3, np.pi), st.integers(1, 4), st.floats(0.1, 3.0))
def test_harmonic_phase_recovers_phase(theta, l, rho):
    t = 2 * np.pi * np.arange(128) / 128
    signal = rho * np.cos(l * t - theta) + 0.3 * np.cos((l + 1) * t)
    assert harmonic_phase(signal, l) == pytest.approx(theta, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 4.5))
def test_prediction_lies_on_ridge(e):
    x = np.linspace(0.0, 3.0, 60)
    g = 1.5 * x + 0.1 * np.sin(x)
    ridge = synthetic_ridge(x, g)
    ps = predict_peaks(ridge, e)
    assert len(ps) == 1
    p = ps.peaks[0]
    assert 1.5 * p.amplitude + 0.1 * np.sin(p.amplitude) == pytest.approx(e, abs=1e-6)
