"""Ridge curves Gamma_l = R / A_l along a backbone, peak prediction and phase lag.

Along a family, the forcing amplitude at which the m = 1 Melnikov zeros turn
quadratic is Gamma_l(lambda) = R(lambda) / A_l(lambda).  For a fixed forcing
amplitude e, ridge points with Gamma_l = e mark response extrema: a maximum
where Gamma_l grows with the orbit amplitude, a minimum where it decreases.
Extrema of Gamma_l itself are where isolas are born (minima) or reconnect
(maxima).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import brentq

from .exceptions import DegeneracyError, DomainError
from .family import continue_family, find_periodic_orbit, seed_from_linear_mode
from .melnikov import periodic_trapezoid, work_and_resistance
from .model import FirstOrderSystem, PerturbationSpec

__all__ = [
    "RidgeFold",
    "RidgeCurve",
    "PeakPrediction",
    "PeakSet",
    "PhaseLag",
    "build_ridge",
    "modal_ridge",
    "predict_peaks",
    "phase_lag",
    "harmonic_phase",
    "RIDGE_CLASSES",
]

logger = logging.getLogger(__name__)

RIDGE_CLASSES = ("max_response", "min_response", "isola_birth", "simple_bifurcation", "unclassified")
ACCURACY_NOTE = "ridge predictions are first order: expect O(eps) offsets from forced responses"


@dataclass(frozen=True)
class RidgeFold:
    """Extremum of Gamma_l located by the vertex of a local quadratic fit."""

    x: float
    e: float
    omega: float
    amplitude: float
    energy: float
    kind: str
    d2gamma: float


@dataclass(frozen=True, eq=False)
class RidgeCurve:
    """Gamma_l sampled along a family.

    ``x`` is the variable used for the derivative fits (``wrt``), oriented so
    that it increases with the orbit amplitude; ``parameter`` keeps the
    family's own parameter values and ``tag``.
    """

    l: int
    tag: str
    parameter: np.ndarray
    wrt: str
    x: np.ndarray
    gamma: np.ndarray
    dgamma: np.ndarray
    d2gamma: np.ndarray
    classes: tuple
    omega: np.ndarray
    amplitude: np.ndarray
    energy: np.ndarray
    R: np.ndarray
    A: np.ndarray
    folds: tuple
    excluded: tuple
    window: int
    band: float

    def __len__(self):
        return self.x.size

    @property
    def e_range(self):
        ok = self.gamma > 0
        if not np.any(ok):
            return (math.nan, math.nan)
        return (float(self.gamma[ok].min()), float(self.gamma[ok].max()))


@dataclass(frozen=True)
class PeakPrediction:
    e: float
    parameter: float
    omega: float
    amplitude: float
    energy: float
    kind: str


@dataclass(frozen=True)
class PeakSet:
    e: float
    peaks: tuple
    e_range: tuple
    note: str = ACCURACY_NOTE

    def __len__(self):
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)


@dataclass(frozen=True)
class PhaseLag:
    """Predicted lag (+90 lag, -90 lead) and the orbit's l-th harmonic phase.

    ``s_quadratic`` is the quadratic zero of the Melnikov profile, i.e. the
    orbit phase the forced response locks to; ``measured_deg`` is the lag of
    the l-th harmonic of <q0(t + s_quadratic), f_e> behind cos(l w t).
    """

    predicted_deg: float
    measured_deg: float
    s_quadratic: float
    harmonic_phase: float
    eR: float


def _local_quadratic(x, y, window):
    """First and second derivatives from sliding least-squares quadratics."""
    n = x.size
    half = window // 2
    d1 = np.empty(n)
    d2 = np.empty(n)
    for i in range(n):
        lo = min(max(i - half, 0), n - window)
        xs = x[lo:lo + window] - x[i]
        c = np.polyfit(xs, y[lo:lo + window], 2)
        d1[i] = c[1]
        d2[i] = 2.0 * c[0]
    return d1, d2


def _ridge_variable(family, wrt):
    values = {
        "amplitude": family.amplitudes,
        "energy": family.energies,
        "frequency": family.frequencies,
        "family": np.asarray(family.parameter, dtype=float),
    }
    if wrt not in values:
        raise ValueError(f"wrt must be one of {sorted(values)}")
    return values[wrt]


def build_ridge(family, model=None, l=1, window=7, wrt="amplitude", band=1e-6,
                min_harmonic=1e-8, shortcut_rtol=1e-6):
    """Compute Gamma_l = R / A_l along ``family`` and classify its points.

    Parameters
    ----------
    wrt : {"amplitude", "energy", "frequency", "family"}
        Variable for the derivative fits.  It is oriented to grow with the
        orbit amplitude, so DGamma > 0 marks maximal responses.  Falls back
        to energy if the requested variable is not strictly monotone.
    band : float
        |DGamma| <= band * max|DGamma| counts as a stationary point.
    min_harmonic : float
        Orbits with A_l below this are excluded (forcing orthogonal to the
        harmonic) and listed in ``excluded``.
    """
    orbits = list(family)
    if not orbits:
        raise ValueError("empty family")
    model = orbits[0].model if model is None else model
    spec = PerturbationSpec(e=1.0, l=l)
    Rs, As = [], []
    for orbit in orbits:
        wb = work_and_resistance(orbit, model, spec)
        Rs.append(wb.R)
        As.append(wb.A)
    R = np.array(Rs)
    A = np.array(As)

    alpha_p = model.proportional_damping
    if alpha_p is not None:
        _check_proportional(orbits, model, alpha_p, R, shortcut_rtol)

    keep = A > min_harmonic
    excluded = tuple(int(i) for i in np.flatnonzero(~keep))
    if excluded:
        logger.info("excluded %d orbits with A_%d below %.1e", len(excluded), l, min_harmonic)
    idx = np.flatnonzero(keep)
    if idx.size < window:
        raise DomainError(f"family too short for derivative fits ({idx.size} usable points < window {window})")

    x_all = _ridge_variable(family, wrt)
    used = wrt
    d = np.diff(x_all[idx])
    if not (np.all(d > 0) or np.all(d < 0)):
        logger.info("%s not monotone along the family; fitting against energy", wrt)
        used = "energy"
        x_all = family.energies
    amp = family.amplitudes
    sign = 1.0 if np.polyfit(x_all[idx], amp[idx], 1)[0] >= 0 else -1.0
    x = sign * x_all[idx]
    order = np.argsort(x)
    idx, x = idx[order], x[order]
    gamma = R[idx] / A[idx]
    d1, d2 = _local_quadratic(x, gamma, window)

    classes = []
    scale = float(np.max(np.abs(d1))) if d1.size else 0.0
    for g, a in zip(gamma, d1):
        if not g > 0:
            classes.append("unclassified")
        elif abs(a) <= band * scale:
            classes.append("unclassified")
        else:
            classes.append("max_response" if a > 0 else "min_response")

    omega = family.frequencies[idx]
    energy = family.energies[idx]
    amplitude = amp[idx]
    folds = []
    for i in range(x.size - 1):
        if d1[i] * d1[i + 1] < 0 or (abs(d1[i]) <= band * scale and 0 < i):
            fold = _refine_fold(x, gamma, omega, amplitude, energy, i, window)
            if fold is None or not fold.e > 0:
                continue
            if folds and abs(folds[-1].x - fold.x) <= 1e-12 * (1 + abs(fold.x)):
                continue
            folds.append(fold)
            j = int(np.argmin(np.abs(x - fold.x)))
            classes[j] = fold.kind
    return RidgeCurve(
        l=l, tag=family.tag, parameter=np.asarray(family.parameter, dtype=float)[idx], wrt=used,
        x=x, gamma=gamma, dgamma=d1, d2gamma=d2, classes=tuple(classes),
        omega=omega, amplitude=amplitude, energy=energy, R=R[idx], A=A[idx],
        folds=tuple(folds), excluded=excluded, window=window, band=band,
    )


def _refine_fold(x, gamma, omega, amplitude, energy, i, window):
    n = x.size
    lo = min(max(i + 1 - window // 2, 0), n - window)
    xs = x[lo:lo + window]
    c = np.polyfit(xs - x[i], gamma[lo:lo + window], 2)
    if c[0] == 0.0:
        return None
    xv = x[i] - c[1] / (2.0 * c[0])
    if not xs[0] <= xv <= xs[-1]:
        xv = min(max(xv, x[i]), x[i + 1])
    ev = float(np.polyval(c, xv - x[i]))
    kind = "isola_birth" if c[0] > 0 else "simple_bifurcation"
    at = lambda arr: float(np.interp(xv, xs, arr[lo:lo + window]))
    return RidgeFold(float(xv), ev, at(omega), at(amplitude), at(energy), kind, float(2 * c[0]))


def _check_proportional(orbits, model, alpha_p, R, rtol):
    K = np.asarray(model.stiffness, dtype=float)
    system = FirstOrderSystem(model)
    for orbit, r in zip(orbits, R):

        def power(t, orbit=orbit):
            _, qd = system.split(orbit.state(t))
            return np.einsum("...i,ij,...j->...", qd, K, qd)

        short, _, _ = periodic_trapezoid(power, orbit.period)
        short *= alpha_p
        if abs(short - r) > rtol * max(abs(r), 1e-300):
            raise DegeneracyError(
                f"proportional-damping resistance {short:.12g} disagrees with quadrature {r:.12g}")


def modal_ridge(model, mode, e_max, l=1, points=40, window=7, seed_amplitude=1e-6,
                damping_model=None, max_points=400, options=None, **family_kw):
    """Continue the family of linear mode ``mode`` until its ridge passes ``e_max``.

    Step sizes come from the small-amplitude slope of Gamma_l, which is
    linear in the amplitude, so that about ``points`` orbits cover
    Gamma_l in [0, e_max] whatever the modal participation of the forcing.

    Returns
    -------
    family : OrbitFamily
    ridge : RidgeCurve
    """
    damping_model = model if damping_model is None else damping_model
    spec = PerturbationSpec(e=1.0, l=l)
    xi, tau = seed_from_linear_mode(model, mode, seed_amplitude)
    seed = find_periodic_orbit(model, (xi, tau))
    wb = work_and_resistance(seed, damping_model, spec)
    if not wb.A > 0 or not wb.R > 0:
        raise DomainError(f"mode {mode}: ridge undefined at small amplitude (R={wb.R:.3e}, A={wb.A:.3e})")
    # Gamma ~ slope * amplitude; |xi| ~ sqrt(2) * amplitude on a near-linear orbit
    a_target = seed.amplitude * e_max / (wb.R / wb.A)
    ds_max = 2.0 * math.sqrt(2.0) * a_target / points
    counter = [0]

    def until(orbit):
        counter[0] += 1
        w = work_and_resistance(orbit, damping_model, spec)
        return counter[0] > window + 2 and w.R > e_max * w.A

    family = continue_family(model, seed, bounds={"amplitude": (0.0, np.inf)}, ds=ds_max / 4,
                             ds_min=1e-6 * ds_max, ds_max=ds_max, max_points=max_points,
                             until=until, options=options, **family_kw)
    return family, build_ridge(family, damping_model, l=l, window=window)


def predict_peaks(ridge, e):
    """Solve Gamma_l = e on each monotone segment of the ridge.

    Each solution is labelled by its segment's class (``max_response`` on
    increasing segments, ``min_response`` on decreasing ones).  When e lies
    outside the sampled range the result is empty and carries the admissible
    range.
    """
    e = float(e)
    x, g = ridge.x, ridge.gamma
    peaks = []
    if ridge.folds:
        cuts = sorted(f.x for f in ridge.folds)
    else:
        cuts = []
    edges = [x[0]] + [c for c in cuts if x[0] < c < x[-1]] + [x[-1]]
    pchip = PchipInterpolator(x, g)
    splines = {
        "parameter": CubicSpline(x, ridge.parameter),
        "omega": CubicSpline(x, ridge.omega),
        "amplitude": CubicSpline(x, ridge.amplitude),
        "energy": CubicSpline(x, ridge.energy),
    }
    for a, b in zip(edges[:-1], edges[1:]):
        fa, fb = float(pchip(a)) - e, float(pchip(b)) - e
        if fa == 0.0:
            root = a
        elif fa * fb > 0:
            continue
        else:
            root = brentq(lambda v: float(pchip(v)) - e, a, b, xtol=1e-15 * (1 + abs(b)), rtol=1e-15)
        if peaks and abs(peaks[-1][0] - root) <= 1e-12 * (1 + abs(root)):
            continue
        kind = "max_response" if fb > fa else "min_response"
        peaks.append((root, kind))
    out = tuple(
        PeakPrediction(e, float(splines["parameter"](r)), float(splines["omega"](r)),
                       float(splines["amplitude"](r)), float(splines["energy"](r)), kind)
        for r, kind in peaks
    )
    return PeakSet(e, out, ridge.e_range)


def harmonic_phase(signal, l):
    """Phase theta of the l-th harmonic of uniformly sampled periodic data.

    The harmonic is rho cos(l w t - theta); theta is returned in (-pi, pi].
    """
    signal = np.asarray(signal, dtype=float)
    c = np.fft.rfft(signal) / signal.size
    a, b = 2.0 * c[l].real, -2.0 * c[l].imag
    return math.atan2(b, a)


def phase_lag(orbit, model=None, spec=None, band=1e-6):
    """Phase-lag criterion at a ridge orbit.

    ``spec.e`` must equal Gamma_l at this orbit (|W| = |R| within ``band``).
    Returns +90 degrees (lag) when eR > 0 and -90 (lead) when eR < 0, plus the
    lag measured on the conservative orbit at the quadratic Melnikov zero.
    """
    model = orbit.model if model is None else model
    spec = spec or PerturbationSpec(e=1.0)
    wb = work_and_resistance(orbit, model, spec)
    W, R = abs(spec.e * wb.A), abs(wb.R)
    if abs(W - R) > band * max(W, R, 1e-300):
        raise DomainError(f"orbit is not at a ridge point: |W| = {W:.12g}, |R| = {R:.12g}")
    eR = spec.e * wb.R
    if eR == 0.0:
        raise DomainError("eR = 0: phase-lag criterion does not apply")
    w = orbit.frequency
    l = spec.l
    # quadratic zero: cos(l w s - alpha) = sign(eR) since W cos(...) = R
    s_qz = (wb.alpha + (0.0 if eR > 0 else math.pi)) / (l * w)
    s_qz = float(np.mod(s_qz, orbit.period))
    S = 256
    t = orbit.period * np.arange(S) / S
    q = orbit.state(t + s_qz)[:, : model.dof]
    # the orbit period spans l forcing periods, so the forcing is harmonic l
    theta = harmonic_phase(q @ model.forcing_shape, l)
    lag = math.degrees(math.remainder(theta, 2 * math.pi))
    return PhaseLag(90.0 if eR > 0 else -90.0, lag, s_qz, theta, float(eR))
