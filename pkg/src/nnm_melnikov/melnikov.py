"""Melnikov function of a conservative orbit and its monoharmonic closed form.

For an orbit x0 of period tau and resonance m:l (forcing period T = m tau / l)

    M(s) = int_0^{m tau} <DH(x0(t + s)), g(x0(t + s), t)> dt,

and its s-derivatives follow from time derivatives of the forcing alone:
D^k M(s) = (-1)^k int <DH, d^k g / dt^k> dt.  For monoharmonic forcing and
m = 1 the profile reduces to M(s) = W cos(l w s - alpha) - R.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConvergenceError
from .flow import resample_uniform
from .model import FirstOrderSystem, PerturbationSpec

__all__ = [
    "periodic_trapezoid",
    "MelnikovZero",
    "MelnikovProfile",
    "FourierData",
    "WorkBalance",
    "melnikov_general",
    "fourier_coefficients",
    "work_and_resistance",
    "classify_orbit_bifurcation",
    "VERDICTS",
]

logger = logging.getLogger(__name__)

VERDICTS = ("no_persistence", "two_orbits", "saddle_node", "inconclusive")
QUAD_TOL = 1e-10
QUAD_CAP = 2**18


def periodic_trapezoid(fun, period, tol=QUAD_TOL, n0=64, cap=QUAD_CAP, scale=None):
    """Integrate a periodic function over one period with grid doubling.

    ``fun(t)`` takes an array of times of shape (k,) and returns values of
    shape (k, ...).  The rectangle sum on a uniform periodic grid is doubled
    until successive estimates agree to ``tol`` relative to ``scale``
    (default: period times the largest sampled magnitude).

    Returns
    -------
    value : ndarray or float
    points : int
        Number of nodes used.
    scale : float
    """
    n = int(n0)
    h = period / n
    vals = np.asarray(fun(h * np.arange(n)), dtype=float)
    total = vals.sum(axis=0)
    est = h * total
    peak = float(np.max(np.abs(vals))) if vals.size else 0.0
    while True:
        if 2 * n > cap:
            raise ConvergenceError(f"periodic quadrature did not converge within {cap} nodes")
        mid = np.asarray(fun(h * (np.arange(n) + 0.5)), dtype=float)
        peak = max(peak, float(np.max(np.abs(mid))) if mid.size else 0.0)
        total = total + mid.sum(axis=0)
        n *= 2
        h = period / n
        new = h * total
        ref = period * peak if scale is None else scale
        if np.max(np.abs(new - est)) <= tol * ref:
            return new, n, ref
        est = new


@dataclass(frozen=True)
class MelnikovZero:
    s: float
    kind: str  # simple | quadratic | degenerate
    dM: float
    d2M: float


@dataclass(frozen=True)
class WorkBalance:
    """Resistance, harmonic work amplitude and phase of an orbit.

    ``c`` and ``d`` are the projections of the l-th cosine and sine
    coefficients of q0 onto the forcing shape.
    """

    R: float
    A: float
    alpha: float
    W: float
    l: int
    c: float
    d: float
    orthogonal: bool


@dataclass(frozen=True, eq=False)
class MelnikovProfile:
    m: int
    l: int
    s: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    zeros: tuple
    orbit_period: float
    forcing_period: float
    quad_points: int
    quad_tol: float
    scale: float
    identically_zero: bool
    balance: WorkBalance | None = None
    e: float = 0.0
    form: str = "energy"

    @property
    def R(self):
        return None if self.balance is None else self.balance.R

    @property
    def A(self):
        return None if self.balance is None else self.balance.A

    @property
    def alpha(self):
        return None if self.balance is None else self.balance.alpha

    @property
    def W(self):
        return None if self.balance is None else self.e * self.balance.A

    def closed_form(self, s):
        """W cos(l w s - alpha) - R for m = 1 monoharmonic profiles."""
        if self.balance is None or self.m != 1:
            raise ValueError("closed form only exists for m = 1 monoharmonic profiles")
        w = 2.0 * np.pi / self.orbit_period
        return self.W * np.cos(self.l * w * np.asarray(s) - self.alpha) - self.R


@dataclass(frozen=True, eq=False)
class FourierData:
    """Real Fourier coefficients q0(t) = a0/2 + sum a_k cos(k w t) + b_k sin(k w t).

    ``a`` and ``b`` have shape (K+1, N); ``b[0]`` is zero.
    """

    a: np.ndarray
    b: np.ndarray
    omega: float
    K: int
    tail_ratio: float
    samples: int

    def reconstruct(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(1, self.K + 1)
        ph = np.multiply.outer(t, k * self.omega)
        return 0.5 * self.a[0] + np.cos(ph) @ self.a[1:] + np.sin(ph) @ self.b[1:]


def _system_for(orbit, spec):
    return FirstOrderSystem(orbit.model, spec)


def _resonant_spec(orbit, spec):
    return spec.resonant(orbit.period)


def _integrand(system, orbit, s, order, form):
    """Callable t -> (len(t), len(s)) of the Melnikov integrand of order k."""

    def fun(t):
        u = t[:, None] + s[None, :]
        x = orbit.state(u.ravel()).reshape(u.shape + (system.n,))
        tt = np.broadcast_to(t[:, None], u.shape)
        if order == 0:
            g = system.g(x, tt)
        else:
            g = (-1.0) ** order * system.g_time_derivative(x, tt, order)
        if form == "mechanical":
            _, qd = system.split(x)
            # <qd, Q> with Q = M g_v
            mg = np.einsum("...ij,...j->...i", system.model.mass(x[..., : system.N]), g[..., system.N:])
            return np.einsum("...i,...i->...", qd, mg)
        return np.einsum("...i,...i->...", system.energy_gradient(x), g)

    return fun


def _chunked(fun_factory, s, chunk):
    """Evaluate integrals for many s values in chunks to bound memory."""
    def fun(t):
        parts = [fun_factory(s[i:i + chunk])(t) for i in range(0, s.size, chunk)]
        return np.concatenate(parts, axis=-1)
    return fun


def _melnikov_integral(system, orbit, s, order, form, period, n_points=None, tol=QUAD_TOL, scale=None,
                       cap=QUAD_CAP):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    chunk = max(1, 2**20 // (4 * max(n_points or 1024, 1)))
    fun = _chunked(lambda ss: _integrand(system, orbit, ss, order, form), s, chunk)
    if n_points is not None:
        h = period / n_points
        return h * fun(h * np.arange(n_points)).sum(axis=0), n_points, scale
    return periodic_trapezoid(fun, period, tol=tol, scale=scale, cap=cap)


def melnikov_general(system, orbit, spec, grid_size=64, tol=QUAD_TOL, form="energy",
                     zero_band=1e-8, with_balance=True, cap=QUAD_CAP):
    """Sample M^{m:l}(s) and DM(s) on a uniform grid over [0, m tau).

    Parameters
    ----------
    system : FirstOrderSystem or MechanicalModel or None
        Only its model is used; the orbit's model is taken when None.
    orbit : PeriodicOrbit
    spec : PerturbationSpec
        Supplies e, m and l; the forcing period is set to m tau / l.
    form : {"energy", "mechanical"}
        Integrand <DH, g> or the equivalent <qd, Q>.
    zero_band : float
        Relative threshold separating simple, quadratic and degenerate zeros.
    cap : int
        Largest number of quadrature nodes per period.
    """
    if form not in ("energy", "mechanical"):
        raise ValueError(f"unknown integrand form {form!r}")
    spec = _resonant_spec(orbit, spec)
    sysf = _system_for(orbit, spec)
    m, l = spec.m, spec.l
    span = m * orbit.period
    s = span * np.arange(grid_size) / grid_size
    values, npts, scale = _melnikov_integral(sysf, orbit, s, 0, form, span, tol=tol, cap=cap)
    deriv, _, _ = _melnikov_integral(sysf, orbit, s, 1, form, span, n_points=npts)
    peak = float(np.max(np.abs(values)))
    identically_zero = scale == 0.0 or peak <= 10 * tol * scale

    def at(sv, order):
        return float(_melnikov_integral(sysf, orbit, [sv], order, form, span, n_points=npts)[0][0])

    zeros = []
    if not identically_zero:
        ref = max(peak, tol * scale)
        ext = np.append(values, values[0])
        dext = np.append(deriv, deriv[0])
        sext = np.append(s, span)
        for i in range(grid_size):
            a, b = sext[i], sext[i + 1]
            if ext[i] == 0.0:
                zeros.append(_classify_zero(a, at, ref, zero_band))
            elif ext[i] * ext[i + 1] < 0:
                z = brentq(lambda v: at(v, 0), a, b, xtol=1e-14 * (1 + span), rtol=1e-15)
                zeros.append(_classify_zero(z, at, ref, zero_band))
            elif (dext[i] * dext[i + 1] < 0
                  and max(abs(dext[i]), abs(dext[i + 1])) > 10 * tol * scale
                  and min(abs(ext[i]), abs(ext[i + 1])) <= 0.1 * ref):
                # an interior extremum touching zero is a quadratic zero
                z = brentq(lambda v: at(v, 1), a, b, xtol=1e-14 * (1 + span), rtol=1e-15)
                if abs(at(z, 0)) <= zero_band * ref:
                    zeros.append(_classify_zero(z, at, ref, zero_band))
        zeros = _merge_close_pairs(zeros, at, 10 * tol * scale, ref, zero_band, span)
    balance = None
    if with_balance:
        balance = work_and_resistance(orbit, orbit.model, spec, tol=tol, cap=cap)
    return MelnikovProfile(m, l, s, values, deriv, tuple(zeros), orbit.period, spec.period, npts,
                           tol, float(scale), bool(identically_zero), balance, spec.e, form)


def _merge_close_pairs(zeros, at, noise, ref, band, span):
    """Fuse sign-change pairs that enclose an extremum within quadrature noise.

    Such a pair cannot be told apart from one quadratic zero: rounding in M of
    size eta splits a double root by O(sqrt(eta)).
    """
    out = list(zeros)
    i = 0
    while i < len(out) - 1:
        z1, z2 = out[i], out[i + 1]
        if z1.kind == "simple" and z2.kind == "simple" and z1.dM * z2.dM < 0 and z2.s - z1.s < 1e-3 * span:
            try:
                ext = brentq(lambda v: at(v, 1), z1.s, z2.s, xtol=1e-14 * (1 + span), rtol=1e-15)
            except ValueError:
                ext = 0.5 * (z1.s + z2.s)
            if abs(at(ext, 0)) <= noise:
                out[i:i + 2] = [_classify_zero(ext, at, ref, band, force_double=True)]
                continue
        i += 1
    return out


def _classify_zero(z, at, ref, band, force_double=False):
    dm = at(z, 1)
    d2m = at(z, 2)
    if abs(dm) > band * ref and not force_double:
        kind = "simple"
    elif abs(d2m) > band * ref:
        kind = "quadratic"
    else:
        kind = "degenerate"
    return MelnikovZero(float(z), kind, dm, d2m)


def fourier_coefficients(orbit, K, samples=None, tail_tol=1e-8, cap=2**16):
    """Fourier coefficients of the displacement q0 up to harmonic K.

    The orbit is resampled on a power-of-two grid; if more than ``tail_tol``
    of the oscillatory energy sits in the upper half of the resolved band, the
    grid is doubled (up to ``cap`` samples).
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    N = orbit.model.dof
    S = samples or max(64, 1 << int(math.ceil(math.log2(max(4 * (K + 1), 2)))))
    if S & (S - 1) or S < 64:
        raise ValueError("samples must be a power of two >= 64")
    if K > S // 2 - 1:
        raise ValueError(f"K={K} exceeds samples/2 - 1 = {S // 2 - 1}")
    while True:
        _, xs = resample_uniform(orbit.trajectory, S, period=orbit.period, t0=0.0)
        c = np.fft.rfft(xs[:, :N], axis=0) / S
        power = np.sum(np.abs(c[1:]) ** 2, axis=1)
        total = float(power.sum())
        tail = float(power[S // 4:].sum()) / total if total > 0 else 0.0
        if tail <= tail_tol:
            break
        if 2 * S > cap:
            raise ConvergenceError(f"Fourier tail ratio {tail:.2e} above {tail_tol:g} at {S} samples")
        S *= 2
    a = 2.0 * c.real[: K + 1]
    b = -2.0 * c.imag[: K + 1]
    b[0] = 0.0
    return FourierData(a, b, orbit.frequency, K, tail, S)


def work_and_resistance(orbit, model=None, spec=None, l=None, tol=QUAD_TOL, cap=QUAD_CAP):
    """Resistance R, harmonic amplitude A_l, phase alpha_l and work amplitude W.

    R = int_0^tau <qd0, C(q0, qd0)> dt, A_l = l pi |(<a_l, f_e>, <b_l, f_e>)|,
    alpha_l = atan2(-<a_l, f_e>, <b_l, f_e>) and W = e A_l, so that the m = 1
    profile is W cos(l w s - alpha_l) - R.
    """
    model = orbit.model if model is None else model
    spec = spec or PerturbationSpec()
    l = spec.l if l is None else int(l)
    system = FirstOrderSystem(model)

    def power(t):
        x = orbit.state(t)
        q, qd = system.split(x)
        return np.einsum("...i,...i->...", qd, model.dissipation(q, qd))

    R, _, _ = periodic_trapezoid(power, orbit.period, tol=tol, cap=cap)
    fd = fourier_coefficients(orbit, l)
    fe = model.forcing_shape
    c = float(fd.a[l] @ fe)
    d = float(fd.b[l] @ fe)
    A = l * np.pi * math.hypot(c, d)
    orthogonal = A < 1e-12
    if orthogonal:
        logger.warning("forcing orthogonal to harmonic %d (A = %.2e)", l, A)
    alpha = math.atan2(-c, d)
    return WorkBalance(float(R), float(A), alpha, float(spec.e * A), l, c, d, bool(orthogonal))


def classify_orbit_bifurcation(profile, band=1e-8):
    """Orbit-level verdict from a Melnikov profile.

    For m = 1 monoharmonic profiles: |W| < |R| no persistence, |W| > |R| two
    orbits, |W| = |R| > 0 within ``band`` (relative) a saddle-node, and an
    identically vanishing profile is inconclusive.  Other profiles are
    classified from their zero list.
    """
    if profile.identically_zero:
        return "inconclusive"
    if profile.m == 1 and profile.balance is not None:
        W, R = abs(profile.W), abs(profile.R)
        big = max(W, R)
        if big == 0.0:
            return "inconclusive"
        if abs(W - R) <= band * big:
            return "saddle_node"
        return "no_persistence" if W < R else "two_orbits"
    kinds = {z.kind for z in profile.zeros}
    if "simple" in kinds:
        return "two_orbits"
    if "quadratic" in kinds:
        return "saddle_node"
    if not profile.zeros:
        return "no_persistence"
    return "inconclusive"
