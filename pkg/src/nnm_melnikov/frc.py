"""Forced-damped periodic responses used to validate the Melnikov predictions.

Forced orbits are computed by shooting in the forcing phase theta = Omega t,

    dx/dtheta = (f(x) + eps g(x, theta)) / Omega,   g ~ e f_e cos(theta),

so the response period is a fixed multiple of 2 pi and the forcing clock
fixes the phase.  Frequency responses are continued by pseudo-arclength in
(xi, Omega); folds are continued in (xi, Omega, e) with a bordered
rank-deficiency condition.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .continuation import StepController, newton, null_vector, solve_checked
from .exceptions import ContinuationError, ConvergenceError, DegeneracyError, IntegrationError
from .family import orbit_amplitude
from .flow import integrate, integrate_augmented, resample_uniform
from .melnikov import melnikov_general, classify_orbit_bifurcation
from .model import FirstOrderSystem, PerturbationSpec
from .ridge import harmonic_phase, predict_peaks

__all__ = [
    "ForcedOrbit",
    "FrcBranch",
    "FoldPath",
    "PersistenceCheck",
    "ValidationReport",
    "forced_periodic_orbit",
    "continue_frc",
    "energy_balance",
    "track_folds",
    "validate_predictions",
    "check_persistence",
    "distance_to_orbit",
    "refine_peak",
    "peak_window",
    "response_phase_lag",
]

logger = logging.getLogger(__name__)

FRC_TOL = 1e-10
FRC_RTOL = 1e-11
FRC_ATOL = 1e-12
MIN_TANGENT_COS = 0.9


class _ForcedShooter:
    """Shooting map over ``periods`` forcing periods in phase time."""

    def __init__(self, model, eps, periods=1, rtol=FRC_RTOL, atol=FRC_ATOL):
        self.model = model
        self.eps = float(eps)
        self.periods = int(periods)
        self.rtol, self.atol = rtol, atol
        self.n = 2 * model.dof
        self.N = model.dof
        self.span = 2.0 * np.pi * self.periods
        self.table = model.element_table() if kernels.AVAILABLE else None

    def compiled(self, Omega, e, mode):
        """Compiled augmented field for ``mode`` (see kernels.forced_rhs), or None."""
        if self.table is None:
            return None
        args = self.table.args() + (self.table.fe, self.eps, float(e), float(Omega), mode)
        rhs = kernels.forced_rhs
        return lambda th, y: rhs(th, y, *args)

    def system(self, e):
        # forcing period 2 pi in phase time, so cos(Omega_spec * theta) = cos(theta)
        return FirstOrderSystem(self.model, PerturbationSpec(e=e, eps=self.eps, period=2.0 * np.pi))

    def fields(self, Omega, e):
        """Phase-time field, its Jacobian and its (Omega, e) derivatives."""
        system = self.system(e)
        if system.analytic_jacobian and system._identity_mass:
            return (system,) + self._unit_mass_fields(Omega, e)
        N = self.N
        fe = self.model.forcing_shape
        eps = self.eps

        def fun(th, x):
            return system.rhs(th, x) / Omega

        def jac(th, x):
            return system.jacobian(th, x) / Omega

        def dparams(th, x):
            F = system.rhs(th, x)
            ge = system._solve_mass(x[:N], fe)
            de = np.concatenate([np.zeros(N), eps * math.cos(th) * ge]) / Omega
            return np.stack([-F / Omega**2, de], axis=-1)

        return system, fun, jac, dparams

    def _unit_mass_fields(self, Omega, e):
        # M = I and no inertial terms: evaluate each model law once per state
        model = self.model
        N, n = self.N, self.n
        fe = model.forcing_shape
        eps = self.eps
        eye = np.eye(N)
        last = [None, None, None]

        def rhs(th, x):
            key = (th, x.tobytes())
            if last[0] != key:
                q, v = x[:N], x[N:]
                acc = -model.potential_gradient(q) + eps * (e * math.cos(th) * fe - model.dissipation(q, v))
                last[0], last[1] = key, np.concatenate([v, acc])
            return last[1]

        def fun(th, x):
            return rhs(th, x) / Omega

        def jac(th, x):
            q, v = x[:N], x[N:]
            cq, cv = model.dissipation_jacobian(q, v)
            J = np.zeros((n, n))
            J[:N, N:] = eye
            J[N:, :N] = -model.potential_hessian(q) - eps * cq
            J[N:, N:] = -eps * cv
            return J / Omega

        def dparams(th, x):
            F = rhs(th, x)
            out = np.zeros((n, 2))
            out[:, 0] = -F / Omega**2
            out[N:, 1] = eps * math.cos(th) * fe / Omega
            return out

        return fun, jac, dparams

    def flow(self, xi, Omega, e, variations=True, dense=False):
        fast = self.compiled(Omega, e, 1 if variations else 0)
        if fast is not None:
            if not variations:
                return integrate(fast, xi, (0.0, self.span), rtol=self.rtol, atol=self.atol, dense=dense)
            return integrate_augmented(None, None, xi, (0.0, self.span), rtol=self.rtol, atol=self.atol,
                                       dense=dense, fused=fast, n_params=2)
        system, fun, jac, dparams = self.fields(Omega, e)
        if not variations:
            return integrate(fun, xi, (0.0, self.span), rtol=self.rtol, atol=self.atol, dense=dense)
        return integrate_augmented(fun, jac, xi, (0.0, self.span), dparams=dparams,
                                   rtol=self.rtol, atol=self.atol, dense=dense)

    def block(self, xi, Omega, e):
        """Residual phi(xi) - xi and Jacobian columns [Y - I, d/dOmega, d/de]."""
        if not Omega > 0:
            raise ConvergenceError("forcing frequency became non-positive")
        sol = self.flow(xi, Omega, e)
        return sol.x - xi, np.hstack([sol.Y - np.eye(self.n), sol.Z]), sol


@dataclass(frozen=True, eq=False)
class ForcedOrbit:
    """Converged forced periodic response (base point at forcing phase 0)."""

    xi: np.ndarray
    Omega: float
    e: float
    eps: float
    periods: int
    amplitude: float
    displacement: float
    energy: float
    energy_balance: float
    multipliers: np.ndarray
    residual: float
    trajectory: object = field(default=None, repr=False)

    @property
    def period(self):
        return 2.0 * np.pi * self.periods / self.Omega


@dataclass(frozen=True, eq=False)
class FrcBranch:
    """Frequency-response branch at fixed (e, eps).

    ``amplitude`` is the time-averaged L2 norm of the state over the response
    period (the backbone measure), ``displacement`` the largest |q(t)|.
    ``energy`` is the time-averaged total energy.
    """

    omega: np.ndarray
    xi: np.ndarray
    amplitude: np.ndarray
    displacement: np.ndarray
    energy: np.ndarray
    energy_balance: np.ndarray
    max_multiplier: np.ndarray
    multipliers: np.ndarray
    fold: np.ndarray
    tangent_omega: np.ndarray
    e: float
    eps: float
    periods: int
    direction: int
    closed: bool = False
    halt_reason: str = "completed"

    @property
    def period(self):
        return 2.0 * np.pi * self.periods / self.omega

    def __len__(self):
        return self.omega.size

    def peaks(self, window=None):
        """Local amplitude maxima along the branch as (index, Omega, a).

        The peak is refined by a parabola through the three bracketing points
        in arclength.
        """
        a = self.amplitude
        pts = np.column_stack([self.omega, a])
        s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
        out = []
        for i in range(1, a.size - 1):
            if a[i] >= a[i - 1] and a[i] > a[i + 1]:
                c = np.polyfit(s[i - 1:i + 2] - s[i], a[i - 1:i + 2], 2)
                sv = -c[1] / (2 * c[0]) if c[0] < 0 else 0.0
                av = float(np.polyval(c, sv))
                cw = np.polyfit(s[i - 1:i + 2] - s[i], self.omega[i - 1:i + 2], 2)
                wv = float(np.polyval(cw, sv))
                if window is None or window[0] <= wv <= window[1]:
                    out.append((i, wv, av))
        return out


@dataclass(frozen=True, eq=False)
class FoldPath:
    """Fold (saddle-node) locus in (e, Omega) with the fold states."""

    e: np.ndarray
    omega: np.ndarray
    amplitude: np.ndarray
    xi: np.ndarray
    eps: float
    periods: int
    halt_reason: str = "completed"
    report: dict | None = None

    def __len__(self):
        return self.e.size


def _segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-300), 0.0, 1.0)
    return float(np.linalg.norm(a + t * ab - p))


def _max_displacement(traj, xs, span, N):
    norms = np.linalg.norm(xs[:, :N], axis=1)
    i = int(np.argmax(norms))
    h = span / norms.size
    t0 = i * h
    out = minimize_scalar(lambda t: -np.linalg.norm(traj(np.mod(t, span))[:N]),
                          bounds=(t0 - h, t0 + h), method="bounded", options={"xatol": 1e-10})
    return float(max(-out.fun, norms[i]))


def _orbit_record(shooter, xi, Omega, e, Y, residual, samples=256):
    """Integrate one response period with the work integral to build a ForcedOrbit."""
    system, fun, _, _ = shooter.fields(Omega, e)
    N = shooter.N
    eps = shooter.eps
    aug = shooter.compiled(Omega, e, 2)
    if aug is None:
        def aug(th, y):
            x = y[:-1]
            dx = fun(th, x)
            qd = x[N:]
            Q = system.generalized_force(x, th)
            return np.concatenate([dx, [eps * float(qd @ Q) / Omega]])

    traj = integrate(aug, np.concatenate([xi, [0.0]]), (0.0, shooter.span),
                     rtol=shooter.rtol, atol=shooter.atol)
    _, ys = resample_uniform(traj, samples, period=shooter.span, t0=0.0)
    xs = ys[:, :-1]
    amp = float(np.sqrt(np.mean(np.sum(xs**2, axis=1))))
    disp = _max_displacement(traj, xs, shooter.span, N)
    energy = float(np.mean(system.energy(xs)))
    mult = np.linalg.eigvals(Y + np.eye(shooter.n)) if Y is not None else np.array([])
    return ForcedOrbit(xi.copy(), float(Omega), float(e), eps, shooter.periods, amp, disp, energy,
                       float(traj.final[-1]), mult, float(residual), traj)


def forced_periodic_orbit(model, spec, Omega, guess, periods=1, tol=FRC_TOL, max_iter=25,
                          rtol=FRC_RTOL, atol=FRC_ATOL, radius=None):
    """Newton shooting for a forced periodic orbit at fixed Omega.

    ``guess`` is the state at forcing phase zero.  With ``radius`` the
    iteration is abandoned once it leaves that ball around the guess.
    Raises ConvergenceError if Newton fails.
    """
    shooter = _ForcedShooter(model, spec.eps, periods, rtol, atol)
    n = shooter.n
    center = np.asarray(guess, dtype=float)

    def evaluate(xi):
        if radius is not None and np.linalg.norm(xi - center) > radius:
            raise ConvergenceError("Newton iterate left the search ball")
        F, J, sol = shooter.block(xi, Omega, spec.e)
        return F / (1 + np.linalg.norm(xi)), J[:, :n] / (1 + np.linalg.norm(xi)), sol

    res = newton(evaluate, np.asarray(guess, dtype=float), tol, max_iter=max_iter,
                 what="forced shooting Jacobian")
    return _orbit_record(shooter, res.u, Omega, spec.e, res.jacobian * (1 + np.linalg.norm(res.u)),
                         res.residual)


def energy_balance(model, spec, xi, T, periods=1, rtol=1e-12, atol=1e-13):
    """E_b = eps * int_0^{periods T} <qd, Q> dt along the forced trajectory from xi.

    The forcing is e f_e cos(2 pi t / T).  Returns exactly 0 when eps = 0.
    """
    if spec.eps == 0.0:
        return 0.0
    shooter = _ForcedShooter(model, spec.eps, periods, rtol, atol)
    Omega = 2.0 * np.pi / T
    aug = shooter.compiled(Omega, spec.e, 2)
    if aug is not None:
        # phase time theta = Omega t; the work integrand carries the 1/Omega
        traj = integrate(aug, np.concatenate([np.asarray(xi, dtype=float), [0.0]]),
                         (0.0, shooter.span), rtol=rtol, atol=atol, dense=False)
        return float(traj.final[-1])
    system = FirstOrderSystem(model, spec.replace(period=T))
    N = model.dof

    def aug(t, y):
        x = y[:-1]
        Q = system.generalized_force(x, t)
        return np.concatenate([system.rhs(t, x), [float(x[N:] @ Q)]])

    traj = integrate(aug, np.concatenate([np.asarray(xi, dtype=float), [0.0]]),
                     (0.0, periods * T), rtol=rtol, atol=atol, dense=False)
    return spec.eps * float(traj.final[-1])


def _settle(shooter, Omega, e, settle_periods, x0=None):
    x = np.zeros(shooter.n) if x0 is None else np.asarray(x0, dtype=float)
    if settle_periods > 0:
        fun = shooter.compiled(Omega, e, 0) or shooter.fields(Omega, e)[1]
        traj = integrate(fun, x, (0.0, 2 * np.pi * settle_periods), rtol=1e-9, atol=1e-11, dense=False)
        x = traj.final
    return x


def _start_on_branch(shooter, xi0, Om0, e, tol):
    """Converge a start point on the hyperplane normal to the local branch tangent."""
    n = shooter.n
    u0 = np.concatenate([xi0, [Om0]])
    _, J, _ = shooter.block(xi0, Om0, e)
    t0 = null_vector(J[:, : n + 1])

    def evaluate(u):
        F, J, sol = shooter.block(u[:n], u[n], e)
        return np.concatenate([F, [np.dot(u - u0, t0)]]), np.vstack([J[:, : n + 1], t0]), sol

    res = newton(evaluate, u0, tol, max_iter=15, what="bordered start Jacobian")
    Y = res.jacobian[:n, :n]
    return _orbit_record(shooter, res.u[:n], res.u[n], e, Y, res.residual)


def continue_frc(model, spec, omega_range, periods=1, start=None, ds=0.02, ds_min=1e-7, ds_max=0.2,
                 max_points=2000, settle_periods=10, tol=FRC_TOL, omega_weight=None, close_loops=True):
    """Pseudo-arclength continuation of forced responses in (xi, Omega).

    Parameters
    ----------
    spec : PerturbationSpec
        Supplies e and eps (eps > 0).
    omega_range : (float, float)
        Continuation starts at the first value (unless ``start`` is given)
        and heads towards the second; it stops when Omega leaves the interval.
    start : (xi, Omega), optional
        Known point to start from instead of settling a transient.
    omega_weight : float, optional
        Weight of Omega in the arclength metric; defaults to the inverse width
        of ``omega_range`` (at least 1).
    close_loops : bool
        Stop when the branch returns to its starting point (isolas).
    """
    if not spec.eps > 0:
        raise ValueError("forced-response continuation requires eps > 0")
    shooter = _ForcedShooter(model, spec.eps, periods)
    n = shooter.n
    e = spec.e
    w_lo, w_hi = sorted(map(float, omega_range))
    direction = 1 if omega_range[1] >= omega_range[0] else -1
    scale_w = max(1.0, 1.0 / (w_hi - w_lo)) if omega_weight is None else float(omega_weight)

    if start is None:
        Om0 = float(omega_range[0])
        x0 = _settle(shooter, Om0, e, settle_periods)
        try:
            first = forced_periodic_orbit(model, spec, Om0, x0, periods, tol=tol)
        except ConvergenceError as exc:
            raise ConvergenceError(f"failed to settle to a periodic response at Omega={Om0}: {exc}") from exc
        xi0 = first.xi
    else:
        xi0, Om0 = np.asarray(start[0], dtype=float), float(start[1])
        try:
            first = forced_periodic_orbit(model, spec, Om0, xi0, periods, tol=tol)
        except (ConvergenceError, DegeneracyError):
            # fixed-Omega shooting is singular at a fold; correct in (xi, Omega) instead
            first = _start_on_branch(shooter, xi0, Om0, e, tol)
        xi0, Om0 = first.xi, first.Omega

    def metric(u):
        v = u.copy()
        v[n] *= scale_w
        return v

    def ext(u):
        F, J, sol = shooter.block(u[:n], u[n], e)
        return F, J[:, : n + 1], sol

    u = np.concatenate([xi0, [Om0]])
    _, J0, _ = ext(u)
    tangent = null_vector(J0)
    if tangent[n] * direction < 0:
        tangent = -tangent
    records = [first]
    tangents = [tangent[n]]
    tangent_start = tangent.copy()
    ctrl = StepController(ds, ds_min, ds_max)
    u_start = u.copy()
    closed = False
    halt = "max_points"
    farthest = 0.0
    while len(records) < max_points:
        t_fix = tangent.copy()
        u_pred = u + ctrl.ds * t_fix

        def evaluate(v, u_pred=u_pred, t_fix=t_fix):
            F, J, sol = ext(v)
            sc = 1 + np.linalg.norm(v[:n])
            return (np.concatenate([F / sc, [np.dot(metric(v - u_pred), t_fix)]]),
                    np.vstack([J / sc, metric(t_fix)]), sol)

        try:
            res = newton(evaluate, u_pred, tol, max_iter=8, what="forced pseudo-arclength Jacobian")
            if np.linalg.norm(res.u - u) > 3 * ctrl.ds:
                raise ConvergenceError("corrector jumped away from the branch")
        except (ConvergenceError, DegeneracyError, IntegrationError) as exc:
            logger.debug("FRC step ds=%.3e failed: %s", ctrl.ds, exc)
            if not ctrl.failure():
                halt = "step_underflow"
                break
            continue
        sc = 1 + np.linalg.norm(res.u[:n])
        Jshoot = res.jacobian[:-1] * sc
        new_t = null_vector(Jshoot)
        if np.dot(new_t, tangent) < 0:
            new_t = -new_t
        if np.dot(new_t, tangent) < MIN_TANGENT_COS and ctrl.ds > 4 * ctrl.ds_min:
            # sharp turn: the step was too long to follow the curvature
            ctrl.failure()
            continue
        ctrl.success(res.iterations)
        u_last = u
        u, tangent = res.u, new_t
        gap = float(np.linalg.norm(metric(u - u_start)))
        farthest = max(farthest, gap)
        rec = _orbit_record(shooter, u[:n], u[n], e, Jshoot[:, :n], res.residual * sc)
        records.append(rec)
        tangents.append(tangent[n])
        if not w_lo <= u[n] <= w_hi:
            halt = "bounds"
            break
        if close_loops and len(records) > 8 and farthest > 6 * ctrl.ds:
            if (_segment_distance(metric(u_start), metric(u_last), metric(u)) < 0.25 * ctrl.ds
                    and np.dot(tangent, tangent_start) > MIN_TANGENT_COS):
                closed = True
                halt = "closed_loop"
                break
    if halt == "step_underflow" and len(records) < 2:
        raise ContinuationError("FRC continuation failed at the first step")
    tw = np.array(tangents)
    fold = np.zeros(tw.size, dtype=bool)
    flips = np.flatnonzero(tw[:-1] * tw[1:] < 0)
    fold[flips + 1] = True
    mults = np.array([r.multipliers for r in records])
    return FrcBranch(
        omega=np.array([r.Omega for r in records]),
        xi=np.array([r.xi for r in records]),
        amplitude=np.array([r.amplitude for r in records]),
        displacement=np.array([r.displacement for r in records]),
        energy=np.array([r.energy for r in records]),
        energy_balance=np.array([r.energy_balance for r in records]),
        max_multiplier=np.max(np.abs(mults), axis=1),
        multipliers=mults,
        fold=fold,
        tangent_omega=tw,
        e=e, eps=spec.eps, periods=periods, direction=direction, closed=closed, halt_reason=halt,
    )


def refine_peak(model, spec, branch, index, periods=None, tol=FRC_TOL):
    """Forced orbit at the amplitude maximum near ``branch`` point ``index``.

    Maximises the amplitude over the arclength coordinate through points
    index-1..index+1 with a bounded scalar search; each trial point is
    corrected back onto the branch.
    """
    periods = branch.periods if periods is None else periods
    shooter = _ForcedShooter(model, spec.eps, periods)
    n = shooter.n
    e = spec.e
    i0, i1 = max(index - 1, 0), min(index + 1, len(branch) - 1)
    U = np.column_stack([branch.xi, branch.omega])
    base = U[index]
    chord = U[i1] - U[i0]
    chord = chord / np.linalg.norm(chord)
    lo = float(np.dot(U[i0] - base, chord))
    hi = float(np.dot(U[i1] - base, chord))
    cache = {}

    def corrected(sigma):
        key = round(sigma, 15)
        if key in cache:
            return cache[key]
        u_pred = base + sigma * chord

        def evaluate(v):
            F, J, sol = shooter.block(v[:n], v[n], e)
            return (np.concatenate([F, [np.dot(v - u_pred, chord)]]),
                    np.vstack([J[:, : n + 1], chord]), sol)

        res = newton(evaluate, u_pred, tol, max_iter=12)
        rec = _orbit_record(shooter, res.u[:n], res.u[n], e, res.jacobian[:-1, :n], res.residual)
        cache[key] = rec
        return rec

    out = minimize_scalar(lambda sg: -corrected(sg).amplitude, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * (1 + abs(hi - lo))})
    return corrected(out.x)


def response_phase_lag(orbit_or_record, model, l=1, samples=512):
    """Lag (degrees) of the l-th harmonic of <q, f_e> behind the forcing.

    ``orbit_or_record`` is a ForcedOrbit; its trajectory runs in forcing
    phase, so the forcing is cos(theta) and the response period holds
    ``periods`` forcing periods.
    """
    rec = orbit_or_record
    span = 2 * np.pi * rec.periods
    _, ys = resample_uniform(rec.trajectory, samples, period=span, t0=0.0)
    q = ys[:, : model.dof]
    theta = harmonic_phase(q @ model.forcing_shape, rec.periods)
    return math.degrees(math.remainder(theta, 2 * math.pi))


def _fold_system(shooter, u, b, c):
    """Residual and Jacobian of the fold-defining system in u = (xi, Omega, e)."""
    n = shooter.n
    F, J, sol = shooter.block(u[:n], u[n], u[n + 1])
    A = J[:, :n]
    B = np.block([[A, b[:, None]], [c[None, :], np.zeros((1, 1))]])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    vg = solve_checked(B, rhs, "fold bordering matrix")
    v, g = vg[:n], vg[n]
    wg = solve_checked(B.T, rhs, "fold bordering matrix")
    w = wg[:n]
    return F, J, g, v, w, sol


def _directional_Yv(shooter, u, v, h):
    """Columns d(Y v)/dz for z = (xi_1..xi_n, Omega, e) by central differences of (x, Y v)."""
    n = shooter.n
    cols = []
    for j in range(n + 2):
        step = h * (1.0 + abs(u[j]))
        outs = []
        for sgn in (1.0, -1.0):
            up = u.copy()
            up[j] += sgn * step
            aug = shooter.compiled(up[n], up[n + 1], 3)
            if aug is None:
                _, fun, jac, _ = shooter.fields(up[n], up[n + 1])

                def aug(th, y, fun=fun, jac=jac):
                    x = y[:n]
                    return np.concatenate([fun(th, x), jac(th, x) @ y[n:]])

            traj = integrate(aug, np.concatenate([up[:n], v]), (0.0, shooter.span),
                             rtol=shooter.rtol, atol=shooter.atol, dense=False)
            outs.append(traj.final[n:])
        cols.append((outs[0] - outs[1]) / (2 * step))
    return np.stack(cols, axis=-1)


def _border_vectors(A):
    U, s, Vt = np.linalg.svd(A)
    return U[:, -1].copy(), Vt[-1].copy()


def track_folds(model, spec, seed, e_range, periods=1, direction=-1, ds=0.02, ds_min=1e-6,
                ds_max=0.1, max_points=300, tol=1e-9, fd_step=1e-6):
    """Continue a fold of the frequency response in (xi, Omega, e).

    Parameters
    ----------
    seed : (xi, Omega)
        State and frequency near a fold at forcing amplitude ``spec.e``
        (typically a flagged point of an FrcBranch).
    e_range : (float, float)
        Continuation stops when e leaves this interval.
    direction : int
        Initial direction in e (-1 tracks towards smaller forcing).

    Raises
    ------
    DegeneracyError
        The seed is not near a fold (no multiplier near +1), e.g. for linear
        systems whose responses have no folds.
    """
    shooter = _ForcedShooter(model, spec.eps, periods)
    n = shooter.n
    xi0 = np.asarray(seed[0], dtype=float)
    u = np.concatenate([xi0, [float(seed[1]), float(spec.e)]])
    F, J, _ = shooter.block(u[:n], u[n], u[n + 1])
    A = J[:, :n]
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] > 1e-2 * sv[0]:
        raise DegeneracyError(
            f"seed is not near a fold: smallest singular value ratio {sv[-1] / sv[0]:.2e}")
    b, c = _border_vectors(A)

    def full(u, with_jac=True):
        F, J, g, v, w, sol = _fold_system(shooter, u, b, c)
        if not with_jac:
            return F, g, None
        dYv = _directional_Yv(shooter, u, v, fd_step)
        grad_g = -(w @ dYv)
        Jx = np.vstack([J, grad_g])
        return np.concatenate([F, [g]]), Jx, (v, w)

    # converge onto the fold at fixed e
    def at_fixed_e(x0, e):
        def evaluate(x):
            R, Jx, data = full(np.concatenate([x, [e]]))
            return R, Jx[:, : n + 1], data

        res = newton(evaluate, x0, tol, max_iter=15, what="fold system")
        return np.concatenate([res.u, [e]])

    u = at_fixed_e(u[: n + 1], u[n + 1])
    _, Jx, _ = full(u)
    tangent = null_vector(Jx)
    if tangent[n + 1] * direction < 0:
        tangent = -tangent
    lo_e, hi_e = sorted(e_range)
    states, halt, report = [u.copy()], "max_points", None
    ctrl = StepController(ds, ds_min, ds_max)
    while len(states) < max_points:
        t_fix = tangent.copy()
        u_pred = u + ctrl.ds * t_fix

        def evaluate(v, u_pred=u_pred, t_fix=t_fix):
            R, Jx, data = full(v)
            return (np.concatenate([R, [np.dot(v - u_pred, t_fix)]]), np.vstack([Jx, t_fix]), data)

        try:
            res = newton(evaluate, u_pred, tol, max_iter=8, what="fold continuation Jacobian")
            if np.linalg.norm(res.u - u) > 3 * ctrl.ds:
                raise ConvergenceError("corrector jumped away from the fold curve")
        except (ConvergenceError, DegeneracyError, IntegrationError) as exc:
            logger.debug("fold step ds=%.3e failed: %s", ctrl.ds, exc)
            if not ctrl.failure():
                halt = "step_underflow"
                break
            continue
        new_t = null_vector(res.jacobian[:-1])
        if np.dot(new_t, tangent) < 0:
            new_t = -new_t
        if np.dot(new_t, tangent) < MIN_TANGENT_COS and ctrl.ds > 4 * ctrl.ds_min:
            ctrl.failure()
            continue
        ctrl.success(res.iterations)
        # refresh the bordering vectors to keep the bordered matrix well conditioned
        F, J, _ = shooter.block(res.u[:n], res.u[n], res.u[n + 1])
        b, c = _border_vectors(J[:, :n])
        if not lo_e <= res.u[n + 1] <= hi_e:
            # land exactly on the crossed bound
            e_b = lo_e if res.u[n + 1] < lo_e else hi_e
            frac = (e_b - u[n + 1]) / (res.u[n + 1] - u[n + 1])
            try:
                states.append(at_fixed_e((u + frac * (res.u - u))[: n + 1], e_b))
            except (ConvergenceError, DegeneracyError, IntegrationError) as exc:
                logger.info("could not land the fold on e=%.6g: %s", e_b, exc)
                states.append(res.u.copy())
            halt = "bounds"
            break
        u, tangent = res.u, new_t
        states.append(u.copy())
        proj = math.hypot(tangent[n], tangent[n + 1])
        if proj < 1e-6:
            halt, report = "cusp", {"e": float(u[n + 1]), "omega": float(u[n]),
                                     "tangent_projection": proj}
            logger.info("fold collision (cusp) near e=%.6g; halting", u[n + 1])
            break
    S = np.array(states)
    amps = []
    for s in S:
        traj = shooter.flow(s[:n], s[n], s[n + 1], variations=False, dense=True)
        amps.append(orbit_amplitude(traj, shooter.span, 256))
    return FoldPath(S[:, n + 1], S[:, n], np.array(amps), S[:, :n], spec.eps, periods, halt, report)


def distance_to_orbit(point, orbit, samples=1024):
    """Euclidean distance from a state to the closed orbit curve."""
    point = np.asarray(point, dtype=float)
    t = orbit.period * np.arange(samples) / samples
    xs = orbit.state(t)
    d = np.linalg.norm(xs - point, axis=1)
    i = int(np.argmin(d))
    h = orbit.period / samples
    out = minimize_scalar(lambda s: np.linalg.norm(orbit.state(s) - point),
                          bounds=(t[i] - h, t[i] + h), method="bounded",
                          options={"xatol": 1e-12 * orbit.period})
    return float(min(out.fun, d[i]))


@dataclass(frozen=True)
class PersistenceCheck:
    verdict: str
    eps: float
    seeds: tuple
    converged: tuple
    distances: tuple
    distinct: bool
    ball: float

    @property
    def found_in_ball(self):
        return sum(1 for d in self.distances if d is not None and d <= self.ball)


def check_persistence(orbit, spec, eps, n_phases=16, ball_factor=2.0, tol=1e-10, ramp=4):
    """Shoot the forced system at the resonant frequency from seeds on the orbit.

    With a ``two_orbits`` verdict the seeds are the simple zeros of the m = 1
    Melnikov profile; otherwise ``n_phases`` equispaced phases are tried.  The
    ball radius is ``ball_factor * eps * max(1, amplitude)``.

    Each seed is followed from eps / 2**ramp up to eps, doubling eps and
    extrapolating linearly in eps.  Near a Melnikov zero the shooting
    Jacobian has a singular value of order eps, so a direct Newton solve at
    the target eps can slide along the orbit onto the other solution.
    """
    model = orbit.model
    spec = spec.replace(eps=eps)
    profile = melnikov_general(None, orbit, spec.replace(m=1))
    verdict = classify_orbit_bifurcation(profile)
    l = spec.l
    Omega = l * orbit.frequency
    if verdict == "two_orbits":
        seeds = [z.s for z in profile.zeros if z.kind == "simple"]
    else:
        seeds = list(orbit.period * np.arange(n_phases) / n_phases)
    # one response period (= orbit period) holds l forcing periods
    shooter_periods = l
    ball = ball_factor * eps * max(1.0, orbit.amplitude)
    ladder = eps * 2.0 ** -np.arange(ramp, -1, -1, dtype=float)
    radius = 0.5 * max(1.0, orbit.amplitude)
    converged, dists = [], []
    for s0 in seeds:
        x_prev, e_prev = orbit.state(s0), 0.0
        x = x_prev
        try:
            for k, ek in enumerate(ladder):
                guess = x if k == 0 else x + (x - x_prev) * (ek - e_cur) / (e_cur - e_prev)
                rec = forced_periodic_orbit(model, spec.replace(eps=ek), Omega, guess, shooter_periods,
                                            tol=tol, radius=radius)
                if k > 0:
                    e_prev = e_cur
                x_prev, x, e_cur = x, rec.xi, ek
        except (ConvergenceError, DegeneracyError, IntegrationError):
            converged.append(None)
            dists.append(None)
            continue
        converged.append(x)
        dists.append(distance_to_orbit(x, orbit))
    pts = [c for c in converged if c is not None]
    distinct = len(pts) >= 2 and all(
        np.linalg.norm(pts[i] - pts[j]) > 1e-6 for i in range(len(pts)) for j in range(i + 1, len(pts)))
    return PersistenceCheck(verdict, eps, tuple(seeds), tuple(converged), tuple(dists), distinct, ball)


@dataclass(frozen=True, eq=False)
class ValidationReport:
    """Distances between ridge predictions and forced-response features."""

    entries: tuple
    beta: dict
    falsified: int

    def lines(self):
        out = []
        for row in self.entries:
            status = "PASS" if row["found"] else "FAIL"
            out.append(f"{status} e={row['e']:.6g} eps={row['eps']:.3g} kind={row['kind']} "
                       f"omega*={row['omega_pred']:.8g} omega={row['omega_frc']} "
                       f"distance={row['distance']}")
        for key, b in self.beta.items():
            out.append(f"beta[{key}]={b:.4f}")
        return out


def peak_window(ridge, prediction, window=0.15):
    """Frequency interval for an FRC through a predicted peak.

    The interval covers the backbone between its small-amplitude end and the
    prediction, widened by ``window`` (relative) on both sides, and is
    ordered so that continuation starts on the small-amplitude side: from
    below for hardening families, from above for softening ones.
    """
    w0 = float(ridge.omega[0])
    lo, hi = min(w0, prediction.omega), max(w0, prediction.omega)
    rng = (lo * (1 - window), hi * (1 + window))
    return rng if prediction.omega >= w0 else rng[::-1]


def validate_predictions(ridge, model, e, eps_ladder, window=0.15, periods=1, frc_options=None):
    """Compare ridge peak predictions with forced-response peaks over an eps ladder.

    For each predicted maximal response the FRC is continued over
    ``peak_window(ridge, prediction, window)`` and the nearest amplitude
    peak is recorded.  The distance in (Omega, a) is fitted as C eps^beta.
    """
    peaks = [p for p in predict_peaks(ridge, e) if p.kind == "max_response"]
    frc_options = dict(frc_options or {})
    entries = []
    for k, p in enumerate(peaks):
        for eps in eps_ladder:
            spec = PerturbationSpec(e=e, eps=eps)
            rng = peak_window(ridge, p, window)
            row = {"prediction": k, "e": e, "eps": eps, "kind": p.kind, "omega_pred": p.omega,
                   "amp_pred": p.amplitude, "omega_frc": None, "amp_frc": None, "distance": None,
                   "found": False}
            try:
                br = continue_frc(model, spec, rng, periods=periods, **frc_options)
                cands = br.peaks(window=rng)
            except (ConvergenceError, ContinuationError, DegeneracyError, IntegrationError) as exc:
                logger.info("FRC for prediction %d at eps=%g failed: %s", k, eps, exc)
                cands = []
            if cands:
                i, w, a = min(cands, key=lambda c: abs(c[1] - p.omega))
                row.update(omega_frc=w, amp_frc=a, found=True,
                           distance=float(math.hypot(w - p.omega, a - p.amplitude)))
            entries.append(row)
    beta = {}
    for k in range(len(peaks)):
        rows = [r for r in entries if r["prediction"] == k and r["found"] and r["distance"] > 0]
        if len(rows) >= 2:
            x = np.log([r["eps"] for r in rows])
            y = np.log([r["distance"] for r in rows])
            beta[k] = float(np.polyfit(x, y, 1)[0])
    falsified = sum(1 for r in entries if not r["found"])
    return ValidationReport(tuple(entries), beta, falsified)
