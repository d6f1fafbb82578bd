"""Conservative periodic orbits: shooting, continuation and normality.

Orbits are found by shooting on the unfolded field

    x' = tau * (f(x) + mu * DH(x)),   s in [0, 1],

with unknowns (xi, tau, mu).  The unfolding parameter mu breaks energy
conservation, which makes the bordered shooting Jacobian square and
nonsingular at normal orbits; at a solution mu vanishes and the field reduces
to the conservative one rescaled to unit time.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .continuation import StepController, newton, null_vector
from .exceptions import (
    ContinuationError,
    ConvergenceError,
    DegeneracyError,
    IntegrationError,
)
from .flow import integrate, integrate_augmented, resample_uniform
from .model import FirstOrderSystem, MechanicalModel, linearize, resonance_pairs

__all__ = [
    "PeriodicOrbit",
    "NormalityReport",
    "OrbitFamily",
    "ShootingOptions",
    "find_periodic_orbit",
    "seed_from_linear_mode",
    "continue_family",
    "classify_normality",
    "orbit_amplitude",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShootingOptions:
    """Tolerances for conservative shooting.

    ``tol`` bounds the relative periodicity residual |x(tau) - xi| / (1 + |xi|).
    """

    tol: float = 1e-10
    rtol: float = 1e-12
    atol: float = 1e-13
    max_iter: int = 25
    amplitude_samples: int = 512
    amplitude_normalized: bool = True
    max_step: float = np.inf  # in physical time


def _as_system(model):
    if isinstance(model, FirstOrderSystem):
        return FirstOrderSystem(model.model)
    if isinstance(model, MechanicalModel):
        return FirstOrderSystem(model)
    raise TypeError(f"expected a MechanicalModel or FirstOrderSystem, got {type(model).__name__}")


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    """Converged conservative periodic orbit.

    ``trajectory`` is the dense solution over one period starting at
    ``base_point``; :meth:`state` evaluates it periodically.
    """

    system: FirstOrderSystem = field(repr=False)
    base_point: np.ndarray
    period: float
    energy: float
    amplitude: float
    monodromy: np.ndarray = field(repr=False)
    multipliers: np.ndarray = field(repr=False)
    residual: float
    unfolding: float = 0.0
    trajectory: object = field(default=None, repr=False)
    amplitude_normalized: bool = True

    @property
    def model(self):
        return self.system.model

    @property
    def frequency(self):
        return 2.0 * np.pi / self.period

    def state(self, t):
        """Orbit state x0(t; p), extended periodically."""
        t = np.mod(np.asarray(t, dtype=float), self.period)
        return self.trajectory(t)

    def shifted(self, delta):
        """Same orbit with base point moved to x0(delta)."""
        base = self.state(float(np.mod(delta, self.period)))
        traj = integrate(self.system, base, (0.0, self.period), rtol=1e-12, atol=1e-13)
        return PeriodicOrbit(
            self.system, base, self.period, self.energy,
            self.amplitude, self.monodromy, self.multipliers, self.residual, self.unfolding,
            traj, self.amplitude_normalized,
        )


@dataclass(frozen=True)
class NormalityReport:
    """Multiplicity structure of the +1 multiplier of the m-fold monodromy."""

    m: int
    mu_a: int
    mu_g: int
    f_in_range: bool
    range_residual: float
    classification: str
    cluster_tol: float
    condition: float
    ambiguous: bool
    multipliers: tuple = ()

    @property
    def normal(self):
        return self.classification in ("case_a", "case_b")


@dataclass(frozen=True, eq=False)
class OrbitFamily:
    """Ordered backbone curve.

    ``tag`` names the quantity stored in ``parameter`` (period, energy or
    arclength); ``halt_reason`` says why continuation stopped.
    """

    orbits: tuple
    parameter: np.ndarray
    tag: str
    normality: tuple
    halt_reason: str = "completed"
    halt_report: NormalityReport | None = None

    def __len__(self):
        return len(self.orbits)

    def __getitem__(self, i):
        return self.orbits[i]

    def __iter__(self):
        return iter(self.orbits)

    @property
    def periods(self):
        return np.array([o.period for o in self.orbits])

    @property
    def energies(self):
        return np.array([o.energy for o in self.orbits])

    @property
    def amplitudes(self):
        return np.array([o.amplitude for o in self.orbits])

    @property
    def frequencies(self):
        return 2.0 * np.pi / self.periods

    def with_tag(self, tag):
        """Reparametrize by ``tag``; raises ValueError if it is not strictly monotone."""
        values = _tag_values(self.orbits, tag)
        if not _strictly_monotone(values):
            raise ValueError(f"{tag} is not strictly monotone along this family")
        return OrbitFamily(self.orbits, values, tag, self.normality, self.halt_reason, self.halt_report)


def orbit_amplitude(trajectory, period, samples=512, normalized=True):
    """L2 norm of the state over one period, optionally time-averaged."""
    _, xs = resample_uniform(trajectory, samples, period=period, t0=trajectory.t0)
    mean_sq = float(np.mean(np.sum(xs**2, axis=-1)))
    return float(np.sqrt(mean_sq if normalized else mean_sq * period))


class _Shooter:
    """Residual and Jacobian of the unfolded conservative shooting problem."""

    def __init__(self, system, options):
        self.system = system
        self.options = options
        self.n = system.n

    def flow(self, xi, tau, mu):
        system = self.system
        if system.analytic_jacobian and system._identity_mass and not system.model.has_inertial:
            table = system.model.element_table() if kernels.AVAILABLE else None
            if table is not None:
                args = table.args() + (float(tau), float(mu), True)
                rhs = kernels.conservative_rhs
                return integrate_augmented(None, None, xi, (0.0, 1.0), rtol=self.options.rtol,
                                           atol=self.options.atol, n_params=2,
                                           max_step=self.options.max_step / tau,
                                           fused=lambda t, y: rhs(y, *args))
            return self._flow_unit_mass(xi, tau, mu)

        def fun(t, x):
            return tau * (system.f(x) + mu * system.energy_gradient(x))

        def jac(t, x):
            return tau * (system.jacobian(0.0, x) + mu * system.energy_hessian(x))

        def dparams(t, x):
            dh = system.energy_gradient(x)
            return np.stack([system.f(x) + mu * dh, tau * dh], axis=-1)

        return integrate_augmented(fun, jac, xi, (0.0, 1.0), dparams=dparams,
                                   rtol=self.options.rtol, atol=self.options.atol,
                                   max_step=self.options.max_step / tau)

    def _flow_unit_mass(self, xi, tau, mu):
        # M = I: f = (v, -DV), DH = (DV, v), D^2H = diag(K, I); one potential
        # evaluation per call instead of four
        model = self.system.model
        N = self.system.N
        n = self.n
        eye = np.eye(N)
        cache = {}

        def parts(x):
            key = x.tobytes()
            if key not in cache:
                cache.clear()
                q, v = x[:N], x[N:]
                dv = model.potential_gradient(q)
                cache[key] = (np.concatenate([v + mu * dv, -dv + mu * v]), dv, v)
            return cache[key]

        def fun(t, x):
            return tau * parts(x)[0]

        def jac(t, x):
            K = model.potential_hessian(x[:N])
            J = np.empty((n, n))
            J[:N, :N] = mu * K
            J[:N, N:] = eye
            J[N:, :N] = -K
            J[N:, N:] = mu * eye
            return tau * J

        def dparams(t, x):
            g, dv, v = parts(x)
            return np.stack([g, tau * np.concatenate([dv, v])], axis=-1)

        return integrate_augmented(fun, jac, xi, (0.0, 1.0), dparams=dparams,
                                   rtol=self.options.rtol, atol=self.options.atol,
                                   max_step=self.options.max_step / tau)

    def shooting_block(self, u):
        """Periodicity residual (n,) and its Jacobian (n, n+2) in u = (xi, tau, mu)."""
        n = self.n
        xi, tau, mu = u[:n], u[n], u[n + 1]
        if not tau > 0:
            raise ConvergenceError("period became non-positive during Newton iteration")
        sol = self.flow(xi, tau, mu)
        F = (sol.x - xi) / (1.0 + np.linalg.norm(xi))
        J = np.hstack([sol.Y - np.eye(n), sol.Z]) / (1.0 + np.linalg.norm(xi))
        return F, J, sol


def _finalize(system, u, sol, options):
    n = system.n
    xi, tau, mu = u[:n].copy(), float(u[n]), float(u[n + 1])
    if abs(mu) * tau > 1e-6:
        raise DegeneracyError(f"unfolding parameter did not vanish (mu = {mu:.3e})")
    traj = integrate(system, xi, (0.0, tau), rtol=options.rtol, atol=options.atol,
                     max_step=options.max_step)
    residual = float(np.linalg.norm(traj.final - xi))
    scale = 1.0 + np.linalg.norm(xi)
    if residual > 10 * options.tol * scale:
        raise ConvergenceError(f"periodicity residual {residual:.3e} above tolerance")
    for k in range(2, 6):
        if np.linalg.norm(traj(tau / k) - xi) <= 10 * options.tol * scale:
            raise DegeneracyError(f"converged period is {k} times the minimal period")
    amp = orbit_amplitude(traj, tau, options.amplitude_samples, options.amplitude_normalized)
    Y = sol.Y
    return PeriodicOrbit(
        system=system,
        base_point=xi,
        period=tau,
        energy=float(system.energy(xi)),
        amplitude=amp,
        monodromy=Y,
        multipliers=np.linalg.eigvals(Y),
        residual=residual,
        unfolding=mu,
        trajectory=traj,
        amplitude_normalized=options.amplitude_normalized,
    )


def find_periodic_orbit(model, guess, pin=None, options=None):
    """Converge a conservative periodic orbit by bordered Newton shooting.

    Parameters
    ----------
    model : MechanicalModel or FirstOrderSystem
    guess : tuple (xi, tau)
        Initial state and period.  The phase condition is taken relative to
        this guess: <xi - xi_guess, f(xi_guess)> = 0.
    pin : tuple, optional
        ``("energy", h)`` or ``("period", tau)``.  Defaults to pinning the
        energy of the guess.
    options : ShootingOptions, optional

    Raises
    ------
    ConvergenceError
        Newton diverged or hit the iteration cap.
    DegeneracyError
        Singular bordered Jacobian, which happens at non-normal orbits and
        for period pins on isochronous families.
    """
    system = _as_system(model)
    options = options or ShootingOptions()
    xg = np.array(guess[0], dtype=float)
    tau_g = float(guess[1])
    n = system.n
    if xg.shape != (n,):
        raise ValueError(f"guess state must have shape ({n},)")
    kind, value = pin if pin is not None else ("energy", float(system.energy(xg)))
    if kind not in ("energy", "period"):
        raise ValueError(f"unknown pin {kind!r}")
    fg = system.f(xg)
    fg_unit = fg / np.linalg.norm(fg)
    shooter = _Shooter(system, options)
    h_scale = 1.0 + abs(value)

    def evaluate(u):
        F, J, sol = shooter.shooting_block(u)
        xi = u[:n]
        phase = np.dot(xi - xg, fg_unit)
        phase_row = np.concatenate([fg_unit, [0.0, 0.0]])
        if kind == "energy":
            pin_res = (system.energy(xi) - value) / h_scale
            pin_row = np.concatenate([system.energy_gradient(xi), [0.0, 0.0]]) / h_scale
        else:
            pin_res = (u[n] - value) / h_scale
            pin_row = np.zeros(n + 2)
            pin_row[n] = 1.0 / h_scale
        return (np.concatenate([F, [phase, pin_res]]),
                np.vstack([J, phase_row, pin_row]), sol)

    u0 = np.concatenate([xg, [value if kind == "period" else tau_g, 0.0]])
    res = newton(evaluate, u0, options.tol, max_iter=options.max_iter,
                 what="bordered shooting Jacobian")
    return _finalize(system, res.u, res.data, options)


def seed_from_linear_mode(model, mode_index, amplitude):
    """Guess (xi, tau) on the linear mode ``mode_index`` (1-based).

    The mode shape is normalised to unit Euclidean norm and scaled by
    ``amplitude``; the period is that of the linear mode.
    """
    model = model.model if isinstance(model, FirstOrderSystem) else model
    freqs, modes = linearize(model)
    if not 1 <= mode_index <= freqs.size:
        raise ValueError(f"mode_index must be in 1..{freqs.size}, got {mode_index}")
    if freqs.size > 1 and np.min(np.diff(freqs)) <= 1e-8 * freqs[-1]:
        raise DegeneracyError("linearization has repeated eigenfrequencies")
    hits = resonance_pairs(freqs)
    if hits:
        raise DegeneracyError(f"linearization is internally resonant: {hits}")
    shape = modes[:, mode_index - 1]
    shape = shape / np.linalg.norm(shape)
    # fix the sign so that the largest component is positive
    if shape[np.argmax(np.abs(shape))] < 0:
        shape = -shape
    xi = np.concatenate([amplitude * shape, np.zeros(model.dof)])
    return xi, 2.0 * np.pi / freqs[mode_index - 1]


def classify_normality(orbit, m=1, band=1e-6, guard=10.0, range_tol=1e-6, monodromy=None):
    """Classify the +1 multiplier structure of the m-fold monodromy.

    Multipliers with |mu - 1| <= band * cond(Pi) form the +1 cluster (ordered
    Schur form); the geometric multiplicity is the cluster size minus the
    numerical rank of the cluster block minus the identity.  Multipliers within
    a factor ``guard`` of the band edge make the result ambiguous, reported as
    degenerate.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    P = np.linalg.matrix_power(orbit.monodromy if monodromy is None else monodromy, m)
    n = P.shape[0]
    cond = float(np.linalg.cond(P))
    tol = band * max(cond, 1.0)
    evals = np.linalg.eigvals(P)
    dist = np.abs(evals - 1.0)
    inside = dist <= tol
    # Multipliers of a Jordan block split by O(sqrt(rounding)), so the inner
    # guard tests the cluster mean, which stays well conditioned.
    ambiguous = bool(np.any((dist > tol) & (dist <= tol * guard)))
    if np.any(inside):
        ambiguous |= bool(abs(np.mean(evals[inside]) - 1.0) > tol / guard)
    T, _, sdim = scipy.linalg.schur(P.astype(complex), output="complex",
                                    sort=lambda z: abs(z - 1.0) <= tol)
    mu_a = int(sdim)
    if mu_a:
        sv = np.linalg.svd(T[:mu_a, :mu_a] - np.eye(mu_a), compute_uv=False)
        rank = int(np.sum(sv > tol))
    else:
        rank = 0
    mu_g = mu_a - rank
    fp = orbit.system.f(orbit.base_point)
    U, s, _ = np.linalg.svd(P - np.eye(n))
    Uk = U[:, s > tol]
    resid = float(np.linalg.norm(fp - Uk @ (Uk.T @ fp)) / np.linalg.norm(fp))
    in_range = resid < range_tol
    if ambiguous:
        cls = "degenerate"
    elif mu_g == 1:
        cls = "case_a"
    elif mu_g == 2 and not in_range:
        cls = "case_b"
    else:
        cls = "degenerate"
    return NormalityReport(m, mu_a, mu_g, bool(in_range), resid, cls, tol, cond, ambiguous,
                           tuple(complex(z) for z in evals))


def _tag_values(orbits, tag):
    if tag == "period":
        return np.array([o.period for o in orbits])
    if tag == "energy":
        return np.array([o.energy for o in orbits])
    if tag == "arclength":
        pts = np.array([np.concatenate([o.base_point, [o.period]]) for o in orbits])
        return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    raise ValueError(f"unknown parametrization tag {tag!r}")


def _strictly_monotone(v, rtol=1e-9):
    # increments below rtol are shooting noise, not monotonicity
    if v.size < 2:
        return True
    d = np.diff(v)
    floor = rtol * float(np.max(np.abs(v)))
    return bool(np.all(d > floor) or np.all(d < -floor))


def _select_tag(orbits, preferred):
    order = {"period": ["period", "energy", "arclength"],
             "energy": ["energy", "arclength"],
             "arclength": ["arclength"]}[preferred]
    for tag in order:
        values = _tag_values(orbits, tag)
        if _strictly_monotone(values):
            return tag, values
    return "arclength", _tag_values(orbits, "arclength")


def continue_family(model, seed, bounds=None, max_points=200, ds=0.05, ds_min=1e-6, ds_max=0.5,
                    tag="period", until=None, options=None, check_normality=True,
                    normality_band=1e-6, normality_guard=10.0):
    """Continue the family through ``seed`` by pseudo-arclength.

    The unknowns (xi, tau, mu) are continued with the phase condition taken
    relative to the previous orbit; the first step is oriented towards
    increasing energy.

    Parameters
    ----------
    bounds : dict, optional
        Intervals for any of ``energy``, ``period``, ``amplitude``,
        ``frequency``; continuation stops once an orbit leaves them.
    until : callable, optional
        ``until(orbit) -> bool``; stops after the first orbit for which it
        returns True.
    tag : {"period", "energy", "arclength"}
        Preferred parametrization.  Falls back period -> energy -> arclength
        when the preferred quantity is not strictly monotone (e.g. at period
        folds).
    normality_band, normality_guard : float
        Cluster band and ambiguity guard passed to :func:`classify_normality`.

    Returns
    -------
    OrbitFamily
        Stops early (with ``halt_reason``) when 1-normality is lost.

    Raises
    ------
    ContinuationError
        Step size underflow; the partial family is attached as ``.family``.
    """
    system = _as_system(model)
    options = options or ShootingOptions()
    bounds = dict(bounds or {})
    unknown = set(bounds) - {"energy", "period", "amplitude", "frequency"}
    if unknown:
        raise ValueError(f"unknown bounds {sorted(unknown)}")
    n = system.n
    shooter = _Shooter(system, options)

    rep0 = (classify_normality(seed, 1, band=normality_band, guard=normality_guard)
            if check_normality else None)
    if check_normality and rep0.classification == "degenerate":
        raise DegeneracyError("seed orbit is not 1-normal", report=rep0)

    orbits = [seed]
    reports = [rep0]
    u_prev = np.concatenate([seed.base_point, [seed.period, 0.0]])

    def extended_jacobian(u, ref):
        F, J, sol = shooter.shooting_block(u)
        fr = system.f(ref)
        fr = fr / np.linalg.norm(fr)
        phase = np.dot(u[:n] - ref, fr)
        return (np.concatenate([F, [phase]]),
                np.vstack([J, np.concatenate([fr, [0.0, 0.0]])]), sol)

    _, J0, _ = extended_jacobian(u_prev, seed.base_point)
    tangent = null_vector(J0)
    if np.dot(tangent[:n], system.energy_gradient(seed.base_point)) < 0:
        tangent = -tangent

    ctrl = StepController(ds, ds_min, ds_max)
    halt, halt_report = "max_points", None

    def inside(orbit):
        checks = {"energy": orbit.energy, "period": orbit.period,
                  "amplitude": orbit.amplitude, "frequency": orbit.frequency}
        return all(lo <= checks[k] <= hi for k, (lo, hi) in bounds.items())

    while len(orbits) < max_points:
        ref = orbits[-1].base_point
        u_pred = u_prev + ctrl.ds * tangent
        t_fixed = tangent.copy()

        def evaluate(u, u_pred=u_pred, t_fixed=t_fixed, ref=ref):
            F, J, sol = extended_jacobian(u, ref)
            return (np.concatenate([F, [np.dot(u - u_pred, t_fixed)]]),
                    np.vstack([J, t_fixed]), sol)

        try:
            res = newton(evaluate, u_pred, options.tol, max_iter=8,
                         what="pseudo-arclength Jacobian")
            if np.linalg.norm(res.u - u_prev) > 3.0 * ctrl.ds:
                raise ConvergenceError("corrector jumped away from the branch")
            orbit = _finalize(system, res.u, res.data, options)
        except (ConvergenceError, DegeneracyError, IntegrationError) as exc:
            logger.debug("continuation step ds=%.3e failed: %s", ctrl.ds, exc)
            if not ctrl.failure():
                fam = _make_family(orbits, reports, tag, "step_underflow", None)
                err = ContinuationError(f"step size underflow after {len(orbits)} orbits: {exc}")
                err.family = fam
                raise err from exc
            continue

        report = (classify_normality(orbit, 1, band=normality_band, guard=normality_guard)
                  if check_normality else None)
        if check_normality and not report.normal:
            halt, halt_report = "normality_lost", report
            logger.info("1-normality lost at h=%.6g; halting", orbit.energy)
            break
        if not inside(orbit):
            halt = "bounds"
            break
        new_tangent = null_vector(res.jacobian[:-1])
        if np.dot(new_tangent, tangent) < 0:
            new_tangent = -new_tangent
        if np.dot(new_tangent, tangent) < 0.9 and ctrl.ds > 4 * ctrl.ds_min:
            # sharp turn: shorten the step to follow the curvature
            ctrl.failure()
            continue
        ctrl.success(res.iterations)
        tangent = new_tangent
        u_prev = res.u
        orbits.append(orbit)
        reports.append(report)
        if until is not None and until(orbit):
            halt = "until"
            break
    return _make_family(orbits, reports, tag, halt, halt_report)


def _make_family(orbits, reports, tag, halt, halt_report):
    used, values = _select_tag(orbits, tag)
    if used != tag:
        logger.info("family parameter %s not monotone; using %s", tag, used)
    return OrbitFamily(tuple(orbits), values, used, tuple(reports), halt, halt_report)
