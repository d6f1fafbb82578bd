"""Time integration of states and of the variational equations.

Integration uses the explicit 8(5,3) Dormand-Prince pair from scipy, stepped
manually so that blow-up and step-size underflow can be reported with the last
good time and per-step error estimates can be kept.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, OdeSolution

from .exceptions import IntegrationError

__all__ = [
    "Trajectory",
    "VariationalSolution",
    "integrate",
    "integrate_with_variations",
    "integrate_augmented",
    "resample_uniform",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
]

logger = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-11
DEFAULT_ATOL = 1e-12
MAX_STEPS = 500_000


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Adaptive solution with dense output.

    Attributes
    ----------
    t : ndarray, shape (k,)
        Accepted step times (strictly increasing, or a single point).
    x : ndarray, shape (k, n)
        States at the step times.
    step_errors : ndarray, shape (k-1,)
        Scaled local error norm of each accepted step (NaN if unavailable).
    energy_drift : float or None
        max |H(x(t)) - H(x(t0))| over step points for conservative runs.
    """

    t: np.ndarray
    x: np.ndarray
    step_errors: np.ndarray
    dense: OdeSolution | None = field(default=None, repr=False)
    energy_drift: float | None = None
    nfev: int = 0

    @property
    def t0(self):
        return float(self.t[0])

    @property
    def t_end(self):
        return float(self.t[-1])

    @property
    def final(self):
        return self.x[-1]

    def __call__(self, t):
        """Evaluate the interpolant; returns shape (n,) or (len(t), n)."""
        t = np.asarray(t, dtype=float)
        lo, hi = min(self.t0, self.t_end), max(self.t0, self.t_end)
        span = hi - lo
        if np.any(t < lo - 1e-12 * (1 + span)) or np.any(t > hi + 1e-12 * (1 + span)):
            raise ValueError(f"evaluation outside the trajectory span [{lo}, {hi}]")
        if self.dense is None:
            if self.t.size == 1:
                return np.broadcast_to(self.x[0], t.shape + self.x.shape[1:]).copy()
            raise ValueError("trajectory was computed without dense output")
        out = self.dense(np.clip(t, lo, hi))
        return out.T if t.ndim else out


@dataclass(frozen=True, eq=False)
class VariationalSolution:
    """End state, fundamental matrix and optional parameter sensitivities.

    ``Y`` solves Y' = J(x) Y with Y(t0) = I; ``Z`` (if requested) solves
    Z' = J(x) Z + dF/dp with Z(t0) = 0.
    """

    t0: float
    t_end: float
    x: np.ndarray
    Y: np.ndarray
    Z: np.ndarray | None = None
    trajectory: Trajectory | None = field(default=None, repr=False)


def _run(fun, t0, y0, t1, rtol, atol, max_step, dense, max_steps=MAX_STEPS):
    y0 = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise IntegrationError("non-finite initial state", t0)
    if rtol <= 0 or np.any(np.asarray(atol) <= 0):
        raise ValueError("tolerances must be positive")
    if t1 == t0:
        return Trajectory(np.array([t0]), y0[None, :].copy(), np.zeros(0), None, None, 0)

    solver = DOP853(fun, t0, y0, t1, rtol=rtol, atol=atol, max_step=max_step)
    ts, ys, errs, interps = [t0], [y0], [], []
    steps = 0
    while solver.status == "running":
        y_old = solver.y
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"step-size underflow: {message}", ts[-1])
        if not np.all(np.isfinite(solver.y)):
            raise IntegrationError("state became non-finite (blow-up)", ts[-1])
        steps += 1
        if steps > max_steps:
            raise IntegrationError(f"exceeded {max_steps} steps", ts[-1])
        try:
            scale = atol + np.maximum(np.abs(y_old), np.abs(solver.y)) * rtol
            errs.append(float(solver._estimate_error_norm(solver.K, solver.h_previous, scale)))
        except (AttributeError, TypeError, ValueError):
            errs.append(float("nan"))
        ts.append(solver.t)
        ys.append(solver.y.copy())
        if dense:
            interps.append(solver.dense_output())
    t_arr = np.array(ts)
    sol = OdeSolution(t_arr, interps) if dense else None
    return Trajectory(t_arr, np.array(ys), np.array(errs), sol, None, solver.nfev)


def _rhs_of(system):
    return system.rhs if hasattr(system, "rhs") else system


def integrate(system, xi, span, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, max_step=np.inf,
              dense=True, drift_budget=None):
    """Integrate x' = rhs(t, x) from ``xi`` over ``span = (t0, t1)``.

    Parameters
    ----------
    system : FirstOrderSystem or callable
        Anything with ``rhs(t, x)``, or the right-hand side itself.
    drift_budget : float, optional
        Allowed energy drift for conservative runs; defaults to
        1e-10 * (1 + |H(xi)|).  Exceeding it is logged, not raised.
    """
    t0, t1 = map(float, span)
    traj = _run(_rhs_of(system), t0, xi, t1, rtol, atol, max_step, dense)
    if hasattr(system, "energy") and getattr(system, "eps", 1.0) == 0.0:
        h = system.energy(traj.x)
        drift = float(np.max(np.abs(h - h[0])))
        budget = 1e-10 * (1.0 + abs(h[0])) if drift_budget is None else drift_budget
        if drift > budget:
            logger.warning("energy drift %.3e exceeds budget %.3e", drift, budget)
        traj = Trajectory(traj.t, traj.x, traj.step_errors, traj.dense, drift, traj.nfev)
    return traj


def integrate_augmented(fun, jac, xi, span, dparams=None, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                        max_step=np.inf, dense=False, fused=None, n_params=0):
    """Co-integrate a field with its variational equations.

    Parameters
    ----------
    fun, jac : callables ``(t, x)``
        Vector field and its Jacobian with respect to x.
    dparams : callable ``(t, x) -> (n, p)``, optional
        Partial derivatives of the field with respect to p parameters.
    fused : callable ``(t, y) -> y'``, optional
        Right-hand side of the whole augmented state ``[x, W.ravel()]`` with
        W of shape (n, n + n_params); replaces ``fun``, ``jac`` and ``dparams``.
    """
    t0, t1 = map(float, span)
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    p = int(n_params) if fused is not None else 0
    if dparams is not None and fused is None:
        p = np.atleast_2d(np.asarray(dparams(t0, xi))).reshape(n, -1).shape[1]

    def aug(t, y):
        x = y[:n]
        J = jac(t, x)
        W = y[n:].reshape(n, n + p)
        dW = J @ W
        if p:
            dW[:, n:] += np.asarray(dparams(t, x)).reshape(n, p)
        return np.concatenate([fun(t, x), dW.ravel()])

    W0 = np.zeros((n, n + p))
    W0[:, :n] = np.eye(n)
    y0 = np.concatenate([xi, W0.ravel()])
    traj = _run(aug if fused is None else fused, t0, y0, t1, rtol, atol, max_step, dense)
    y1 = traj.x[-1]
    W1 = y1[n:].reshape(n, n + p)
    Y = W1[:, :n].copy()
    Z = W1[:, n:].copy() if p else None
    if t1 != t0:
        det = np.linalg.det(Y)
        if det <= 0:
            logger.info("fundamental matrix has non-positive determinant %.3e", det)
    return VariationalSolution(t0, t1, y1[:n].copy(), Y, Z, traj if dense else None)


def integrate_with_variations(system, xi, span, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                              max_step=np.inf, dense=False):
    """Integrate x' = F(t, x) together with Y' = DF Y, Y(t0) = I."""
    return integrate_augmented(system.rhs, system.jacobian, xi, span, rtol=rtol, atol=atol,
                               max_step=max_step, dense=dense)


def resample_uniform(traj, samples, period=None, t0=None):
    """Evaluate the dense output at ``samples`` equispaced times over one period.

    The grid is t0 + k * period / samples for k = 0..samples-1 (the endpoint is
    excluded, as needed by FFTs and periodic trapezoid sums).
    """
    samples = int(samples)
    if samples < 64 or samples & (samples - 1):
        raise ValueError(f"samples must be a power of two >= 64, got {samples}")
    t0 = traj.t0 if t0 is None else float(t0)
    period = traj.t_end - traj.t0 if period is None else float(period)
    if period <= 0:
        raise ValueError("period must be positive")
    if t0 < traj.t0 - 1e-12 * (1 + abs(period)) or t0 + period > traj.t_end + 1e-9 * (1 + abs(period)):
        raise ValueError("trajectory span does not cover one period")
    times = t0 + period * np.arange(samples) / samples
    return times, traj(times)
