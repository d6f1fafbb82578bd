"""Newton correction and pseudo-arclength helpers shared by the solvers."""

import numpy as np

from .exceptions import ConvergenceError, DegeneracyError, IntegrationError

__all__ = ["NewtonResult", "newton", "null_vector", "solve_checked", "StepController"]

SINGULAR_RCOND = 1e-13


class NewtonResult:
    __slots__ = ("u", "iterations", "residual", "jacobian", "data")

    def __init__(self, u, iterations, residual, jacobian, data):
        self.u = u
        self.iterations = iterations
        self.residual = residual
        self.jacobian = jacobian
        self.data = data


def solve_checked(J, r, what="bordered system"):
    """Solve J x = r, raising DegeneracyError when J is numerically singular."""
    s = np.linalg.svd(J, compute_uv=False)
    if s[-1] <= SINGULAR_RCOND * s[0]:
        raise DegeneracyError(
            f"singular {what} (condition estimate {s[0] / max(s[-1], 1e-300):.3e})",
            report={"singular_values": s.tolist()},
        )
    return np.linalg.solve(J, r)


def newton(evaluate, u0, tol, step_tol=None, max_iter=25, what="bordered system"):
    """Newton iteration for F(u) = 0.

    ``evaluate(u)`` returns ``(F, J, data)``.  Convergence requires
    ``|F| <= tol`` and a last step no larger than ``step_tol * (1 + |u|)``.
    Integration failures inside ``evaluate`` are reported as
    :class:`ConvergenceError`.
    """
    step_tol = tol if step_tol is None else step_tol
    u = np.array(u0, dtype=float)
    r0 = None
    for it in range(max_iter + 1):
        try:
            F, J, data = evaluate(u)
        except IntegrationError as exc:
            raise ConvergenceError(f"integration failed during Newton iteration {it}: {exc}") from exc
        rn = float(np.linalg.norm(F))
        if not np.isfinite(rn):
            raise ConvergenceError(f"non-finite residual at Newton iteration {it}")
        if r0 is None:
            r0 = rn
        elif rn > 1e6 * max(r0, tol):
            raise ConvergenceError(f"Newton iteration diverging (|F| = {rn:.3e} after {it} steps)")
        if it > 0 and rn <= tol and last_step <= step_tol * (1.0 + np.linalg.norm(u)):
            return NewtonResult(u, it, rn, J, data)
        if it == max_iter:
            break
        du = solve_checked(J, F, what)
        u = u - du
        last_step = float(np.linalg.norm(du))
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (|F| = {rn:.3e})")


def null_vector(J):
    """Unit vector spanning the kernel of a full-rank (k, k+1) matrix."""
    _, s, vt = np.linalg.svd(J)
    if s.size and s[-1] <= SINGULAR_RCOND * s[0]:
        raise DegeneracyError("Jacobian is rank deficient; tangent is not unique")
    return vt[-1]


class StepController:
    """Adaptive arclength step: halve on failure, grow by 1.3 after 3 fast successes."""

    def __init__(self, ds, ds_min, ds_max, fast_iterations=4, grow=1.3, streak=3):
        if not 0 < ds_min <= ds <= ds_max:
            raise ValueError("need 0 < ds_min <= ds <= ds_max")
        self.ds, self.ds_min, self.ds_max = ds, ds_min, ds_max
        self.fast_iterations = fast_iterations
        self.grow = grow
        self.streak_needed = streak
        self._streak = 0

    def success(self, iterations):
        if iterations <= self.fast_iterations:
            self._streak += 1
            if self._streak >= self.streak_needed:
                self.ds = min(self.ds * self.grow, self.ds_max)
                self._streak = 0
        else:
            self._streak = 0

    def failure(self):
        """Halve the step; returns False once it drops below ds_min."""
        self._streak = 0
        self.ds *= 0.5
        return self.ds >= self.ds_min
