"""Compiled right-hand sides for models built from odd polynomial elements.

Every built-in model is a set of elements with elongation d = B q and laws

    F(d) = k1 d + k3 d^3 + k5 d^5,   C(d') = c1 d' + c3 d'^3 + c5 d'^5,

acting on unit masses.  The functions here evaluate the shooting fields and
their variational equations for such models in one compiled call, which
removes most of the per-call interpreter overhead of the integrator loop.
Without numba the callers fall back to the numpy implementations.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

__all__ = ["AVAILABLE", "ElementTable", "conservative_rhs", "forced_rhs"]

AVAILABLE = njit is not None


class ElementTable:
    """Contiguous float arrays describing the elements of a model."""

    __slots__ = ("B", "k1", "k3", "k5", "c1", "c3", "c5", "fe")

    def __init__(self, B, k1, k3, k5, c1, c3, c5, fe):
        as_f = lambda a: np.ascontiguousarray(a, dtype=np.float64)
        self.B = as_f(B)
        self.k1, self.k3, self.k5 = as_f(k1), as_f(k3), as_f(k5)
        self.c1, self.c3, self.c5 = as_f(c1), as_f(c3), as_f(c5)
        self.fe = as_f(fe)

    def args(self):
        return (self.B, self.k1, self.k3, self.k5, self.c1, self.c3, self.c5)


if AVAILABLE:

    @njit(cache=True)
    def _laws(B, k1, k3, k5, c1, c3, c5, q, v):
        d = B @ q
        r = B @ v
        d2 = d * d
        r2 = r * r
        F = d * (k1 + d2 * (k3 + d2 * k5))
        dF = k1 + d2 * (3.0 * k3 + 5.0 * k5 * d2)
        C = r * (c1 + r2 * (c3 + r2 * c5))
        dC = c1 + r2 * (3.0 * c3 + 5.0 * c5 * r2)
        return F, dF, C, dC

    @njit(cache=True)
    def _congruence(B, w):
        # B^T diag(w) B
        m, N = B.shape
        out = np.zeros((N, N))
        for k in range(m):
            for i in range(N):
                bi = B[k, i] * w[k]
                if bi != 0.0:
                    for j in range(N):
                        out[i, j] += bi * B[k, j]
        return out

    @njit(cache=True)
    def conservative_rhs(y, B, k1, k3, k5, c1, c3, c5, tau, mu, variational):
        """Unfolded field tau (f + mu DH) with optional [Y, Z_tau, Z_mu] block."""
        N = B.shape[1]
        n = 2 * N
        q = y[:N].copy()
        v = y[N:n].copy()
        F, dF, _, _ = _laws(B, k1, k3, k5, c1 * 0.0, c3 * 0.0, c5 * 0.0, q, v)
        DV = B.T @ F
        out = np.empty(y.size)
        g = np.empty(n)
        g[:N] = v + mu * DV
        g[N:] = -DV + mu * v
        out[:n] = tau * g
        if variational:
            K = _congruence(B, dF)
            p = n + 2
            W = y[n:].reshape((n, p))
            top = W[:N, :]
            bot = W[N:, :]
            dW = np.empty((n, p))
            Ktop = K @ np.ascontiguousarray(top)
            for i in range(N):
                for j in range(p):
                    dW[i, j] = tau * (mu * Ktop[i, j] + bot[i, j])
                    dW[N + i, j] = tau * (-Ktop[i, j] + mu * bot[i, j])
            for i in range(N):
                dW[i, n] += g[i]
                dW[N + i, n] += g[N + i]
                dW[i, n + 1] += tau * DV[i]
                dW[N + i, n + 1] += tau * v[i]
            out[n:] = dW.ravel()
        return out

    @njit(cache=True)
    def forced_rhs(th, y, B, k1, k3, k5, c1, c3, c5, fe, eps, e, Omega, mode):
        """Phase-time forced field (f + eps g) / Omega.

        mode 0: state only; 1: state + [Y, Z_Omega, Z_e]; 2: state + work
        integral eps <v, Q> / Omega; 3: state + single tangent vector.
        """
        N = B.shape[1]
        n = 2 * N
        q = y[:N].copy()
        v = y[N:n].copy()
        F, dF, C, dC = _laws(B, k1, k3, k5, c1, c3, c5, q, v)
        cth = np.cos(th)
        Q = e * cth * fe - B.T @ C
        out = np.empty(y.size)
        for i in range(N):
            out[i] = v[i] / Omega
        acc = -(B.T @ F) + eps * Q
        for i in range(N):
            out[N + i] = acc[i] / Omega
        if mode == 2:
            out[n] = eps * np.dot(v, Q) / Omega
        elif mode == 1 or mode == 3:
            K = _congruence(B, dF)
            Cv = _congruence(B, dC)
            p = n + 2 if mode == 1 else 1
            W = y[n:].reshape((n, p))
            top = np.ascontiguousarray(W[:N, :])
            bot = np.ascontiguousarray(W[N:, :])
            Kt = K @ top
            Cb = Cv @ bot
            dW = np.empty((n, p))
            for i in range(N):
                for j in range(p):
                    dW[i, j] = bot[i, j] / Omega
                    dW[N + i, j] = (-Kt[i, j] - eps * Cb[i, j]) / Omega
            if mode == 1:
                for i in range(n):
                    dW[i, n] -= out[i] / Omega
                for i in range(N):
                    dW[N + i, n + 1] += eps * cth * fe[i] / Omega
            out[n:] = dW.ravel()
        return out

else:  # pragma: no cover
    conservative_rhs = None
    forced_rhs = None
