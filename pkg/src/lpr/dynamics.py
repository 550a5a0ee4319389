"""Lagrange-Poincare equations as an explicit first-order system on TM/G.

With ``p = dl/dw`` the reduced equations read

    d/dt (dl/dv^i) - dl/dx^i = -(K[a,i,k] v^k + U[a,i,b] w^b) p_a
    d/dt (dl/dw^a)           =  (U[b,i,a] v^i + C[b,c,a] w^c) p_b

(U = upsilon).  The time derivatives are expanded by the chain rule and the
resulting (m+k) linear system is solved at every evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bundle import curvature, upsilon
from .errors import DimensionError, IntegrationError, LPRError, RouthError
from .lagrangian import gradient, solve_checked, velocity_hessian


@dataclass(frozen=True)
class ReducedState:
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("x", "v", "w"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.x.shape != self.v.shape:
            raise DimensionError("x and v must have equal length")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.v, self.w])

    @classmethod
    def from_vector(cls, y, m: int) -> "ReducedState":
        y = np.asarray(y, dtype=float)
        return cls(y[:m], y[m:2 * m], y[2 * m:])


@dataclass(frozen=True)
class ReducedTrajectory:
    """Samples of a reduced solution on a fixed grid.

    ``states[n] = (x, v, w)`` flattened and ``rates[n]`` the RHS there; the
    pair supports cubic Hermite dense output between grid nodes.
    """

    times: np.ndarray
    states: np.ndarray
    rates: np.ndarray
    base_dim: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be a strictly increasing 1-d sequence")
        if self.states.shape[0] != t.size or self.rates.shape != self.states.shape:
            raise ValueError("states/rates must have one row per time")

    def __len__(self):
        return self.times.size

    @property
    def x(self):
        return self.states[:, : self.base_dim]

    @property
    def v(self):
        m = self.base_dim
        return self.states[:, m:2 * m]

    @property
    def w(self):
        return self.states[:, 2 * self.base_dim:]

    def state(self, n: int) -> ReducedState:
        return ReducedState.from_vector(self.states[n], self.base_dim)

    def interpolate(self, t: float) -> np.ndarray:
        """Cubic Hermite interpolation of the flattened state at time t."""
        times = self.times
        if t <= times[0]:
            return self.states[0].copy()
        if t >= times[-1]:
            return self.states[-1].copy()
        n = int(np.searchsorted(times, t, side="right") - 1)
        t0, t1 = times[n], times[n + 1]
        h = t1 - t0
        s = (t - t0) / h
        if s == 0.0:
            return self.states[n].copy()
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return (
            h00 * self.states[n]
            + h10 * h * self.rates[n]
            + h01 * self.states[n + 1]
            + h11 * h * self.rates[n + 1]
        )

    def state_at(self, t: float) -> ReducedState:
        return ReducedState.from_vector(self.interpolate(t), self.base_dim)


def _dims(sys):
    return sys.lag.base_dim, sys.lag.fiber_dim


def lp_rhs(sys, s: ReducedState, include_quadratic_terms=False, method="auto"):
    """Time derivatives (dx, dv, dw) of the reduced state.

    ``include_quadratic_terms`` also adds the projections of the complete
    lifts onto d/dw, ``w^a U[b,i,a] v^i - C[b,a,c] w^a w^c - K[b,i,j] v^i v^j
    - U[b,i,c] v^i w^c``, which cancel identically; the result must agree with
    the default to round-off.
    """
    m, k = _dims(sys)
    x, v, w = s.x, s.v, s.w
    grad = gradient(sys.lag, s, method)
    H, X = velocity_hessian(sys.lag, s, method)
    p = grad.dl_dw
    C = sys.alg.structure_constants
    U = upsilon(sys.chart, sys.alg, x) if m else np.zeros((k, 0, k))
    K = curvature(sys.chart, sys.alg, x) if m else np.zeros((k, 0, 0))
    drift = X.T @ v if m else np.zeros(m + k)

    r_v = (
        grad.dl_dx
        - np.einsum("aik,k,a->i", K, v, p)
        - np.einsum("aib,b,a->i", U, w, p)
        - drift[:m]
    )
    r_w = (
        np.einsum("bia,i,b->a", U, v, p)
        + np.einsum("bca,c,b->a", C, w, p)
        - drift[m:]
    )
    du, _ = solve_checked(H, np.concatenate([r_v, r_w]), block="full")
    dv, dw = du[:m], du[m:]
    if include_quadratic_terms:
        dw = dw + (
            np.einsum("a,bia,i->b", w, U, v)
            - np.einsum("bac,a,c->b", C, w, w)
            - np.einsum("bij,i,j->b", K, v, v)
            - np.einsum("bic,i,c->b", U, v, w)
        )
    return v.copy(), dv, dw


def lp_residual(sys, s: ReducedState, dv, dw, method="auto"):
    """Residuals of both LP equations for given accelerations (chain rule on d/dt)."""
    m, k = _dims(sys)
    x, v, w = s.x, s.v, s.w
    grad = gradient(sys.lag, s, method)
    H, X = velocity_hessian(sys.lag, s, method)
    p = grad.dl_dw
    du = np.concatenate([dv, dw])
    ddt = (X.T @ v if m else 0.0) + H @ du
    C = sys.alg.structure_constants
    U = upsilon(sys.chart, sys.alg, x) if m else np.zeros((k, 0, k))
    K = curvature(sys.chart, sys.alg, x) if m else np.zeros((k, 0, 0))
    res_v = ddt[:m] - grad.dl_dx + np.einsum("aik,k,a->i", K, v, p) + np.einsum("aib,b,a->i", U, w, p)
    res_w = ddt[m:] - np.einsum("bia,i,b->a", U, v, p) - np.einsum("bca,c,b->a", C, w, p)
    return res_v, res_w


def reduced_vector_field(sys, method="auto"):
    m, _ = _dims(sys)

    def f(y):
        dx, dv, dw = lp_rhs(sys, ReducedState.from_vector(y, m), method=method)
        return np.concatenate([dx, dv, dw])

    return f


def time_grid(t_end: float, dt: float) -> np.ndarray:
    """Uniform grid on [0, t_end]; the last step is shortened to land on t_end."""
    if not (dt > 0 and t_end > 0):
        raise ValueError(f"need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")
    n = int(math.ceil(t_end / dt - 1e-9))
    t = np.arange(n + 1, dtype=float) * dt
    t[-1] = t_end
    if n >= 1 and t[-1] <= t[-2]:
        t = np.delete(t, -2)
    return t


def rk4_stages(f, y, h, k1=None):
    """Classical RK4; returns the new value, the four stage points and f(y)."""
    if k1 is None:
        k1 = f(y)
    y2 = y + 0.5 * h * k1
    k2 = f(y2)
    y3 = y + 0.5 * h * k2
    k3 = f(y3)
    y4 = y + h * k3
    k4 = f(y4)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), (y, y2, y3, y4), k1


def integrate_reduced(sys, s0: ReducedState, t_end: float, dt: float, method="auto",
                      error_estimate=False) -> ReducedTrajectory:
    """Fixed-step RK4 over ``lp_rhs``.

    With ``error_estimate`` a step-doubling estimate of the local error is
    computed at each step and its maximum stored in the metadata.
    """
    m, _ = _dims(sys)
    f = reduced_vector_field(sys, method)
    times = time_grid(t_end, dt)
    y = s0.as_vector()
    Y = np.empty((times.size, y.size))
    dY = np.empty_like(Y)
    Y[0] = y
    est = 0.0
    t_fail = 0.0
    try:
        dY[0] = f(y)
        for n in range(times.size - 1):
            h = times[n + 1] - times[n]
            t_fail = times[n]
            y_new, _, _ = rk4_stages(f, y, h, dY[n])
            if error_estimate:
                y_half, _, _ = rk4_stages(f, y, 0.5 * h, dY[n])
                y_half, _, _ = rk4_stages(f, y_half, 0.5 * h)
                est = max(est, float(np.max(np.abs(y_half - y_new))) / 15.0)
            y = y_new
            t_fail = times[n + 1]
            if not np.all(np.isfinite(y)):
                raise IntegrationError("non-finite reduced state", t_fail)
            Y[n + 1] = y
            dY[n + 1] = f(y)
    except IntegrationError:
        raise
    except LPRError as exc:
        raise IntegrationError(f"{type(exc).__name__}: {exc}", t_fail) from exc
    meta = {"scenario": getattr(sys, "id", ""), "dt": dt, "integrator": "rk4"}
    if error_estimate:
        meta["max_local_error_estimate"] = est
    return ReducedTrajectory(times, Y, dY, m, meta)


def momentum(sys, s: ReducedState, method="auto") -> np.ndarray:
    return gradient(sys.lag, s, method).dl_dw


def energy(sys, s: ReducedState, method="auto") -> float:
    """E = v . dl/dv + w . dl/dw - l."""
    g = gradient(sys.lag, s, method)
    return float(s.v @ g.dl_dv + s.w @ g.dl_dw - sys.lag(s.x, s.v, s.w))


# --- Abelian Routh reduction ---------------------------------------------

@dataclass(frozen=True)
class RouthSystem:
    """Second-order system on (x, v) for an Abelian symmetry at momentum ``mu``.

    Routh's equation ``d/dt dR/dv - dR/dx = -K[a,i,k] v^k mu_a`` is assembled
    from derivatives of the Routhian ``R = l(x, v, rho) - mu . rho`` where
    ``w = rho(x, v)`` solves ``dl/dw = mu``.  On the level set ``dR/dv = l_v``
    and ``dR/dx = l_x``; the Routhian Hessian is the Schur complement of the
    fiber block.
    """

    sys: object
    mu: np.ndarray
    seed: Optional[object] = None
    tol: float = 1e-12
    max_iter: int = 50

    def fiber_velocity(self, x, v) -> np.ndarray:
        """rho(x, v): damped Newton on dl/dw = mu."""
        sys = self.sys
        k = sys.lag.fiber_dim
        if getattr(sys, "routh_inverse", None) is not None:
            return np.asarray(sys.routh_inverse(x, v, self.mu), dtype=float)
        if callable(self.seed):
            w = np.asarray(self.seed(x, v, self.mu), dtype=float)
        elif self.seed is not None:
            w = np.asarray(self.seed, dtype=float)
        else:
            w = np.array(self.mu, dtype=float).reshape(k)
        m = sys.lag.base_dim
        for _ in range(self.max_iter):
            s = ReducedState(x, v, w)
            F = momentum(sys, s) - self.mu
            if np.max(np.abs(F)) <= self.tol * max(1.0, np.max(np.abs(self.mu))):
                return w
            H, _ = velocity_hessian(sys.lag, s)
            step, _ = solve_checked(H[m:, m:], F, block="fiber")
            lam = 1.0
            f0 = np.linalg.norm(F)
            while lam > 1e-4:
                w_try = w - lam * step
                try:
                    f_try = np.linalg.norm(momentum(sys, ReducedState(x, v, w_try)) - self.mu)
                except LPRError:
                    f_try = np.inf
                if f_try < f0 or f_try <= self.tol:
                    break
                lam *= 0.5
            w = w_try
        raise RouthError(f"momentum level set not reached after {self.max_iter} iterations")

    def routhian(self, x, v) -> float:
        w = self.fiber_velocity(x, v)
        return self.sys.lag(x, v, w) - float(self.mu @ w)

    def rhs(self, y) -> np.ndarray:
        sys = self.sys
        m = sys.lag.base_dim
        x, v = y[:m], y[m:]
        w = self.fiber_velocity(x, v)
        s = ReducedState(x, v, w)
        g = gradient(sys.lag, s)
        H, X = velocity_hessian(sys.lag, s)
        Hvv, Hvw, Hww = H[:m, :m], H[:m, m:], H[m:, m:]
        Xv, Xw = X[:, :m], X[:, m:]
        # d rho / dx and d rho / dv from implicit differentiation of l_w = mu
        drho_dx, _ = solve_checked(Hww, -Xw.T, block="fiber")
        drho_dv, _ = solve_checked(Hww, -Hvw.T, block="fiber")
        R_vv = Hvv + Hvw @ drho_dv
        R_vx = Xv.T + Hvw @ drho_dx  # [i, j] = d^2 R / dv^i dx^j
        K = curvature(sys.chart, sys.alg, x)
        force = g.dl_dx - R_vx @ v - np.einsum("aik,k,a->i", K, v, self.mu)
        dv, _ = solve_checked(R_vv, force, block="full")
        return np.concatenate([v, dv])

    def integrate(self, x0, v0, t_end, dt):
        """RK4 on (x, v); returns (times, states[n] = (x, v))."""
        times = time_grid(t_end, dt)
        y = np.concatenate([np.asarray(x0, float), np.asarray(v0, float)])
        out = np.empty((times.size, y.size))
        out[0] = y
        for n in range(times.size - 1):
            y, _, _ = rk4_stages(self.rhs, y, times[n + 1] - times[n])
            out[n + 1] = y
        return times, out


def routh_reduce(sys, mu, seed=None) -> RouthSystem:
    if not sys.alg.is_abelian:
        raise RouthError("Routh reduction implemented for Abelian symmetry groups only")
    mu = np.asarray(mu, dtype=float).reshape(sys.lag.fiber_dim)
    return RouthSystem(sys, mu, seed if seed is not None else getattr(sys, "routh_seed", None))
