"""Horizontal lifts, the reconstruction equation, and a direct full-space oracle.

A full state is (x, g, v, w) in the chart U x G with quasi-velocities taken in
the invariant frame {X_i, Ehat_a}.  Its group velocity is
``g^-1 dg/dt = w - gamma(x) v``.  Reconstruction writes the full curve as
``g(t) h(t)`` with ``h`` a horizontal lift and ``g(0) = e``; differentiating
gives ``g^-1 dg/dt = Ad_h (w - gamma v - h^-1 dh/dt)``, which specializes to

    mechanical connection:   Ad_h (w - b v)     (= A w - B v with B = A b)
    principal connection:    Ad_h w
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import (
    ReducedState,
    ReducedTrajectory,
    lp_rhs,
    reduced_vector_field,
    rk4_stages,
    time_grid,
)
from .errors import GridMismatchError, IntegrationError, LPRError, MembershipError
from .lagrangian import hessian_blocks, mech_connection_coeffs
from .lie_core import GroupRep, adjoint_matrix, group_exp, rkmk4_increment, step_group_ode
from .bundle import upsilon

MECH = "mech"
PRINCIPAL = "principal"
DIRECT = "direct"


@dataclass(frozen=True)
class FullState:
    x: np.ndarray
    g: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("x", "v", "w"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        G = np.array(getattr(self.g, "matrix", self.g), dtype=float)
        G.setflags(write=False)
        object.__setattr__(self, "g", G)

    def reduced(self) -> ReducedState:
        return ReducedState(self.x, self.v, self.w)


@dataclass(frozen=True)
class GroupCurve:
    """Group elements on a time grid with RKMK dense output between nodes."""

    times: np.ndarray
    matrices: np.ndarray
    rep: GroupRep
    generator: Optional[Callable[[float], np.ndarray]] = None

    def __len__(self):
        return self.times.size

    def at(self, t: float) -> np.ndarray:
        n = int(np.searchsorted(self.times, t, side="right") - 1)
        n = min(max(n, 0), self.times.size - 1)
        tau = t - self.times[n]
        if abs(tau) <= 1e-15 * max(1.0, abs(t)):
            return self.matrices[n]
        if tau < 0:
            raise ValueError(f"t={t} precedes the curve start")
        if self.generator is None:
            raise ValueError("curve has no generator for off-grid evaluation")
        return step_group_ode(self.rep, self.matrices[n], self.generator, self.times[n], tau).matrix


@dataclass(frozen=True)
class FullTrajectory:
    times: np.ndarray
    states: np.ndarray          # flattened (x, v, w) per row
    group: np.ndarray           # (N, n, n)
    base_dim: int
    provenance: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.states.shape[0] != self.times.size or self.group.shape[0] != self.times.size:
            raise GridMismatchError("states/group must have one entry per time")

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

    def state(self, n) -> FullState:
        m = self.base_dim
        y = self.states[n]
        return FullState(y[:m], self.group[n], y[m:2 * m], y[2 * m:])


def direct_group_rhs(sys, s) -> np.ndarray:
    """Left-trivialized group velocity ``w - gamma(x) v`` of a full state."""
    if sys.lag.base_dim == 0:
        return np.array(s.w, dtype=float)
    return s.w - sys.chart.coefficients(s.x) @ s.v


def mech_b(sys, s: ReducedState) -> np.ndarray:
    """Invariant mechanical-connection coefficients b (k x m) at a reduced state."""
    return mech_connection_coeffs(hessian_blocks(sys.lag, s)).b


def _gamma(sys, x):
    if sys.lag.base_dim == 0:
        return np.zeros((sys.lag.fiber_dim, 0))
    return sys.chart.coefficients(x)


def _integrate_group(rep, times, g0, lam, label):
    mats = np.empty((times.size, rep.matrix_dim, rep.matrix_dim))
    g = np.asarray(getattr(g0, "matrix", g0), dtype=float)
    if not rep.contains(g):
        raise MembershipError(f"{label}: initial point is not a group element")
    mats[0] = g
    for n in range(times.size - 1):
        try:
            g = step_group_ode(rep, g, lam, times[n], times[n + 1] - times[n]).matrix
        except LPRError as exc:
            raise IntegrationError(f"{label}: {type(exc).__name__}: {exc}", times[n]) from exc
        if not rep.contains(g):
            raise IntegrationError(f"{label}: left the group", times[n + 1])
        mats[n + 1] = g
    return mats


def _lift_generator(sys, rt: ReducedTrajectory, mode):
    m = rt.base_dim

    def lam(t):
        s = rt.state_at(t)
        if m == 0:
            return np.zeros(sys.lag.fiber_dim)
        if mode == MECH:
            return (mech_b(sys, s) - _gamma(sys, s.x)) @ s.v
        return -_gamma(sys, s.x) @ s.v

    return lam


def horizontal_lift_mech(sys, rt: ReducedTrajectory, h0) -> GroupCurve:
    """Group part h(t) of the lift horizontal for the generalized mechanical connection.

    The lift carries fiber quasi-velocity ``b v``, hence
    ``h^-1 dh/dt = (b(s) - gamma(x)) v``.
    """
    lam = _lift_generator(sys, rt, MECH)
    return GroupCurve(rt.times, _integrate_group(sys.rep, rt.times, h0, lam, "mech lift"), sys.rep, lam)


def horizontal_lift_principal(sys, rt: ReducedTrajectory, h0) -> GroupCurve:
    """Lift horizontal for the vertical lift of the principal connection: ``-gamma(x) v``."""
    lam = _lift_generator(sys, rt, PRINCIPAL)
    return GroupCurve(rt.times, _integrate_group(sys.rep, rt.times, h0, lam, "principal lift"), sys.rep, lam)


def reconstruction_generator(sys, rt: ReducedTrajectory, h: GroupCurve, mode):
    if mode not in (MECH, PRINCIPAL):
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    m = rt.base_dim

    def lam(t):
        s = rt.state_at(t)
        A = adjoint_matrix(sys.rep, sys.alg, h.at(t))
        if mode == MECH and m:
            return A @ (s.w - mech_b(sys, s) @ s.v)
        return A @ s.w

    return lam


def reconstruct(sys, rt: ReducedTrajectory, h: GroupCurve, mode=MECH) -> GroupCurve:
    """Solve the reconstruction equation from g(0) = e along the lift ``h``."""
    if h.times.shape != rt.times.shape or np.any(h.times != rt.times):
        raise GridMismatchError("lift and reduced trajectory must share a grid")
    lam = reconstruction_generator(sys, rt, h, mode)
    mats = _integrate_group(sys.rep, rt.times, sys.rep.identity, lam, f"reconstruct[{mode}]")
    return GroupCurve(rt.times, mats, sys.rep, lam)


def compose_full(rt: ReducedTrajectory, g: GroupCurve, h: GroupCurve, provenance="") -> FullTrajectory:
    """Full curve (x, g h, v, w) on the common grid."""
    if not (g.times.shape == h.times.shape == rt.times.shape) or np.any(g.times != rt.times) or np.any(
        h.times != rt.times
    ):
        raise GridMismatchError("reduced trajectory and group curves must share a grid")
    G = np.einsum("nij,njk->nik", g.matrices, h.matrices)
    return FullTrajectory(rt.times.copy(), rt.states.copy(), G, rt.base_dim, provenance, dict(rt.metadata))


def reconstruct_route(sys, rt: ReducedTrajectory, h0, mode=MECH) -> FullTrajectory:
    """Lift, reconstruct and compose in one call."""
    if mode == MECH:
        h = horizontal_lift_mech(sys, rt, h0)
    elif mode == PRINCIPAL:
        h = horizontal_lift_principal(sys, rt, h0)
    else:
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    g = reconstruct(sys, rt, h, mode)
    tag = "mech-connection" if mode == MECH else "principal-connection"
    return compose_full(rt, g, h, tag)


def direct_integrate(sys, s0: FullState, t_end: float, dt: float, method="auto") -> FullTrajectory:
    """Integrate the full Euler-Lagrange flow without any connection.

    The reduced part is stepped with classical RK4 on ``lp_rhs`` (bitwise the
    same arithmetic as ``integrate_reduced``); the group part with RKMK4 whose
    stage generators are evaluated at the RK4 stage states.
    """
    rep = sys.rep
    m = sys.lag.base_dim
    f = reduced_vector_field(sys, method)
    times = time_grid(t_end, dt)
    y = s0.reduced().as_vector()
    g = np.array(s0.g, dtype=float)
    if not rep.contains(g):
        raise MembershipError("direct_integrate: initial group point is not a group element")
    Y = np.empty((times.size, y.size))
    G = np.empty((times.size, rep.matrix_dim, rep.matrix_dim))
    Y[0], G[0] = y, g

    def lam_of(z):
        return direct_group_rhs(sys, ReducedState.from_vector(z, m))

    t_fail = 0.0
    try:
        k1 = f(y)
        for n in range(times.size - 1):
            t_fail = times[n]
            h = times[n + 1] - times[n]
            y_new, stages, _ = rk4_stages(f, y, h, k1)
            theta = rkmk4_increment(rep.alg, [lam_of(z) for z in stages], h)
            g = g @ group_exp(rep, theta).matrix
            y = y_new
            t_fail = times[n + 1]
            if not np.all(np.isfinite(y)) or not rep.contains(g):
                raise IntegrationError("direct integration left the state space", t_fail)
            Y[n + 1], G[n + 1] = y, g
            k1 = f(y)
    except IntegrationError:
        raise
    except LPRError as exc:
        raise IntegrationError(f"{type(exc).__name__}: {exc}", t_fail) from exc
    meta = {"scenario": getattr(sys, "id", ""), "dt": dt, "integrator": "rk4+rkmk4"}
    return FullTrajectory(times, Y, G, m, "direct-oracle", meta)


# --- Diagnostics for the horizontal/vertical split ---------------------------

def vertical_part(sys, s: ReducedState, h) -> np.ndarray:
    """Coefficient ``A(h) (w - b v)`` of the vertical part of the dynamics."""
    A = adjoint_matrix(sys.rep, sys.alg, h)
    if sys.lag.base_dim == 0:
        return A @ s.w
    return A @ (s.w - mech_b(sys, s) @ s.v)


def vertical_lift_coefficient(sys, s: ReducedState) -> np.ndarray:
    """Coefficient of the vertical lifts Ehat_a^V in the mech split: ``Gamma^a + U[a,i,b] v^i w^b``."""
    _, _, dw = lp_rhs(sys, s)
    if sys.lag.base_dim == 0:
        return dw
    U = upsilon(sys.chart, sys.alg, s.x)
    return dw + np.einsum("aib,i,b->a", U, s.v, s.w)


def adjoint_rate_term(sys, s: ReducedState) -> np.ndarray:
    """``U[a,i,b] v^i w^b``, the value of ``w^b dA[c,b]/dt Abar[a,c]`` along any curve."""
    if sys.lag.base_dim == 0:
        return np.zeros(sys.lag.fiber_dim)
    U = upsilon(sys.chart, sys.alg, s.x)
    return np.einsum("aib,i,b->a", U, s.v, s.w)


def route_distance(a: FullTrajectory, b: FullTrajectory) -> dict:
    """Max absolute differences between two full trajectories on a common grid."""
    if a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times), initial=0.0) > 0:
        raise GridMismatchError("trajectories must share a grid")
    return {
        "reduced": float(np.max(np.abs(a.states - b.states), initial=0.0)),
        "group": float(np.max(np.abs(a.group - b.group), initial=0.0)),
    }
