"""Reduced Lagrangians l(x, v, w), derivative engine, Hessian blocks, mechanical connection.

Velocity-space second derivatives are ordered ``u = (v, w)`` internally.  The
matrix views ``HessianBlocks.matrix`` and ``tilde_basis_hessian`` put the fiber
block first, ``(w, v)``, matching the published layout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import DimensionError, DomainError, SingularHessianError


COND_WARN = 1e8
COND_FAIL = 1e14


@dataclass(frozen=True)
class ReducedLagrangian:
    """A function l(x, v, w) on TM/G with optional analytic derivatives.

    ``grad(x, v, w)`` returns ``(l_x, l_v, l_w)``.  ``hess(x, v, w)`` returns
    ``(H, X)`` with ``H`` the (m+k) x (m+k) Hessian in ``u = (v, w)`` and
    ``X[j, :] = d^2 l / dx^j du``.  ``domain(x, v, w)`` must be True on the open
    set where l is defined.
    """

    value: Callable
    base_dim: int
    fiber_dim: int
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    domain: Optional[Callable] = None
    domain_text: str = ""

    def check_domain(self, x, v, w):
        if self.domain is not None and not self.domain(x, v, w):
            raise DomainError(
                f"state outside Lagrangian domain ({self.domain_text or 'guard failed'}): "
                f"x={x}, v={v}, w={w}"
            )

    def __call__(self, x, v, w) -> float:
        self.check_domain(x, v, w)
        return float(self.value(x, v, w))

    def fd_only(self) -> "ReducedLagrangian":
        """Same function with the analytic derivatives removed."""
        return replace(self, grad=None, hess=None)


class Gradient(NamedTuple):
    dl_dx: np.ndarray
    dl_dv: np.ndarray
    dl_dw: np.ndarray


def _unpack(lag: ReducedLagrangian, s):
    x = np.asarray(s.x, dtype=float)
    v = np.asarray(s.v, dtype=float)
    w = np.asarray(s.w, dtype=float)
    m, k = lag.base_dim, lag.fiber_dim
    if x.shape != (m,) or v.shape != (m,) or w.shape != (k,):
        raise DimensionError(
            f"state shapes {x.shape}, {v.shape}, {w.shape} do not match m={m}, k={k}"
        )
    lag.check_domain(x, v, w)
    return x, v, w


def _step(c, rel):
    return rel * max(1.0, abs(c))


def _fd_grad(f, z, rel=1e-6):
    """4th-order central differences."""
    g = np.empty_like(z)
    for i in range(z.size):
        h = _step(z[i], rel)
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (-f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)) / (12 * h)
    return g


def _fd_hess(f, z, rel=1e-4):
    """2nd-order central second differences, symmetric by construction."""
    n = z.size
    H = np.empty((n, n))
    f0 = f(z)
    steps = [_step(c, rel) for c in z]
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        H[i, i] = (f(z + ei) - 2 * f0 + f(z - ei)) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            val = (f(z + ei + ej) - f(z + ei - ej) - f(z - ei + ej) + f(z - ei - ej)) / (
                4 * steps[i] * steps[j]
            )
            H[i, j] = H[j, i] = val
    return H


def _use_analytic(method, available):
    if method == "analytic":
        if not available:
            raise ValueError("analytic derivatives requested but not supplied")
        return True
    if method == "fd":
        return False
    return available


def gradient(lag: ReducedLagrangian, s, method="auto") -> Gradient:
    """Partial derivatives (dl/dx, dl/dv, dl/dw) at a reduced state."""
    x, v, w = _unpack(lag, s)
    if _use_analytic(method, lag.grad is not None):
        lx, lv, lw = lag.grad(x, v, w)
        return Gradient(np.asarray(lx, float), np.asarray(lv, float), np.asarray(lw, float))
    m = lag.base_dim
    z = np.concatenate([x, v, w])
    g = _fd_grad(lambda z: lag.value(z[:m], z[m:2 * m], z[2 * m:]), z)
    return Gradient(g[:m], g[m:2 * m], g[2 * m:])


def velocity_hessian(lag: ReducedLagrangian, s, method="auto"):
    """Second derivatives in u = (v, w) and mixed ``X[j, :] = d^2 l / dx^j du``."""
    x, v, w = _unpack(lag, s)
    m = lag.base_dim
    if _use_analytic(method, lag.hess is not None):
        H, X = lag.hess(x, v, w)
        H = np.asarray(H, float)
        return H, np.asarray(X, float).reshape(m, H.shape[0])
    u0 = np.concatenate([v, w])
    H = _fd_hess(lambda u: lag.value(x, u[:m], u[m:]), u0)
    X = np.empty((m, u0.size))
    if lag.grad is not None and method != "fd":
        # differentiate the analytic gradient once
        def gu(xx):
            _, lv, lw = lag.grad(xx, v, w)
            return np.concatenate([lv, lw])

        for j in range(m):
            h = _step(x[j], 1e-6)
            e = np.zeros(m)
            e[j] = h
            X[j] = (-gu(x + 2 * e) + 8 * gu(x + e) - 8 * gu(x - e) + gu(x - 2 * e)) / (12 * h)
    elif m:
        z0 = np.concatenate([x, u0])
        full = _fd_hess(lambda z: lag.value(z[:m], z[m:2 * m], z[2 * m:]), z0)
        X = full[:m, m:]
    return H, X


@dataclass(frozen=True)
class HessianBlocks:
    """Invariant-basis Hessian of l in the velocity variables.

    ``g_ww`` (k x k), ``g_wv`` (k x m, entry [a, i] = d^2 l / dw^a dv^i) and
    ``g_vv`` (m x m).
    """

    g_ww: np.ndarray
    g_wv: np.ndarray
    g_vv: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """Full symmetric matrix in the ordering (w, v)."""
        return np.block([[self.g_ww, self.g_wv], [self.g_wv.T, self.g_vv]])

    @property
    def uu(self) -> np.ndarray:
        """Full symmetric matrix in the ordering (v, w)."""
        return np.block([[self.g_vv, self.g_wv.T], [self.g_wv, self.g_ww]])

    def cond(self) -> float:
        return _cond(self.matrix)

    def fiber_cond(self) -> float:
        return _cond(self.g_ww)


def _cond(M):
    if M.size == 0:
        return 1.0
    with np.errstate(all="ignore"):
        c = np.linalg.cond(M)
    return float(c) if np.isfinite(c) else float("inf")


def hessian_blocks(lag: ReducedLagrangian, s, method="auto", check=True) -> HessianBlocks:
    H, _ = velocity_hessian(lag, s, method)
    m = lag.base_dim
    blocks = HessianBlocks(g_ww=H[m:, m:], g_wv=H[m:, :m], g_vv=H[:m, :m])
    if check:
        c = blocks.cond()
        if c > COND_FAIL:
            raise SingularHessianError(f"Hessian singular (cond={c:.3e})", "full", c)
    return blocks


def solve_checked(M, rhs, block="full"):
    """LU solve with a condition-number guard; warns above 1e8, fails above 1e14."""
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if M.size == 0:
        return np.zeros_like(rhs), 1.0
    c = _cond(M)
    if c > COND_FAIL:
        raise SingularHessianError(f"{block} Hessian singular (cond={c:.3e})", block, c)
    if c > COND_WARN:
        warnings.warn(f"{block} Hessian ill-conditioned (cond={c:.3e})", RuntimeWarning, stacklevel=2)
    lu = scipy.linalg.lu_factor(M, check_finite=True)
    return scipy.linalg.lu_solve(lu, rhs), c


def tilde_basis_hessian(blocks: HessianBlocks, A) -> np.ndarray:
    """Hessian components in the basis {Etilde_a, X_i}, ordered (w, v).

    Etilde_a = Abar[b, a] Ehat_b with Abar = A^-1, a congruence transform of
    the fiber rows and columns.
    """
    A = np.asarray(A, dtype=float)
    k = blocks.g_ww.shape[0]
    if A.shape != (k, k):
        raise DimensionError(f"A must be {k} x {k}")
    if _cond(A) > COND_FAIL:
        raise SingularHessianError("Ad-matrix is singular", "adjoint", _cond(A))
    Abar = np.linalg.inv(A)
    m = blocks.g_vv.shape[0]
    T = np.eye(k + m)
    T[:k, :k] = Abar
    return T.T @ blocks.matrix @ T


@dataclass(frozen=True)
class MechCoeffs:
    """Mechanical-connection coefficients ``b[a, i]`` in the invariant basis.

    The horizontal lift of d/dx^i is ``X_i + b[a, i] Ehat_a``; in the
    fundamental basis the coefficients are ``B = A @ b``.
    """

    b: np.ndarray
    cond: float = 1.0

    def tilde(self, A) -> np.ndarray:
        return np.asarray(A, dtype=float) @ self.b


def mech_connection_coeffs(blocks: HessianBlocks) -> MechCoeffs:
    """Solve ``g_ww b = -g_wv``."""
    b, c = solve_checked(blocks.g_ww, -blocks.g_wv, block="fiber")
    return MechCoeffs(b=np.asarray(b).reshape(blocks.g_wv.shape), cond=c)
