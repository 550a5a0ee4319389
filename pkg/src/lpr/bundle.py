"""Local trivialization U x G with principal-connection coefficients.

The horizontal frame is ``X_i = d/dx^i - gamma[a, i](x) Ehat_a`` where
``Ehat_a`` are the left-invariant fiber fields.  Array layouts:

    gamma[a, i]         connection coefficients (k x m)
    dgamma[a, i, j]     d gamma[a, i] / d x^j
    upsilon[b, i, a]    [X_i, Ehat_a] = upsilon[b, i, a] Ehat_b
    curvature[a, i, j]  [X_i, X_j]    = K[a, i, j] Ehat_a
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError
from .lie_core import GroupRep, LieAlgebraSpec


@dataclass(frozen=True)
class BundleChart:
    """Connection coefficients over a chart of the base.

    ``gamma`` takes base coordinates only, so the coefficients are invariant
    by construction.  Without ``dgamma`` derivatives come from central
    differences.
    """

    base_dim: int
    fiber_dim: int
    gamma: Callable[[np.ndarray], np.ndarray]
    dgamma: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def coefficients(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.base_dim,):
            raise DimensionError(f"x must have shape ({self.base_dim},), got {x.shape}")
        G = np.asarray(self.gamma(x), dtype=float).reshape(self.fiber_dim, self.base_dim)
        return G

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dgamma is not None:
            return np.asarray(self.dgamma(x), dtype=float).reshape(
                self.fiber_dim, self.base_dim, self.base_dim
            )
        return fd_connection_derivative(self, x)

    def without_derivative(self) -> "BundleChart":
        return BundleChart(self.base_dim, self.fiber_dim, self.gamma, None, self.name)


def trivial_chart(m: int, k: int) -> BundleChart:
    """Product bundle with the flat connection gamma = 0."""
    return BundleChart(
        m, k,
        lambda x: np.zeros((k, m)),
        lambda x: np.zeros((k, m, m)),
        name="trivial",
    )


def fd_connection_derivative(chart: BundleChart, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    m, k = chart.base_dim, chart.fiber_dim
    D = np.empty((k, m, m))
    for j in range(m):
        h = max(1e-6, 1e-6 * abs(x[j]))
        e = np.zeros(m)
        e[j] = h
        D[:, :, j] = (chart.coefficients(x + e) - chart.coefficients(x - e)) / (2 * h)
    return D


def upsilon(chart: BundleChart, alg: LieAlgebraSpec, x) -> np.ndarray:
    """``upsilon[b, i, a] = -gamma[c, i] C[b, c, a]``."""
    G = chart.coefficients(x)
    return -np.einsum("ci,bca->bia", G, alg.structure_constants)


def curvature(chart: BundleChart, alg: LieAlgebraSpec, x) -> np.ndarray:
    """``K[a,i,j] = d_j gamma[a,i] - d_i gamma[a,j] + C[a,b,c] gamma[b,i] gamma[c,j]``.

    Expanding ``[d_i - gamma_i^b Ehat_b, d_j - gamma_j^c Ehat_c]`` term by term.
    """
    G = chart.coefficients(x)
    D = chart.derivative(x)
    return D - D.transpose(0, 2, 1) + np.einsum("abc,bi,cj->aij", alg.structure_constants, G, G)


# --- Brute-force bracket oracle --------------------------------------------

def _horizontal_field(chart: BundleChart, rep: GroupRep, i: int):
    m = chart.base_dim

    def X(x, M):
        dx = np.zeros(m)
        dx[i] = 1.0
        gam = chart.coefficients(x)[:, i]
        return dx, -(M @ rep.embed(gam))

    return X


def curvature_bracket_oracle(chart: BundleChart, rep: GroupRep, x, g=None, eps=1e-5) -> np.ndarray:
    """Curvature from finite-difference commutators of the horizontal fields.

    The fields ``X_i`` are extended to the ambient space R^m x R^(n x n) by
    the formula ``(e_i, -M rho(gamma_i))``; their Lie bracket at (x, g) is
    built from central directional differences and then expanded in the
    left-invariant frame ``M rho(E_a)``.  Uses nothing from ``curvature``.
    """
    x = np.asarray(x, dtype=float)
    M0 = rep.identity if g is None else np.asarray(getattr(g, "matrix", g), dtype=float)
    m = chart.base_dim
    fields = [_horizontal_field(chart, rep, i) for i in range(m)]
    M0inv = np.linalg.inv(M0)

    def directional(Y, Z):
        zx, zM = Z(x, M0)
        px, pM = Y(x + eps * zx, M0 + eps * zM)
        mx, mM = Y(x - eps * zx, M0 - eps * zM)
        return (px - mx) / (2 * eps), (pM - mM) / (2 * eps)

    K = np.zeros((rep.alg.dim, m, m))
    for i in range(m):
        for j in range(i + 1, m):
            ax, aM = directional(fields[j], fields[i])
            bx, bM = directional(fields[i], fields[j])
            bracket_M = aM - bM
            coeffs = rep.coords(M0inv @ bracket_M, check=False)
            K[:, i, j] = coeffs
            K[:, j, i] = -coeffs
    return K


def upsilon_bracket_oracle(chart: BundleChart, rep: GroupRep, x, g=None, eps=1e-5) -> np.ndarray:
    """Upsilon from finite-difference commutators ``[X_i, Ehat_a]``."""
    x = np.asarray(x, dtype=float)
    M0 = rep.identity if g is None else np.asarray(getattr(g, "matrix", g), dtype=float)
    m, k = chart.base_dim, rep.alg.dim
    M0inv = np.linalg.inv(M0)
    U = np.zeros((k, m, k))
    for i in range(m):
        X = _horizontal_field(chart, rep, i)
        for a in range(k):
            Ea = rep.basis[a]

            def E(xx, M):
                return np.zeros(m), M @ Ea

            # [X, E] = DE.X - DX.E
            zx, zM = X(x, M0)
            dE = ((M0 + eps * zM) @ Ea - (M0 - eps * zM) @ Ea) / (2 * eps)
            ex, eM = E(x, M0)
            _, pM = X(x + eps * ex, M0 + eps * eM)
            _, mM = X(x - eps * ex, M0 - eps * eM)
            dX = (pM - mM) / (2 * eps)
            U[:, i, a] = rep.coords(M0inv @ (dE - dX), check=False)
    return U
