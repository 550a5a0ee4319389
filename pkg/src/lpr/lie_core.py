"""Matrix Lie algebras and groups: brackets, exponential, Ad-matrix, RKMK4 stepping.

Conventions
-----------
* ``C[c, a, b]`` holds the structure constants of the algebra,
  ``[E_a, E_b] = C^c_ab E_c``.  These are also the structure constants of the
  left-invariant fields; fundamental fields of the left action carry the
  opposite sign.
* The Maurer-Cartan form is left-trivialized: ``g^{-1} dg/dt = rho(lambda)``.
* ``adjoint_matrix(g)[b, a]`` is the coefficient of ``E_b`` in ``Ad_g E_a``,
  i.e. the ordinary matrix of the linear map ``Ad_g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import (
    AdjointExpansionError,
    DimensionError,
    LieAlgebraError,
    MembershipError,
)

DEFAULT_MEMBERSHIP_TOL = 1e-9
ADJOINT_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class LieAlgebraSpec:
    """Structure constants ``C[c, a, b]`` of a k-dimensional real Lie algebra.

    Antisymmetry and the Jacobi identity are checked on construction.
    """

    structure_constants: np.ndarray
    name: str = ""
    tol: float = 1e-10

    def __post_init__(self):
        C = np.array(self.structure_constants, dtype=float)
        if C.ndim != 3 or not (C.shape[0] == C.shape[1] == C.shape[2]):
            raise LieAlgebraError(f"structure constants must be k x k x k, got {C.shape}")
        C.setflags(write=False)
        object.__setattr__(self, "structure_constants", C)
        anti = np.max(np.abs(C + C.transpose(0, 2, 1)), initial=0.0)
        if anti > self.tol:
            raise LieAlgebraError(f"structure constants not antisymmetric (defect {anti:.3e})")
        jac = jacobi_defect(C)
        if jac > self.tol:
            raise LieAlgebraError(f"Jacobi identity violated (defect {jac:.3e})")

    @property
    def dim(self) -> int:
        return self.structure_constants.shape[0]

    @property
    def is_abelian(self) -> bool:
        return not np.any(self.structure_constants)

    def bracket(self, xi, eta):
        return bracket(self, xi, eta)

    def ad(self, xi):
        return ad_matrix(self, xi)


def jacobi_defect(C) -> float:
    """Max over (a,b,c,d) of the cyclic Jacobi sum."""
    C = np.asarray(C, dtype=float)
    # T[d,a,b,c] = sum_e C^e_ab C^d_ec
    T = np.einsum("eab,dec->dabc", C, C)
    cyc = T + T.transpose(0, 2, 3, 1) + T.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(cyc), initial=0.0))


def _vec(alg: LieAlgebraSpec, xi, name="vector"):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (alg.dim,):
        raise DimensionError(f"{name} must have shape ({alg.dim},), got {xi.shape}")
    return xi


def bracket(alg: LieAlgebraSpec, xi, eta):
    """``[xi, eta]^c = C^c_ab xi^a eta^b``."""
    xi = _vec(alg, xi, "xi")
    eta = _vec(alg, eta, "eta")
    return np.einsum("cab,a,b->c", alg.structure_constants, xi, eta)


def ad_matrix(alg: LieAlgebraSpec, xi):
    """Matrix of ``ad_xi``: ``ad[c, b] = C^c_ab xi^a``."""
    xi = _vec(alg, xi, "xi")
    return np.einsum("cab,a->cb", alg.structure_constants, xi)


def structure_constants_from_basis(basis) -> np.ndarray:
    """Structure constants of the matrix algebra spanned by ``basis`` (k x n x n)."""
    basis = np.asarray(basis, dtype=float)
    k = basis.shape[0]
    flat = basis.reshape(k, -1).T
    C = np.zeros((k, k, k))
    for a in range(k):
        for b in range(k):
            comm = basis[a] @ basis[b] - basis[b] @ basis[a]
            coeffs, *_ = np.linalg.lstsq(flat, comm.ravel(), rcond=None)
            C[:, a, b] = coeffs
    return C


@dataclass(frozen=True)
class GroupElement:
    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.matrix @ other.matrix)

    def inverse(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.matrix))


@dataclass(frozen=True)
class GroupRep:
    """Faithful matrix representation of a connected Lie group.

    ``basis[a]`` is the n x n matrix rho(E_a).  ``membership(M, tol)`` decides
    whether ``M`` lies in the image of the group.  ``exp`` and ``adjoint`` are
    optional closed forms taking algebra coordinates / matrices respectively.
    """

    alg: LieAlgebraSpec
    basis: np.ndarray
    membership: Callable[[np.ndarray, float], bool]
    exp: Optional[Callable[[np.ndarray], np.ndarray]] = None
    adjoint: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    tol: float = DEFAULT_MEMBERSHIP_TOL
    _pinv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        B = np.array(self.basis, dtype=float)
        if B.ndim != 3 or B.shape[1] != B.shape[2] or B.shape[0] != self.alg.dim:
            raise DimensionError(
                f"basis must be {self.alg.dim} x n x n, got {B.shape}"
            )
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)
        flat = B.reshape(B.shape[0], -1).T
        if np.linalg.matrix_rank(flat) < B.shape[0]:
            raise DimensionError("representation basis is linearly dependent")
        object.__setattr__(self, "_pinv", np.linalg.pinv(flat))

    @property
    def matrix_dim(self) -> int:
        return self.basis.shape[1]

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.matrix_dim)

    def embed(self, xi) -> np.ndarray:
        xi = _vec(self.alg, xi, "xi")
        return np.tensordot(xi, self.basis, axes=1)

    def coords(self, X, check=True) -> np.ndarray:
        """Least-squares expansion of an algebra matrix in the basis rho(E_b)."""
        X = np.asarray(X, dtype=float)
        xi = self._pinv @ X.ravel()
        if check:
            resid = np.linalg.norm(self.embed(xi) - X)
            scale = max(1.0, np.linalg.norm(X))
            if resid > ADJOINT_RESIDUAL_TOL * scale:
                raise AdjointExpansionError(
                    f"matrix not in the span of the algebra basis (residual {resid:.3e})"
                )
        return xi

    def contains(self, M, tol=None) -> bool:
        M = np.asarray(M, dtype=float)
        if M.shape != (self.matrix_dim, self.matrix_dim) or not np.all(np.isfinite(M)):
            return False
        return bool(self.membership(M, self.tol if tol is None else tol))

    def element(self, M) -> GroupElement:
        """Validated construction of a group element."""
        if isinstance(M, GroupElement):
            M = M.matrix
        if not self.contains(M):
            raise MembershipError(f"matrix is not in group {self.name or '?'}")
        return GroupElement(M)


def _mat(g):
    return g.matrix if isinstance(g, GroupElement) else np.asarray(g, dtype=float)


def group_exp(rep: GroupRep, xi) -> GroupElement:
    """exp(rho(xi)); closed form if the representation registers one."""
    xi = _vec(rep.alg, xi, "xi")
    if rep.exp is not None:
        return GroupElement(rep.exp(xi))
    return GroupElement(scipy.linalg.expm(rep.embed(xi)))


def adjoint_matrix(rep: GroupRep, alg: LieAlgebraSpec, g) -> np.ndarray:
    """Matrix of Ad_g in the basis {E_a}: ``A[b, a]`` is the E_b-component of g E_a g^-1."""
    G = _mat(g)
    if not rep.contains(G):
        raise MembershipError("adjoint_matrix: argument is not a group element")
    if rep.adjoint is not None:
        return np.asarray(rep.adjoint(G), dtype=float)
    Ginv = np.linalg.inv(G)
    k = alg.dim
    A = np.empty((k, k))
    for a in range(k):
        A[:, a] = rep.coords(G @ rep.basis[a] @ Ginv)
    return A


def _dexpinv(alg: LieAlgebraSpec, theta, lam):
    # Inverse right-trivialized derivative of exp, truncated at order 2 in theta;
    # sufficient for a 4th-order RKMK scheme.
    t_l = bracket(alg, theta, lam)
    return lam + 0.5 * t_l + bracket(alg, theta, t_l) / 12.0


def rkmk4_increment(alg: LieAlgebraSpec, stage_lambdas, dt) -> np.ndarray:
    """Algebra increment Theta with g_new = g exp(Theta) for g^-1 dg/dt = lambda.

    ``stage_lambdas`` are the four classical RK4 stage values of lambda
    (at t, t+dt/2, t+dt/2, t+dt), which lets coupled integrators pass stage
    values that depend on their own stage states.
    """
    l1, l2, l3, l4 = (np.asarray(s, dtype=float) for s in stage_lambdas)
    k1 = l1
    k2 = _dexpinv(alg, 0.5 * dt * k1, l2)
    k3 = _dexpinv(alg, 0.5 * dt * k2, l3)
    k4 = _dexpinv(alg, dt * k3, l4)
    return dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_group_ode(rep: GroupRep, g, lam: Callable[[float], np.ndarray], t: float, dt: float) -> GroupElement:
    """One RKMK4 step of ``g^-1 dg/dt = rho(lam(t))`` from ``t`` to ``t + dt``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    G = _mat(g)
    if not rep.contains(G):
        raise MembershipError("step_group_ode: starting point is not a group element")
    lmid = lam(t + 0.5 * dt)
    theta = rkmk4_increment(rep.alg, (lam(t), lmid, lmid, lam(t + dt)), dt)
    return GroupElement(G @ group_exp(rep, theta).matrix)


# --- Concrete groups -------------------------------------------------------

def _affine_membership(M, tol):
    return abs(M[1, 0]) <= tol and abs(M[1, 1] - 1.0) <= tol and M[0, 0] > 0.0


def _affine_exp(xi):
    a, b = xi
    ea = np.exp(a)
    # (e^a - 1)/a, continuous at a = 0
    phi1 = np.expm1(a) / a if abs(a) > 1e-12 else 1.0 + 0.5 * a
    return np.array([[ea, b * phi1], [0.0, 1.0]])


def _affine_adjoint(M):
    return np.array([[1.0, 0.0], [-M[0, 1], M[0, 0]]])


def affine_algebra() -> LieAlgebraSpec:
    """Algebra of the affine line, ``[E1, E2] = E2``."""
    C = np.zeros((2, 2, 2))
    C[1, 0, 1] = 1.0
    C[1, 1, 0] = -1.0
    return LieAlgebraSpec(C, name="aff(1)")


def affine_group(closed_forms=True) -> GroupRep:
    """Affine maps t -> exp(theta) t + phi as matrices [[e^theta, phi], [0, 1]]."""
    basis = np.array([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 1.0], [0.0, 0.0]]])
    return GroupRep(
        affine_algebra(),
        basis,
        _affine_membership,
        exp=_affine_exp if closed_forms else None,
        adjoint=_affine_adjoint if closed_forms else None,
        name="Aff(1)",
    )


def affine_element(theta, phi) -> GroupElement:
    return GroupElement(np.array([[np.exp(theta), phi], [0.0, 1.0]]))


def affine_coords(g):
    """(theta, phi) of an affine group matrix."""
    M = _mat(g)
    return float(np.log(M[0, 0])), float(M[0, 1])


def hat(w):
    w = np.asarray(w, dtype=float)
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def so3_algebra() -> LieAlgebraSpec:
    C = np.zeros((3, 3, 3))
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        C[c, a, b] = 1.0
        C[c, b, a] = -1.0
    return LieAlgebraSpec(C, name="so(3)")


def _so3_membership(M, tol):
    return np.max(np.abs(M.T @ M - np.eye(3))) <= tol and abs(np.linalg.det(M) - 1.0) <= tol


def _rodrigues(w):
    th2 = float(w @ w)
    W = hat(w)
    if th2 < 1e-8:
        a = 1.0 - th2 / 6.0 + th2 * th2 / 120.0
        b = 0.5 - th2 / 24.0 + th2 * th2 / 720.0
    else:
        th = np.sqrt(th2)
        a = np.sin(th) / th
        b = (1.0 - np.cos(th)) / th2
    return np.eye(3) + a * W + b * (W @ W)


def so3_group(closed_forms=True) -> GroupRep:
    """Rotation matrices; basis rho(e_a) = hat(e_a), so Ad_R = R."""
    basis = np.array([hat(e) for e in np.eye(3)])
    return GroupRep(
        so3_algebra(),
        basis,
        _so3_membership,
        exp=_rodrigues if closed_forms else None,
        adjoint=(lambda R: np.array(R)) if closed_forms else None,
        name="SO(3)",
    )


def _translation_membership(M, tol):
    n = M.shape[0]
    return np.max(np.abs(M[:, : n - 1] - np.eye(n)[:, : n - 1])) <= tol and abs(M[n - 1, n - 1] - 1.0) <= tol


def translation_group(k=1) -> GroupRep:
    """Abelian group R^k as unipotent (k+1)x(k+1) matrices [[I, t], [0, 1]]."""
    n = k + 1
    basis = np.zeros((k, n, n))
    for a in range(k):
        basis[a, a, n - 1] = 1.0

    def _exp(xi):
        M = np.eye(n)
        M[:k, n - 1] = xi
        return M

    return GroupRep(
        LieAlgebraSpec(np.zeros((k, k, k)), name=f"R^{k}"),
        basis,
        _translation_membership,
        exp=_exp,
        adjoint=lambda M: np.eye(k),
        name=f"R^{k}",
    )
