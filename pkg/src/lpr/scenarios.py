"""Built-in systems with their initial-condition conventions and reference solutions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .bundle import BundleChart, trivial_chart
from .errors import ConfigError, LieAlgebraError
from .lagrangian import ReducedLagrangian
from .lie_core import (
    GroupRep,
    LieAlgebraSpec,
    affine_element,
    affine_group,
    so3_group,
    translation_group,
)
from .dynamics import ReducedState
from .reconstruction import FullState


@dataclass(frozen=True)
class System:
    """A reduced Lagrangian system on a trivialized bundle U x G.

    ``initial_state(ics)`` maps named initial values to a FullState and
    ``closed_form(ics, t)`` (when known) returns the exact FullState at t.
    """

    id: str
    rep: GroupRep
    chart: BundleChart
    lag: ReducedLagrangian
    params: dict = field(default_factory=dict)
    default_ics: dict = field(default_factory=dict)
    initial_state_fn: Optional[Callable[[dict], FullState]] = None
    closed_form_fn: Optional[Callable[[dict, float], FullState]] = None
    routh_inverse: Optional[Callable] = None
    sample_fn: Optional[Callable] = None
    description: str = ""

    @property
    def alg(self) -> LieAlgebraSpec:
        return self.rep.alg

    @property
    def ic_names(self):
        return tuple(self.default_ics)

    def ics(self, overrides=None) -> dict:
        merged = dict(self.default_ics)
        for key, val in (overrides or {}).items():
            if key not in merged:
                raise ConfigError(
                    f"unknown initial value {key!r} for scenario {self.id!r}; "
                    f"expected one of {', '.join(self.default_ics)}"
                )
            merged[key] = float(val)
        return merged

    def initial_state(self, overrides=None) -> FullState:
        return self.initial_state_fn(self.ics(overrides))

    def sample_state(self, rng):
        """Random reduced state inside the domain, for property checks."""
        if self.sample_fn is not None:
            return self.sample_fn(rng)
        m, k = self.lag.base_dim, self.lag.fiber_dim
        return ReducedState(rng.normal(size=m), rng.normal(size=m), rng.normal(size=k))

    @property
    def has_closed_form(self) -> bool:
        return self.closed_form_fn is not None

    def closed_form(self, t, overrides=None) -> FullState:
        if self.closed_form_fn is None:
            raise NotImplementedError(f"scenario {self.id!r} has no closed form")
        return self.closed_form_fn(self.ics(overrides), float(t))


# --- Affine line ---------------------------------------------------------------

AFFINE_DEFAULT_ICS = {"x0": 0.0, "dx0": 1.0, "theta0": 0.0, "dtheta0": 0.0, "phi0": 1.0, "dphi0": 1.0}


def affine_lagrangian(q: float) -> ReducedLagrangian:
    """l = w1^2/2 + q xdot w1 + xdot^2/2 + ln(w2) on w2 > 0."""

    def value(x, v, w):
        return 0.5 * w[0] ** 2 + q * v[0] * w[0] + 0.5 * v[0] ** 2 + np.log(w[1])

    def grad(x, v, w):
        return (
            np.zeros(1),
            np.array([q * w[0] + v[0]]),
            np.array([w[0] + q * v[0], 1.0 / w[1]]),
        )

    def hess(x, v, w):
        H = np.array([[1.0, q, 0.0], [q, 1.0, 0.0], [0.0, 0.0, -1.0 / w[1] ** 2]])
        return H, np.zeros((1, 3))

    return ReducedLagrangian(
        value, 1, 2, grad, hess,
        domain=lambda x, v, w: w[1] > 0.0,
        domain_text="w2 > 0",
    )


def affine_closed_form(q: float, ics: dict, t: float) -> FullState:
    r = q * q - 1.0
    x = -0.5 * q * t * t / r + ics["dx0"] * t + ics["x0"]
    dx = -q * t / r + ics["dx0"]
    theta = 0.5 * t * t / r + ics["dtheta0"] * t + ics["theta0"]
    dtheta = t / r + ics["dtheta0"]
    phi = ics["dphi0"] * t + ics["phi0"]
    w2 = ics["dphi0"] * np.exp(-theta)
    return FullState([x], affine_element(theta, phi).matrix, [dx], [dtheta, w2])


def affine_reference(q: float, ics: dict, t: float) -> dict:
    """Closed-form intermediates of both reconstruction routes on the affine group.

    Keys: ``mech_theta_h``, ``mech_phi_h``, ``mech_theta_1``, ``mech_phi_1``,
    ``principal_theta_h``, ``principal_phi_h``, ``principal_theta_1``,
    ``principal_phi_1``, ``w1``, ``w2``, ``x``.
    """
    r = q * q - 1.0
    x0, dx0 = ics["x0"], ics["dx0"]
    th0, dth0 = ics["theta0"], ics["dtheta0"]
    ph0, dph0 = ics["phi0"], ics["dphi0"]
    x = -0.5 * q * t * t / r + dx0 * t + x0
    mech_theta_1 = -0.5 * t * t + (q * dx0 + dth0) * t
    princ_theta_1 = 0.5 * t * t / r + dth0 * t
    return {
        "x": x,
        "w1": t / r + dth0,
        "w2": dph0 * np.exp(-th0 - (0.5 * t * t - dth0 * t + dth0 * q * q * t) / r),
        "mech_theta_h": -q * x + q * x0 + th0,
        "mech_phi_h": ph0,
        "mech_theta_1": mech_theta_1,
        "mech_phi_1": dph0 * t + ph0 * (1.0 - np.exp(0.5 * (2 * q * dx0 - t + 2 * dth0) * t)),
        "principal_theta_h": th0,
        "principal_phi_h": ph0,
        "principal_theta_1": princ_theta_1,
        "principal_phi_1": ph0 * (1.0 - np.exp(0.5 * (t * t - 2 * dth0 * t + 2 * dth0 * q * q * t) / r))
        + dph0 * t,
    }


def affine_scenario(q: float = 2.0) -> System:
    """Affine-line group acting on G x R with the trivial connection.

    Initial values: ``x0, dx0, theta0, dtheta0, phi0, dphi0`` (dphi0 > 0).
    """
    q = float(q)
    if abs(q * q - 1.0) < 1e-12:
        raise ConfigError("affine scenario is singular for q^2 = 1")

    def initial(ics):
        if ics["dphi0"] <= 0:
            raise ConfigError("affine scenario requires dphi0 > 0")
        return FullState(
            [ics["x0"]],
            affine_element(ics["theta0"], ics["phi0"]).matrix,
            [ics["dx0"]],
            [ics["dtheta0"], np.exp(-ics["theta0"]) * ics["dphi0"]],
        )

    return System(
        id="affine",
        rep=affine_group(),
        chart=trivial_chart(1, 2),
        lag=affine_lagrangian(q),
        params={"q": q},
        default_ics=dict(AFFINE_DEFAULT_ICS),
        initial_state_fn=initial,
        closed_form_fn=lambda ics, t: affine_closed_form(q, ics, t),
        sample_fn=lambda rng: ReducedState(
            rng.normal(size=1), rng.normal(size=1), [rng.normal(), np.exp(rng.uniform(-1.0, 1.0))]
        ),
        description="affine group of the line, l = w1^2/2 + q xdot w1 + xdot^2/2 + ln w2",
    )


# --- Kaluza-Klein particle ----------------------------------------------------

def uniform_field(B: float):
    """Vector potential A = (-B y/2, B x/2, 0) of a uniform field B e_z, with dA[i, j] = dA_i/dx^j."""

    def A(x):
        return np.array([-0.5 * B * x[1], 0.5 * B * x[0], 0.0])

    def dA(x):
        D = np.zeros((3, 3))
        D[0, 1] = -0.5 * B
        D[1, 0] = 0.5 * B
        return D

    return A, dA


def _translation(theta):
    return np.array([[1.0, theta], [0.0, 1.0]])


def larmor_closed_form(B: float, ics: dict, t: float) -> FullState:
    """Exact motion of unit mass, charge w in the uniform field B e_z.

    Reduced equations: xddot = w B ydot, yddot = -w B xdot, zddot = 0;
    fiber coordinate from dtheta/dt = w - A(x) . xdot.
    """
    x0 = np.array([ics["x1"], ics["x2"], ics["x3"]])
    v0 = np.array([ics["dx1"], ics["dx2"], ics["dx3"]])
    w = ics["w0"]
    om = w * B
    if abs(om) < 1e-14:
        x = x0 + v0 * t
        v = v0.copy()
        flux = 0.5 * B * (x0[0] * v0[1] - x0[1] * v0[0]) * t
    else:
        c, s = np.cos(om * t), np.sin(om * t)
        vx = v0[0] * c + v0[1] * s
        vy = -v0[0] * s + v0[1] * c
        x = np.array([
            x0[0] + (v0[0] * s + v0[1] * (1.0 - c)) / om,
            x0[1] + (-v0[0] * (1.0 - c) + v0[1] * s) / om,
            x0[2] + v0[2] * t,
        ])
        v = np.array([vx, vy, v0[2]])
        cx = x0[0] + v0[1] / om
        cy = x0[1] - v0[0] / om
        vperp2 = v0[0] ** 2 + v0[1] ** 2
        # integral of A . xdot = B/2 (x ydot - y xdot) along the circle
        flux = 0.5 * B * (cx * (x[1] - x0[1]) - cy * (x[0] - x0[0]) - vperp2 * t / om)
    theta = ics["theta0"] + w * t - flux
    return FullState(x, _translation(theta), v, [w])


def kaluza_klein_scenario(A=None, dA=None, B: float = 1.0) -> System:
    """Particle on E^3 x S with metric delta + (A_i dx^i + dtheta)^2.

    Without ``A`` the uniform field of strength ``B`` along e_z is used and the
    Larmor closed form is attached.  Initial values: ``x1..x3, dx1..dx3,
    theta0, w0`` where ``w0`` is the conserved charge.
    """
    uniform = A is None
    if uniform:
        A, dA = uniform_field(float(B))
    chart = BundleChart(
        3, 1,
        lambda x: np.asarray(A(x), dtype=float).reshape(1, 3),
        (lambda x: np.asarray(dA(x), dtype=float).reshape(1, 3, 3)) if dA is not None else None,
        name="kaluza-klein",
    )

    def value(x, v, w):
        return 0.5 * v @ v + 0.5 * w[0] ** 2

    def grad(x, v, w):
        return np.zeros(3), np.array(v, dtype=float), np.array(w, dtype=float)

    def hess(x, v, w):
        return np.eye(4), np.zeros((3, 4))

    lag = ReducedLagrangian(value, 3, 1, grad, hess)

    def initial(ics):
        return FullState(
            [ics["x1"], ics["x2"], ics["x3"]],
            _translation(ics["theta0"]),
            [ics["dx1"], ics["dx2"], ics["dx3"]],
            [ics["w0"]],
        )

    return System(
        id="kaluza-klein",
        rep=translation_group(1),
        chart=chart,
        lag=lag,
        params={"B": float(B)} if uniform else {},
        default_ics={"x1": 0.0, "x2": 0.0, "x3": 0.0, "dx1": 1.0, "dx2": 0.0, "dx3": 0.5,
                     "theta0": 0.0, "w0": 2.0},
        initial_state_fn=initial,
        closed_form_fn=(lambda ics, t: larmor_closed_form(float(B), ics, t)) if uniform else None,
        routh_inverse=lambda x, v, mu: np.array(mu, dtype=float),
        description="charged particle via Kaluza-Klein reduction",
    )


# --- Free rigid body -----------------------------------------------------------

def rigid_body_scenario(I1: float = 1.0, I2: float = 2.0, I3: float = 3.0) -> System:
    """Euler-Poincare rigid body on SO(3), l = (I1 w1^2 + I2 w2^2 + I3 w3^2)/2.

    Initial values ``w1, w2, w3`` (body angular velocity); attitude starts at the identity.
    """
    inertia = np.array([I1, I2, I3], dtype=float)
    if np.any(inertia <= 0):
        raise ConfigError("rigid body inertia values must be positive")

    def value(x, v, w):
        return 0.5 * float(inertia @ (w * w))

    def grad(x, v, w):
        return np.zeros(0), np.zeros(0), inertia * w

    def hess(x, v, w):
        return np.diag(inertia), np.zeros((0, 3))

    def initial(ics):
        return FullState([], np.eye(3), [], [ics["w1"], ics["w2"], ics["w3"]])

    return System(
        id="rigid-body",
        rep=so3_group(),
        chart=trivial_chart(0, 3),
        lag=ReducedLagrangian(value, 0, 3, grad, hess),
        params={"I1": float(I1), "I2": float(I2), "I3": float(I3)},
        default_ics={"w1": 0.3, "w2": 1.0, "w3": -0.4},
        initial_state_fn=initial,
        description="free rigid body (Euler-Poincare on SO(3))",
    )


# --- Wong's equations -----------------------------------------------------------

def check_ad_invariant(alg: LieAlgebraSpec, h, tol=1e-12) -> float:
    """Defect of h_ad C^d_bc + h_bd C^d_ac = 0; raises if above ``tol``."""
    h = np.asarray(h, dtype=float)
    C = alg.structure_constants
    T = np.einsum("ad,dbc->abc", h, C)
    defect = float(np.max(np.abs(T + T.transpose(1, 0, 2)), initial=0.0))
    if defect > tol:
        raise LieAlgebraError(f"fiber metric is not ad-invariant (defect {defect:.3e})")
    return defect


def wong_scenario(metric, dmetric, h, rep: GroupRep, chart: BundleChart, default_ics=None,
                  id="wong") -> System:
    """Geodesic flow of a bundle metric with a bi-invariant fiber part.

    ``metric(x)`` is the reduced base metric (m x m) and ``dmetric(x)[k]`` its
    derivative along x^k; ``h`` is a constant ad-invariant fiber metric.  The
    mechanical connection is used, so the chart's gamma is the connection.
    """
    h = np.array(h, dtype=float)
    check_ad_invariant(rep.alg, h)
    m, k = chart.base_dim, rep.alg.dim

    def value(x, v, w):
        return 0.5 * v @ metric(x) @ v + 0.5 * w @ h @ w

    def grad(x, v, w):
        dg = np.asarray(dmetric(x))
        return 0.5 * np.einsum("kij,i,j->k", dg, v, v), metric(x) @ v, h @ w

    def hess(x, v, w):
        H = np.zeros((m + k, m + k))
        H[:m, :m] = metric(x)
        H[m:, m:] = h
        X = np.zeros((m, m + k))
        X[:, :m] = np.einsum("kij,j->ki", np.asarray(dmetric(x)), v)
        return H, X

    def positive(x, v, w):
        try:
            np.linalg.cholesky(metric(x))
        except np.linalg.LinAlgError:
            return False
        return True

    lag = ReducedLagrangian(value, m, k, grad, hess, domain=positive,
                            domain_text="base metric positive definite")
    ics = dict(default_ics) if default_ics else {
        **{f"x{i + 1}": 0.0 for i in range(m)},
        **{f"dx{i + 1}": 0.0 for i in range(m)},
        **{f"w{a + 1}": 0.0 for a in range(k)},
    }

    def initial(ics):
        return FullState(
            [ics[f"x{i + 1}"] for i in range(m)],
            rep.identity,
            [ics[f"dx{i + 1}"] for i in range(m)],
            [ics[f"w{a + 1}"] for a in range(k)],
        )

    return System(
        id=id, rep=rep, chart=chart, lag=lag, params={},
        default_ics=ics, initial_state_fn=initial,
        description="Wong's equations from a Kaluza-Klein type metric",
    )


def demo_metric(x):
    return np.diag([1.0 + x[1] ** 2, 1.0 + 0.5 * x[0] ** 2])


def demo_dmetric(x):
    d = np.zeros((2, 2, 2))
    d[0, 1, 1] = x[0]
    d[1, 0, 0] = 2.0 * x[1]
    return d


def demo_gamma(x):
    return np.array([
        [0.3 * x[1], 0.2 * np.sin(x[0])],
        [0.1, 0.5 * x[0]],
        [-0.2 * x[0] * x[1], 0.1],
    ])


def demo_dgamma(x):
    D = np.zeros((3, 2, 2))
    D[0, 0, 1] = 0.3
    D[0, 1, 0] = 0.2 * np.cos(x[0])
    D[1, 1, 0] = 0.5
    D[2, 0, 0] = -0.2 * x[1]
    D[2, 0, 1] = -0.2 * x[0]
    return D


def wong_demo_scenario(h_scale: float = 1.0) -> System:
    """SO(3) charge moving on a curved 2-d base with a non-flat connection."""
    if h_scale <= 0:
        raise ConfigError("h_scale must be positive")
    chart = BundleChart(2, 3, demo_gamma, demo_dgamma, name="wong-demo")
    system = wong_scenario(
        demo_metric, demo_dmetric, h_scale * np.eye(3), so3_group(), chart,
        default_ics={"x1": 0.2, "x2": -0.1, "dx1": 0.7, "dx2": 0.4, "w1": 0.5, "w2": -0.3, "w3": 0.8},
        id="wong-demo",
    )
    return replace(system, params={"h_scale": float(h_scale)})


REGISTRY = {
    "affine": affine_scenario,
    "kaluza-klein": kaluza_klein_scenario,
    "rigid-body": rigid_body_scenario,
    "wong-demo": wong_demo_scenario,
}


def get_scenario(name: str, **params) -> System:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; registered: {', '.join(sorted(REGISTRY))}"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for scenario {name!r}: {exc}") from None
