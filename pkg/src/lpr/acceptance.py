"""Acceptance suite shared by ``lpr verify`` and the pytest gate.

Each check returns a :class:`CheckResult`; tolerances are fixed here and
multiplied by ``tol_scale`` (the ``LPR_TOL_SCALE`` environment variable in the
CLI).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from . import bundle
from .dynamics import energy, integrate_reduced, lp_residual, lp_rhs, momentum, routh_reduce
from .lagrangian import gradient, hessian_blocks, mech_connection_coeffs, tilde_basis_hessian, velocity_hessian
from .lie_core import (
    LieAlgebraSpec,
    adjoint_matrix,
    affine_coords,
    affine_element,
    affine_group,
    bracket,
    group_exp,
)
from .errors import LieAlgebraError
from .reconstruction import (
    MECH,
    PRINCIPAL,
    direct_integrate,
    horizontal_lift_mech,
    horizontal_lift_principal,
    reconstruct,
    reconstruct_route,
)
from .scenarios import AFFINE_DEFAULT_ICS, affine_reference, get_scenario

SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    criterion: str
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.criterion:<4} {self.name:<58} {self.value:10.3e} <= {self.tol:8.1e}"
        return f"{text}  {self.detail}" if self.detail else text


def tol_scale_from_env() -> float:
    raw = os.environ.get("LPR_TOL_SCALE", "1")
    try:
        val = float(raw)
    except ValueError:
        raise ValueError(f"LPR_TOL_SCALE must be a number, got {raw!r}") from None
    if not val > 0:
        raise ValueError("LPR_TOL_SCALE must be positive")
    return val


def _result(crit, name, value, tol, detail=""):
    value = float(value)
    return CheckResult(crit, name, bool(np.isfinite(value) and value <= tol), value, tol, detail)


def _max_abs(*arrays):
    return max(float(np.max(np.abs(a), initial=0.0)) for a in arrays)


# --- 1. affine closed forms -----------------------------------------------------

def check_affine_closed_form(tol_scale=1.0):
    sys = get_scenario("affine", q=2.0)
    s0 = sys.initial_state()
    t0 = time.perf_counter()
    tr = direct_integrate(sys, s0, 1.0, 1e-3)
    runtime = time.perf_counter() - t0
    err = 0.0
    for n, t in enumerate(tr.times):
        ref = sys.closed_form(t)
        th, ph = affine_coords(tr.group[n])
        th_ref, ph_ref = affine_coords(ref.g)
        err = max(err, abs(tr.x[n, 0] - ref.x[0]), abs(th - th_ref), abs(ph - ph_ref))
    th1, ph1 = affine_coords(tr.group[-1])
    end_err = max(abs(tr.x[-1, 0] - 2.0 / 3.0), abs(th1 - 1.0 / 6.0), abs(ph1 - 2.0))
    return [
        _result("1", "affine direct vs closed forms x, theta, phi on [0,1]", err, 1e-6 * tol_scale,
                f"runtime {runtime:.2f}s"),
        _result("1", "affine t=1 values (2/3, 1/6, 2)", end_err, 1e-6 * tol_scale),
    ]


# --- 2. triple-route agreement and order ------------------------------------------

ROUTE_SCENARIOS = ("affine", "kaluza-klein", "rigid-body")


def all_routes(sys, s0, t_end, dt):
    rt = integrate_reduced(sys, s0.reduced(), t_end, dt)
    return {
        "direct": direct_integrate(sys, s0, t_end, dt),
        "mech": reconstruct_route(sys, rt, s0.g, MECH),
        "principal": reconstruct_route(sys, rt, s0.g, PRINCIPAL),
    }


def _route_error(a, b):
    return _max_abs(a.states - b.states, a.group - b.group)


def _reference_error(sys, tr, ref):
    if ref is None:
        err = 0.0
        for n, t in enumerate(tr.times):
            c = sys.closed_form(t)
            err = max(err, _max_abs(tr.states[n] - c.reduced().as_vector(), tr.group[n] - c.g))
        return err
    stride = int(round((tr.times[1] - tr.times[0]) / (ref.times[1] - ref.times[0])))
    return _max_abs(tr.states - ref.states[::stride], tr.group - ref.group[::stride])


def check_triple_route(tol_scale=1.0, scenarios=ROUTE_SCENARIOS):
    out = []
    for name in scenarios:
        sys = get_scenario(name)
        s0 = sys.initial_state()
        routes = all_routes(sys, s0, 1.0, 1e-3)
        worst = max(
            _route_error(routes[a], routes[b])
            for a, b in (("direct", "mech"), ("direct", "principal"), ("mech", "principal"))
        )
        out.append(_result("2", f"{name}: pairwise route agreement, dt=1e-3", worst, 1e-6 * tol_scale))

        ref = None
        if not sys.has_closed_form:
            ref = direct_integrate(sys, s0, 1.0, 0.05 / 16)
        coarse = all_routes(sys, s0, 1.0, 0.1)
        fine = all_routes(sys, s0, 1.0, 0.05)
        ratios = {
            k: _reference_error(sys, coarse[k], ref) / _reference_error(sys, fine[k], ref) for k in coarse
        }
        dev = max(abs(r / 16.0 - 1.0) for r in ratios.values())
        detail = ", ".join(f"{k} x{r:.2f}" for k, r in ratios.items())
        out.append(_result("2", f"{name}: error ratio under dt-halving (16 +- 30%)", dev, 0.3, detail))
    return out


# --- 3. reference values -----------------------------------------------------------

def check_reference_values(tol_scale=1.0):
    q = 2.0
    sys = get_scenario("affine", q=q)
    generic = affine_group(closed_forms=False)
    rng = np.random.default_rng(SEED)
    det_err = hess_err = B_err = A_err = 0.0
    for _ in range(50):
        theta, phi, xdot, dtheta, x = rng.normal(size=5)
        dphi = rng.uniform(0.2, 3.0)
        g = affine_element(theta, phi)
        s = sys.initial_state({"x0": x, "dx0": xdot, "theta0": theta, "dtheta0": dtheta,
                               "phi0": phi, "dphi0": dphi}).reduced()
        blocks = hessian_blocks(sys.lag, s, method="analytic")
        A = adjoint_matrix(generic, generic.alg, g)
        T = tilde_basis_hessian(blocks, A)
        det_err = max(det_err, abs(np.linalg.det(T) - (q * q - 1) / dphi**2))
        expected = np.array([
            [1 - phi**2 / dphi**2, -phi / dphi**2, q],
            [-phi / dphi**2, -1 / dphi**2, 0.0],
            [q, 0.0, 1.0],
        ])
        hess_err = max(hess_err, _max_abs(T - expected))
        B = mech_connection_coeffs(blocks).tilde(A)
        B_err = max(B_err, _max_abs(B[:, 0] - np.array([-q, q * phi])))
        A_err = max(A_err, _max_abs(A - np.array([[1.0, 0.0], [-phi, np.exp(theta)]])))

    rt = integrate_reduced(sys, sys.initial_state().reduced(), 1.0, 1e-3)
    s0 = sys.initial_state()
    ics = dict(AFFINE_DEFAULT_ICS)
    h_mech = horizontal_lift_mech(sys, rt, s0.g)
    g_mech = reconstruct(sys, rt, h_mech, MECH)
    h_pr = horizontal_lift_principal(sys, rt, s0.g)
    g_pr = reconstruct(sys, rt, h_pr, PRINCIPAL)
    inter = 0.0
    for t in (0.25, 0.5, 1.0):
        n = int(np.argmin(np.abs(rt.times - t)))
        ref = affine_reference(q, ics, t)
        th_h, ph_h = affine_coords(h_mech.matrices[n])
        th_1, ph_1 = affine_coords(g_mech.matrices[n])
        thp_h, php_h = affine_coords(h_pr.matrices[n])
        thp_1, php_1 = affine_coords(g_pr.matrices[n])
        inter = max(inter, abs(th_h - ref["mech_theta_h"]), abs(ph_h - ref["mech_phi_h"]),
                    abs(th_1 - ref["mech_theta_1"]), abs(ph_1 - ref["mech_phi_1"]),
                    abs(thp_h - ref["principal_theta_h"]), abs(php_h - ref["principal_phi_h"]),
                    abs(thp_1 - ref["principal_theta_1"]), abs(php_1 - ref["principal_phi_1"]))
    return [
        _result("3a", "tilde-basis Hessian determinant (q^2-1)/dphi^2, 50 states", det_err, 1e-9 * tol_scale),
        _result("3a", "tilde-basis Hessian vs printed matrix, 50 states", hess_err, 1e-9 * tol_scale),
        _result("3b", "mechanical connection B = (-q, q phi)", B_err, 1e-10 * tol_scale),
        _result("3c", "generic Ad-matrix vs printed A(g)", A_err, 1e-12 * tol_scale),
        _result("3d", "reconstruction intermediates at t=0.25,0.5,1", inter, 1e-6 * tol_scale),
    ]


# --- 4. conservation -------------------------------------------------------------

ALL_SCENARIOS = ("affine", "kaluza-klein", "rigid-body", "wong-demo")


def check_conservation(tol_scale=1.0):
    out = []
    for name in ALL_SCENARIOS:
        sys = get_scenario(name)
        rt = integrate_reduced(sys, sys.initial_state().reduced(), 1.0, 1e-3)
        E = np.array([energy(sys, rt.state(n)) for n in range(len(rt))])
        out.append(_result("4", f"{name}: energy drift on [0,1]", np.max(np.abs(E - E[0])), 1e-8 * tol_scale))
        if name == "kaluza-klein":
            P = np.array([momentum(sys, rt.state(n)) for n in range(len(rt))])
            out.append(_result("4", "kaluza-klein: momentum grid-constant", _max_abs(P - P[0]),
                               1e-12 * tol_scale))
    sys = get_scenario("rigid-body")
    rt = integrate_reduced(sys, sys.initial_state().reduced(), 10.0, 1e-3)
    pn = np.array([np.linalg.norm(momentum(sys, rt.state(n))) for n in range(len(rt))])
    E = np.array([energy(sys, rt.state(n)) for n in range(len(rt))])
    out.append(_result("4", "rigid-body: |p| drift on [0,10]", np.max(np.abs(pn - pn[0])), 1e-8 * tol_scale))
    out.append(_result("4", "rigid-body: energy drift on [0,10]", np.max(np.abs(E - E[0])), 1e-8 * tol_scale))
    return out


# --- 5. structural properties ------------------------------------------------------

def _algebra_assertions():
    """Defect of the construction-time checks: 0 if good algebras pass and bad ones are rejected."""
    failures = 0
    for name in ALL_SCENARIOS:
        try:
            LieAlgebraSpec(get_scenario(name).alg.structure_constants)
        except LieAlgebraError:
            failures += 1
    bad_anti = np.zeros((2, 2, 2))
    bad_anti[1, 0, 1] = 1.0
    bad_jacobi = np.zeros((3, 3, 3))
    bad_jacobi[0, 0, 1], bad_jacobi[0, 1, 0] = 1.0, -1.0
    bad_jacobi[0, 1, 2], bad_jacobi[0, 2, 1] = 1.0, -1.0
    bad_jacobi[1, 0, 2], bad_jacobi[1, 2, 0] = 1.0, -1.0
    for C in (bad_anti, bad_jacobi):
        try:
            LieAlgebraSpec(C)
            failures += 1
        except LieAlgebraError:
            pass
    return failures


def check_structure(tol_scale=1.0, curvature_fn=None):
    curvature_fn = curvature_fn or bundle.curvature
    rng = np.random.default_rng(SEED + 5)
    out = [_result("5", "structure-constant assertions (accept good, reject bad)", _algebra_assertions(), 0)]

    comm = 0.0
    for name in ALL_SCENARIOS:
        rep = get_scenario(name).rep
        for _ in range(50):
            xi, eta = rng.normal(size=(2, rep.alg.dim))
            X, Y = rep.embed(xi), rep.embed(eta)
            comm = max(comm, _max_abs(rep.embed(bracket(rep.alg, xi, eta)) - (X @ Y - Y @ X)))
    out.append(_result("5", "rho-commutator vs bracket", comm, 1e-12 * tol_scale))

    for name in ALL_SCENARIOS:
        sys = get_scenario(name)
        m = sys.lag.base_dim
        if m == 0:
            continue
        err = 0.0
        for _ in range(100):
            x = rng.normal(size=m)
            g = group_exp(sys.rep, rng.normal(size=sys.alg.dim))
            K = curvature_fn(sys.chart, sys.alg, x)
            err = max(err, _max_abs(K - bundle.curvature_bracket_oracle(sys.chart, sys.rep, x, g)))
        out.append(_result("5", f"{name}: curvature vs FD bracket oracle, 100 pts", err, 1e-5 * tol_scale))

    for name in ALL_SCENARIOS:
        sys = get_scenario(name)
        fd = sys.lag.fd_only()
        err = 0.0
        for _ in range(200):
            s = sys.sample_state(rng)
            ga, gf = gradient(sys.lag, s), gradient(fd, s)
            Ha, Xa = velocity_hessian(sys.lag, s)
            Hf, Xf = velocity_hessian(fd, s)
            for a, f in zip((*ga, Ha, Xa), (*gf, Hf, Xf)):
                if a.size:
                    err = max(err, float(np.max(np.abs(a - f) / np.maximum(1.0, np.abs(a)))))
        out.append(_result("5", f"{name}: FD vs analytic derivatives, 200 states", err, 1e-5 * tol_scale))

    for name in ALL_SCENARIOS:
        sys = get_scenario(name)
        res = 0.0
        for _ in range(50):
            s = sys.sample_state(rng)
            _, dv, dw = lp_rhs(sys, s)
            rv, rw = lp_residual(sys, s, dv, dw)
            res = max(res, _max_abs(rv, rw))
        out.append(_result("5", f"{name}: LP residual plug-back", res, 1e-9 * tol_scale))
    return out


# --- 6. Routh ------------------------------------------------------------------------

def check_routh(tol_scale=1.0):
    sys = get_scenario("kaluza-klein")
    s0 = sys.initial_state()
    rt = integrate_reduced(sys, s0.reduced(), 1.0, 1e-3)
    routh = routh_reduce(sys, momentum(sys, s0.reduced()))
    times, xv = routh.integrate(s0.x, s0.v, 1.0, 1e-3)
    m = sys.lag.base_dim
    err = _max_abs(xv - rt.states[:, : 2 * m])
    return [_result("6", "kaluza-klein Routh (x, v) vs LP projection on [0,1]", err, 1e-8 * tol_scale)]


CRITERIA = {
    "1": check_affine_closed_form,
    "2": check_triple_route,
    "3": check_reference_values,
    "4": check_conservation,
    "5": check_structure,
    "6": check_routh,
}


def run_acceptance(tol_scale=1.0, criteria=None):
    results = []
    for key, fn in CRITERIA.items():
        if criteria is None or key in criteria:
            results.extend(fn(tol_scale))
    return results


def format_table(results) -> str:
    lines = [r.line() for r in results]
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
