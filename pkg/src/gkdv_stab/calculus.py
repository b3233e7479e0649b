"""Parameter gradients of the conserved set and the Jacobian brackets.

Derivatives with respect to (a, E, c) are central differences refined by a
Ridders-Richardson tableau.  Steps are capped by the distance of the point to
the boundary of Omega, measured in energy: moving a or c shifts the
equilibrium energy by -u_eq h and -u_eq^2 h / 2 and the separatrix energy by
-u_s h and -u_s^2 h / 2.  The action identities grad K = (M, T, P/2) are then
checked as a built-in oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GkdvError, IdentityViolation, NotInOmega, QNonPositive, StencilLeftOmega, StepUnderflow
from .potential import ParamPoint, PhasePlane, analyze_phase_plane
from .quadrature import conserved_set

DEFAULT_GRAD_TOL = 1e-6
_EPS = np.finfo(float).eps
STEP_FRACTION = 0.2  # initial Ridders step as a fraction of the step cap
COORDS = ("a", "E", "c")
QUANTITIES = ("T", "M", "P", "H", "K")


def ridders(fun, h0: float, *, con: float = 1.4, ntab: int = 10, safe: float = 2.0):
    """Central-difference derivative of a vector-valued ``fun`` by Ridders' method.

    ``fun(h)`` must return the symmetric difference quotient at step h.
    Returns (derivative, error estimate, step at which the estimate was taken),
    each component selected independently.
    """
    con2 = con * con
    tab = [[np.asarray(fun(h0), dtype=float)]]
    n = tab[0][0].size
    best = np.array(tab[0][0], copy=True)
    err = np.full(n, np.inf)
    hbest = np.full(n, h0)
    active = np.ones(n, dtype=bool)
    h = h0
    for i in range(1, ntab):
        h /= con
        row = [np.asarray(fun(h), dtype=float)]
        fac = con2
        for j in range(1, i + 1):
            row.append((row[j - 1] * fac - tab[i - 1][j - 1]) / (fac - 1.0))
            fac *= con2
            errt = np.maximum(np.abs(row[j] - row[j - 1]), np.abs(row[j] - tab[i - 1][j - 1]))
            better = active & (errt <= err)
            best = np.where(better, row[j], best)
            err = np.where(better, errt, err)
            hbest = np.where(better, h, hbest)
        tab.append(row)
        active &= ~(np.abs(row[i] - tab[i - 1][i - 1]) >= safe * err)
        if not active.any():
            break
    return best, err, hbest


_STENCILS = {
    1: ([1, -1], [0.5, -0.5]),
    2: ([1, 0, -1], [1.0, -2.0, 1.0]),
    3: ([2, 1, -1, -2], [0.5, -1.0, 1.0, -0.5]),
}


def batched_derivative(eval_batch, h0: float, order: int, *, ntab: int = 8, con: float = 1.4):
    """order-th derivative at 0 of a scalar map sampled by ``eval_batch``.

    ``eval_batch(points)`` receives every stencil point of the whole Ridders
    tableau at once (useful when one ODE solve serves all of them) and must
    return the values in the same order.  Returns (derivative, error).
    """
    if order not in _STENCILS:
        raise ValueError("order must be 1, 2 or 3")
    offs, wts = _STENCILS[order]
    hs = h0 / con ** np.arange(ntab)
    pts = np.concatenate([o * hs for o in offs])
    vals = np.asarray(eval_batch(pts)).reshape(len(offs), ntab)
    quot = sum(w * vals[k] for k, w in enumerate(wts)) / hs ** order
    it = iter(quot)
    d, err, _ = ridders(lambda h: np.array([next(it)]), h0, con=con, ntab=ntab)
    return float(d[0]), float(err[0])


def step_caps(pt: ParamPoint, pp: PhasePlane | None = None) -> np.ndarray:
    """Largest safe steps (h_a, h_E, h_c) keeping the whole stencil in Omega.

    Each cap is the smaller of the linear estimate (energy margin over the
    first-order energy shift) and the quadratic one (margin over the
    curvature of the shift), so that the step also stays well inside the
    radius of analyticity of T, M, P near the boundary.
    """
    pp = analyze_phase_plane(pt) if pp is None else pp
    if not pp.in_omega:
        raise NotInOmega(f"point ({pt.a:g}, {pt.E:g}, {pt.c:g}) is not in Omega")
    dE = pp.E - pp.E_star
    dS = pp.E_sep - pp.E
    ue, vpp_e = pp.u_eq, pp.Vpp_eq
    if pp.u_saddle is not None:
        us = pp.u_saddle
        vpp_s = abs(float(pt.nonlinearity.df(us)) - pt.c)
    else:
        us, vpp_s = 0.0, 0.0

    def cap(margin, first, second, absolute):
        out = absolute
        if not math.isfinite(margin):
            return out
        if first > 0:
            out = min(out, margin / first)
        if second > 0:
            out = min(out, math.sqrt(2.0 * margin / second))
        return out

    # shifts of E* and E_sep: d/da = -u, d2/da2 = -1/V''; d/dc = -u^2/2, d2/dc2 = -u^2/V''
    h_a = min(cap(dE, abs(ue), 1.0 / vpp_e, 0.1 * max(1.0, abs(pt.a))),
              cap(dS, abs(us), 1.0 / vpp_s if vpp_s else 0.0, math.inf))
    h_c = min(cap(dE, 0.5 * ue * ue, ue * ue / vpp_e, 0.1 * max(1.0, pt.c)),
              cap(dS, 0.5 * us * us, us * us / vpp_s if vpp_s else 0.0, math.inf),
              0.25 * pt.c)
    h_E = min(dE, dS)
    return np.array([h_a, h_E, h_c])


@dataclass(frozen=True)
class GradientTable:
    """Gradients of T, M, P, H, K in (a, E, c) with per-entry step and error."""

    point: ParamPoint
    values: dict
    grad_T: np.ndarray
    grad_M: np.ndarray
    grad_P: np.ndarray
    grad_H: np.ndarray
    grad_K: np.ndarray
    steps: np.ndarray  # shape (5, 3)
    errors: np.ndarray  # shape (5, 3)
    value_noise: float = 0.0  # relative rounding bound on the conserved values

    def grad(self, name: str) -> np.ndarray:
        return getattr(self, f"grad_{name}")

    def error(self, name: str) -> np.ndarray:
        return self.errors[QUANTITIES.index(name)]

    def matrix(self) -> np.ndarray:
        """Rows grad_T, grad_M, grad_P, grad_H, grad_K."""
        return np.vstack([self.grad(q) for q in QUANTITIES])

    def action_residual(self) -> float:
        v = self.values
        target = np.array([v["M"], v["T"], 0.5 * v["P"]])
        return float(np.linalg.norm(self.grad_K - target) / np.linalg.norm(target))

    def overdetermined_residual(self) -> float:
        pt, v = self.point, self.values
        parts = [pt.E * self.grad_T, pt.a * self.grad_M, 0.5 * pt.c * self.grad_P, self.grad_H]
        scale = max(np.linalg.norm(q) for q in parts)
        return float(np.linalg.norm(sum(parts)) / scale)

    def symmetry_residuals(self) -> dict:
        """Mixed-partial relations implied by grad K = (M, T, P/2)."""
        T, M, P = self.grad_T, self.grad_M, self.grad_P

        def rel(x, y):
            return abs(x - y) / max(abs(x), abs(y), 1e-300)

        return {"M_E-T_a": rel(M[1], T[0]), "P_a-2M_c": rel(P[0], 2 * M[2]),
                "P_E-2T_c": rel(P[1], 2 * T[2])}

    def step_report(self) -> list[dict]:
        rows = []
        for i, q in enumerate(QUANTITIES):
            for j, x in enumerate(COORDS):
                rows.append({"quantity": q, "coord": x, "value": float(self.grad(q)[j]),
                             "step": float(self.steps[i, j]), "error": float(self.errors[i, j])})
        return rows


def gradients(pt: ParamPoint, *, tol: float = DEFAULT_GRAD_TOL, check: bool = True,
              ntab: int = 10) -> GradientTable:
    """Gradients of the conserved set at ``pt``.

    With ``check`` the action identities are enforced and
    :class:`IdentityViolation` is raised when the relative residual exceeds
    ``tol``.
    """
    pp = analyze_phase_plane(pt)
    base = conserved_set(pt, pp)
    caps = step_caps(pt, pp)
    grads = np.zeros((5, 3))
    errs = np.zeros((5, 3))
    steps = np.zeros((5, 3))
    for j in range(3):
        def quotient(h, j=j):
            plus = conserved_set(pt.shifted(j, h)).as_array()
            minus = conserved_set(pt.shifted(j, -h)).as_array()
            return (plus - minus) / (2.0 * h)

        h0 = STEP_FRACTION * caps[j]
        for _ in range(30):
            try:
                d, e, hs = ridders(quotient, h0, ntab=ntab)
                break
            except (NotInOmega, QNonPositive):
                h0 *= 0.5
        else:
            raise StencilLeftOmega(f"no finite-difference stencil in Omega along {COORDS[j]}")
        if h0 < 1e-14 * max(1.0, abs(pt.coords[j])):
            raise StepUnderflow(f"step along {COORDS[j]} underflowed")
        grads[:, j], errs[:, j], steps[:, j] = d, e, hs
    # the tableau estimate misses rounding in the quotients themselves: add the
    # summation bound (nodes * eps) of the quadrature divided by the step
    noise = max(base.error, _EPS * base.nodes)
    errs += noise * np.abs(base.as_array())[:, None] / steps
    table = GradientTable(point=pt, values=base.as_dict(), grad_T=grads[0], grad_M=grads[1],
                          grad_P=grads[2], grad_H=grads[3], grad_K=grads[4], steps=steps,
                          errors=errs, value_noise=noise)
    if check:
        r1 = table.action_residual()
        r2 = table.overdetermined_residual()
        if not (r1 <= tol and r2 <= tol):
            raise IdentityViolation(
                f"action identity residual {r1:.2e}, overdetermined residual {r2:.2e} (tol {tol:g})")
    return table


def _bracket2(f, g, i, j):
    return f[i] * g[j] - f[j] * g[i]


@dataclass(frozen=True)
class JacobianBrackets:
    """T_E and the brackets {T,M}_{a,E}, {T,M}_{E,c}, {T,M,P}_{a,E,c}.

    ``errors`` holds first-order propagated error estimates for each.
    ``hessian_K`` has rows (grad M, grad T, grad P / 2).
    """

    T_E: float
    bracket_TM_aE: float
    bracket_TM_Ec: float
    bracket_TM_ac: float
    bracket_TMP_aEc: float
    hessian_K: np.ndarray
    errors: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"T_E": self.T_E, "bracket_TM_aE": self.bracket_TM_aE,
                "bracket_TM_Ec": self.bracket_TM_Ec, "bracket_TM_ac": self.bracket_TM_ac,
                "bracket_TMP_aEc": self.bracket_TMP_aEc,
                "hessian_K": self.hessian_K.tolist(), "errors": dict(self.errors)}


def bracket3(J: np.ndarray) -> float:
    """det of rows (grad T, grad M, grad P)."""
    return float(np.linalg.det(J))


def jacobian_brackets(table: GradientTable | ParamPoint, **kw) -> JacobianBrackets:
    """Assemble the brackets from a :class:`GradientTable` (or compute one)."""
    if isinstance(table, ParamPoint):
        table = gradients(table, **kw)
    T, M, P = table.grad_T, table.grad_M, table.grad_P
    eT, eM, eP = table.error("T"), table.error("M"), table.error("P")
    J = np.vstack([T, M, P])
    eJ = np.vstack([eT, eM, eP])
    d3 = bracket3(J)
    cof = np.linalg.det(J) * np.linalg.inv(J).T if abs(d3) > 0 else np.zeros((3, 3))
    e3 = float(np.sum(np.abs(cof) * eJ))

    def e2(i, j):
        return float(abs(T[i]) * eM[j] + abs(M[j]) * eT[i] + abs(T[j]) * eM[i] + abs(M[i]) * eT[j])

    hess = np.vstack([M, T, 0.5 * P])
    return JacobianBrackets(
        T_E=float(T[1]),
        bracket_TM_aE=float(_bracket2(T, M, 0, 1)),
        bracket_TM_Ec=float(_bracket2(T, M, 1, 2)),
        bracket_TM_ac=float(_bracket2(T, M, 0, 2)),
        bracket_TMP_aEc=d3,
        hessian_K=hess,
        errors={"T_E": float(eT[1]), "bracket_TM_aE": e2(0, 1), "bracket_TM_Ec": e2(1, 2),
                "bracket_TM_ac": e2(0, 2), "bracket_TMP_aEc": e3},
    )


def ma_sign_probe(pt: ParamPoint, *, hold: str = "E", table: GradientTable | None = None, **kw) -> float:
    """dM/da at ``pt``.

    ``hold="E"`` is the partial derivative at fixed (E, c).  ``hold="amplitude"``
    keeps E - E*(a, c) fixed instead, i.e. differentiates along the family of
    waves of fixed energy above the well bottom; since dE*/da = -u_eq this is
    M_a - u_eq M_E.  Near the equilibrium the second form tends to the
    derivative of T u_eq along the equilibrium branch.
    """
    table = gradients(pt, **kw) if table is None else table
    if hold == "E":
        return float(table.grad_M[0])
    if hold == "amplitude":
        u_eq = analyze_phase_plane(pt).u_eq
        return float(table.grad_M[0] - u_eq * table.grad_M[1])
    raise ValueError(f"hold must be 'E' or 'amplitude', got {hold!r}")


def equilibrium_ma(p: float, c: float = 1.0) -> float:
    """Closed-form derivative of T0 u_eq along the equilibrium branch at a = 0.

    At a = 0 the well bottom of u^(p+2)/(p+2) - c u^2/2 is u_eq = c^(1/p) with
    V'' = c p and T0 = 2 pi / sqrt(V''); differentiating u_eq and V'' in a
    gives pi (1 - p) / (p sqrt(p)) * c^(-3/2).
    """
    return math.pi * (1.0 - p) / (p * math.sqrt(p)) * c ** -1.5


__all__ = ["GradientTable", "JacobianBrackets", "gradients", "jacobian_brackets", "ma_sign_probe", "equilibrium_ma",
           "ridders", "batched_derivative", "step_caps", "bracket3", "GkdvError"]
