"""Period, mass, momentum, Hamiltonian and action by regularized quadrature.

With E - V(u) = (u - u_-)(u_+ - u) Q(u) and u = mid + half*sin(theta), the
square-root singularities at the turning points cancel:

    du / sqrt(2(E - V)) = dtheta / sqrt(2 Q(u(theta))).

For polynomial potentials Q is evaluated as the second divided difference of
W(w) = V(u_eq + w) - V(u_eq) at (w_-, w, w_+), which involves no subtraction
of nearly equal energies; this keeps full relative accuracy down to the
equilibrium limit.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import roots_legendre

from .errors import NotInOmega, QNonPositive
from .potential import ParamPoint, PhasePlane, analyze_phase_plane, _dV, _V

DEFAULT_RTOL = 1e-11
MAX_NODES = 2 ** 14
ENDPOINT_SWITCH = 1e-4

# test hook: relative bias injected into K (mutation checks of the verify suite)
_action_bias = 0.0


@contextlib.contextmanager
def tampered_action(rel: float):
    """Temporarily corrupt the action integral by a relative amount."""
    global _action_bias
    old, _action_bias = _action_bias, rel
    try:
        yield
    finally:
        _action_bias = old


@lru_cache(maxsize=32)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule mapped to [-pi/2, pi/2].

    Beyond 1024 nodes the rule is composite (1024-point panels); node
    generation is quadratic in the order and a single huge rule gains
    nothing for these integrands.
    """
    m = min(n, 1024)
    x, w = roots_legendre(m)
    panels = n // m
    edges = np.linspace(-0.5 * np.pi, 0.5 * np.pi, panels + 1)
    half = 0.5 * (edges[1] - edges[0])
    mids = 0.5 * (edges[1:] + edges[:-1])
    return (mids[:, None] + half * x[None, :]).ravel(), np.tile(half * w, panels)


def _complete_homogeneous(x: float, z: float, w: np.ndarray, degree: int) -> list[np.ndarray]:
    """h_0..h_degree of (x, z, w) with x, z scalars and w an array."""
    g = [1.0]
    for j in range(1, degree + 1):
        g.append(x ** j + z * g[-1])
    h = [np.ones_like(w)]
    for j in range(1, degree + 1):
        h.append(g[j] + w * h[-1])
    return h


def q_values(theta: np.ndarray, pp: PhasePlane, pt: ParamPoint) -> np.ndarray:
    """Q(u(theta)) on the closed interval [-pi/2, pi/2]."""
    s = pp.midpoint + pp.half_width * np.sin(theta)
    if pp.well_poly is not None:
        poly = pp.well_poly
        wm, wp = pp.u_minus - pp.u_eq, pp.u_plus - pp.u_eq
        w = s - pp.u_eq
        h = _complete_homogeneous(wm, wp, w, len(poly) - 3)
        q = np.zeros_like(w)
        for k in range(2, len(poly)):
            q = q + poly[k] * h[k - 2]
        return q
    a, c, nl = pt.a, pt.c, pt.nonlinearity
    width = pp.u_plus - pp.u_minus
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (pp.E - _V(s, a, c, nl)) / ((s - pp.u_minus) * (pp.u_plus - s))
    lo = np.abs(theta + 0.5 * np.pi) < ENDPOINT_SWITCH
    hi = np.abs(theta - 0.5 * np.pi) < ENDPOINT_SWITCH
    q = np.where(lo, -_dV(pp.u_minus, a, c, nl) / width, q)
    q = np.where(hi, _dV(pp.u_plus, a, c, nl) / width, q)
    return q


def _checked_q(theta, pp, pt):
    q = q_values(theta, pp, pt)
    if not np.all(q > 0) or not np.all(np.isfinite(q)):
        raise QNonPositive(f"Q <= 0 on the well (min Q = {np.nanmin(q):.3g})")
    return q


def _require_omega(pt: ParamPoint, pp: PhasePlane | None) -> PhasePlane:
    pp = analyze_phase_plane(pt) if pp is None else pp
    if not pp.in_omega:
        raise NotInOmega(f"(a, E, c) = ({pt.a:g}, {pt.E:g}, {pt.c:g}) is not in Omega "
                         f"(E* = {pp.E_star:.6g}, E_sep = {pp.E_sep:.6g})")
    return pp


def _adaptive(integrands, pp, pt, rtol, max_nodes):
    """Gauss-Legendre with order doubling; returns (values, nodes, error)."""
    prev = None
    n = 32
    while True:
        th, wt = gauss_legendre(n)
        q = _checked_q(th, pp, pt)
        vals = integrands(th, q, wt)
        if prev is not None:
            diff = np.abs(vals - prev)
            floor = 1e-3 * np.max(np.abs(vals))
            if np.all(diff <= rtol * np.maximum(np.abs(vals), floor)):
                return vals, n, float(np.max(diff / np.maximum(np.abs(vals), floor)))
        if 2 * n > max_nodes:
            err = np.inf if prev is None else float(
                np.max(np.abs(vals - prev) / np.maximum(np.abs(vals), 1e-300)))
            return vals, n, err
        prev = vals
        n *= 2


def regularized_quadrature(g, pp: PhasePlane, pt: ParamPoint, *, rtol: float = DEFAULT_RTOL,
                           max_nodes: int = MAX_NODES) -> float:
    """2 * int_{u-}^{u+} g(u) du / sqrt(2(E - V)) in the sine substitution."""
    pp = _require_omega(pt, pp)

    def integrand(th, q, wt):
        s = pp.midpoint + pp.half_width * np.sin(th)
        return np.array([2.0 * np.sum(wt * np.asarray(g(s), dtype=float) / np.sqrt(2.0 * q))])

    vals, _, _ = _adaptive(integrand, pp, pt, rtol, max_nodes)
    return float(vals[0])


@dataclass(frozen=True)
class ConservedSet:
    """Period T, mass M = <u>, momentum P = <u^2>, Hamiltonian H and action K."""

    T: float
    M: float
    P: float
    H: float
    K: float
    nodes: int = 0
    error: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.T, self.M, self.P, self.H, self.K])

    def as_dict(self) -> dict:
        return {"T": self.T, "M": self.M, "P": self.P, "H": self.H, "K": self.K}


def conserved_set(pt: ParamPoint, pp: PhasePlane | None = None, *, rtol: float = DEFAULT_RTOL,
                  max_nodes: int = MAX_NODES) -> ConservedSet:
    """T, M, P, H, K at a point of Omega (all on one set of quadrature nodes)."""
    pp = _require_omega(pt, pp)
    F = pt.nonlinearity.F
    half = pp.half_width

    def integrands(th, q, wt):
        s = pp.midpoint + half * np.sin(th)
        rq = np.sqrt(2.0 * q)
        om = wt / rq
        T = 2.0 * np.sum(om)
        M = 2.0 * np.sum(om * s)
        P = 2.0 * np.sum(om * s * s)
        Fbar = 2.0 * np.sum(om * F(s))
        K = 2.0 * half * half * np.sum(wt * rq * np.cos(th) ** 2)
        return np.array([T, M, P, 0.5 * K - Fbar, K])

    vals, n, err = _adaptive(integrands, pp, pt, rtol, max_nodes)
    T, M, P, H, K = (float(v) for v in vals)
    if _action_bias:
        K *= 1.0 + _action_bias
    return ConservedSet(T=T, M=M, P=P, H=H, K=K, nodes=n, error=err)


@dataclass(frozen=True)
class WaveProfile:
    """One period of the wave, trough at x = 0 and crest at x = T/2.

    ``x, u, ux`` are the non-uniform samples produced by the theta grid; use
    :meth:`uniform` for a uniform grid suitable for FFTs.
    """

    param: ParamPoint
    phase: PhasePlane
    T: float
    x: np.ndarray
    u: np.ndarray
    ux: np.ndarray

    def energy_residual(self) -> float:
        pt = self.param
        r = 0.5 * self.ux ** 2 + _V(self.u, pt.a, pt.c, pt.nonlinearity) - pt.E
        return float(np.max(np.abs(r)))

    def uniform(self, n: int, *, rtol: float = 1e-13) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Samples (x_j, u, u_x) at x_j = j T / n, j = 0..n-1."""
        return uniform_samples(self.param, n, T=self.T, pp=self.phase, rtol=rtol)

    @property
    def a(self):
        return self.param.a

    @property
    def c(self):
        return self.param.c

    @property
    def nonlinearity(self):
        return self.param.nonlinearity


def reconstruct_profile(pt: ParamPoint, n_samples: int = 256, *, T: float | None = None) -> WaveProfile:
    """Invert x(u) = int_{u-}^{u} ds / sqrt(2(E - V)) on a theta grid.

    The half period is built from ``n_samples // 2`` theta cells (each
    integrated with a 32-point Gauss rule) and mirrored to x in [T/2, T].
    """
    if n_samples < 64:
        raise ValueError("n_samples must be at least 64")
    pp = _require_omega(pt, None)
    nh = n_samples // 2
    edges = np.linspace(-0.5 * np.pi, 0.5 * np.pi, nh + 1)
    gx, gw = roots_legendre(32)
    mids = 0.5 * (edges[1:] + edges[:-1])
    halfw = 0.5 * (edges[1:] - edges[:-1])
    th = (mids[:, None] + halfw[:, None] * gx[None, :]).ravel()
    q = _checked_q(th, pp, pt).reshape(nh, 32)
    cell = np.sum(gw[None, :] / np.sqrt(2.0 * q), axis=1) * halfw
    xh = np.concatenate([[0.0], np.cumsum(cell)])
    Tq = 2.0 * xh[-1] if T is None else T
    xh *= 0.5 * Tq / xh[-1]
    qe = _checked_q(edges, pp, pt)
    uh = pp.midpoint + pp.half_width * np.sin(edges)
    uh[0], uh[-1] = pp.u_minus, pp.u_plus
    uxh = np.sqrt(2.0 * qe) * pp.half_width * np.cos(edges)
    uxh[0] = uxh[-1] = 0.0
    x = np.concatenate([xh, Tq - xh[-2::-1]])
    u = np.concatenate([uh, uh[-2::-1]])
    ux = np.concatenate([uxh, -uxh[-2::-1]])
    return WaveProfile(param=pt, phase=pp, T=Tq, x=x, u=u, ux=ux)


def profile_rhs(pt: ParamPoint):
    a, c, f = pt.a, pt.c, pt.nonlinearity.f

    def rhs(x, y):
        return [y[1], a + c * y[0] - f(y[0])]

    return rhs


def uniform_samples(pt: ParamPoint, n: int, *, T: float | None = None, pp: PhasePlane | None = None,
                    rtol: float = 1e-13) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform-grid samples of one period by integrating u'' = a + c u - f(u).

    The ODE is integrated over the first half period only and mirrored, so
    the samples are exactly even about x = 0 and x = T/2.
    """
    pp = _require_omega(pt, pp)
    if T is None:
        T = conserved_set(pt, pp).T
    x = np.arange(n) * (T / n)
    half = x[x <= 0.5 * T + 1e-15 * T]
    sol = solve_ivp(profile_rhs(pt), (0.0, 0.5 * T), [pp.u_minus, 0.0], method="DOP853",
                    t_eval=half, rtol=rtol, atol=1e-15 * max(1.0, abs(pp.u_minus)))
    if not sol.success:
        raise QNonPositive(f"profile integration failed: {sol.message}")
    u = np.empty(n)
    ux = np.empty(n)
    m = len(half)
    u[:m], ux[:m] = sol.y[0], sol.y[1]
    if 2 * (m - 1) == n:
        ux[m - 1] = 0.0  # x = T/2 is the crest
    # mirror: u(T - x) = u(x), u_x(T - x) = -u_x(x)
    idx = np.arange(m, n)
    u[idx] = u[n - idx]
    ux[idx] = -ux[n - idx]
    return x, u, ux


def period(pt: ParamPoint) -> float:
    return conserved_set(pt).T


def equilibrium_period(pp: PhasePlane) -> float:
    """Small-amplitude limit 2 pi / sqrt(V''(u_eq))."""
    return 2.0 * math.pi / math.sqrt(pp.Vpp_eq)
