"""Closed forms for f(u) = u^2: cubic roots, cnoidal profiles and reductions.

For the KdV potential V(u; a, c) = u^3/3 - c u^2/2 - a u one has
3 (E - V(u)) = (u - u1)(u - u2)(u3 - u) with u1 <= u2 <= u3, and the wave
oscillating between u2 and u3 is

    u(x) = u2 + (u3 - u2) cn^2(kappa (x - x0), k),
    k^2 = (u3 - u2) / (u3 - u1),  kappa^2 = (u3 - u1) / 6.

Elliptic integrals and functions are computed from the arithmetic-geometric
mean, so nothing here depends on special-function libraries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ComplexRoots, DegenerateRoots, NotInOmega, NoWell
from .potential import Nonlinearity, ParamPoint, _V, analyze_phase_plane

AGM_TOL = 1e-16
_MAX_AGM = 40


# ---------------------------------------------------------------------------
# elliptic functions


def _agm_sequence(k: float):
    """a_n, b_n, c_n of the AGM started from (1, k', k)."""
    kp = math.sqrt(max(0.0, 1.0 - k * k))
    a, b, c = 1.0, kp, k
    seq = [(a, b, c)]
    for _ in range(_MAX_AGM):
        if abs(c) <= AGM_TOL * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        seq.append((a, b, c))
    return seq


def ellipk(k: float) -> float:
    """Complete elliptic integral of the first kind, modulus k in [0, 1)."""
    k = abs(float(k))
    if k >= 1.0:
        return math.inf
    a = _agm_sequence(k)[-1][0]
    return math.pi / (2.0 * a)


def ellipe(k: float) -> float:
    """Complete elliptic integral of the second kind, modulus k in [0, 1]."""
    k = abs(float(k))
    if k >= 1.0:
        return 1.0
    seq = _agm_sequence(k)
    s = sum(2.0 ** (n - 1) * c * c for n, (_, _, c) in enumerate(seq))
    return ellipk(k) * (1.0 - s)


def ellipke(k: float) -> tuple[float, float]:
    return ellipk(k), ellipe(k)


def jacobi_sncndn(x, k: float):
    """sn, cn, dn of modulus k by the descending Landen (AGM) recurrence.

    phi_N = 2^N a_N x, then phi_{n-1} = (phi_n + asin(c_n/a_n sin phi_n)) / 2;
    sn = sin phi_0, cn = cos phi_0 and dn = sqrt(1 - k^2 sn^2), which stays
    well conditioned because dn >= k' > 0.
    """
    x = np.asarray(x, dtype=float)
    k = abs(float(k))
    if k == 0.0:
        return np.sin(x), np.cos(x), np.ones_like(x)
    if k >= 1.0:
        t = np.tanh(x)
        sech = 1.0 / np.cosh(x)
        return t, sech, sech.copy()
    seq = _agm_sequence(k)
    n = len(seq) - 1
    phi = (2.0 ** n) * seq[n][0] * x
    for j in range(n, 0, -1):
        a, _, c = seq[j]
        phi = 0.5 * (phi + np.arcsin(np.clip(c / a * np.sin(phi), -1.0, 1.0)))
    sn, cn = np.sin(phi), np.cos(phi)
    dn = np.sqrt(1.0 - k * k * sn * sn)
    return sn, cn, dn


# ---------------------------------------------------------------------------
# roots of the cubic


def _require_kdv(nl: Nonlinearity):
    if not (nl.kind == "power" and nl.p == 1.0):
        raise ValueError("closed forms are only available for f(u) = u^2")


@dataclass(frozen=True)
class CubicRoots:
    u1: float
    u2: float
    u3: float
    a: float
    E: float
    c: float

    @property
    def roots(self) -> tuple[float, float, float]:
        return self.u1, self.u2, self.u3

    def sum_residual(self) -> float:
        return abs(self.u1 + self.u2 + self.u3 - 1.5 * self.c)

    def cubic(self, u):
        """3 (E - V(u))."""
        u = np.asarray(u, dtype=float)
        return 3.0 * self.E - u ** 3 + 1.5 * self.c * u ** 2 + 3.0 * self.a * u


def _polish(r, b2, b1, b0):
    # Newton on u^3 + b2 u^2 + b1 u + b0
    for _ in range(3):
        p = ((r + b2) * r + b1) * r + b0
        dp = (3.0 * r + 2.0 * b2) * r + b1
        if dp == 0.0:
            break
        step = p / dp
        r -= step
        if abs(step) <= 1e-17 * max(1.0, abs(r)):
            break
    return r


def cubic_roots(pt: ParamPoint, *, check_omega: bool = True) -> CubicRoots:
    """Roots of u^3 - (3c/2) u^2 - 3a u - 3E by the trigonometric form of Cardano."""
    _require_kdv(pt.nonlinearity)
    a, E, c = pt.a, pt.E, pt.c
    if check_omega:
        pp = analyze_phase_plane(pt)
        if not pp.in_omega:
            raise ComplexRoots(f"(a, E, c) = ({a}, {E}, {c}) is not in Omega")
    b2, b1, b0 = -1.5 * c, -3.0 * a, -3.0 * E
    shift = -b2 / 3.0
    # depressed cubic t^3 + P t + Q with u = t + shift
    P = b1 - b2 * b2 / 3.0
    Q = 2.0 * b2 ** 3 / 27.0 - b2 * b1 / 3.0 + b0
    if P >= 0.0:
        raise ComplexRoots("the cubic has a single real root")
    r = 2.0 * math.sqrt(-P / 3.0)
    arg = 3.0 * Q / (P * r)
    if abs(arg) > 1.0 + 1e-14:
        raise ComplexRoots("the cubic has complex roots")
    theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
    ts = [r * math.cos(theta - 2.0 * math.pi * j / 3.0) for j in range(3)]
    us = sorted(_polish(t + shift, b2, b1, b0) for t in ts)
    return CubicRoots(us[0], us[1], us[2], a, E, c)


# ---------------------------------------------------------------------------
# cnoidal parameters


@dataclass(frozen=True)
class CnoidalParams:
    """u(x) = u0 + amplitude cn^2(kappa (x - x0), k) with amplitude 6 k^2 kappa^2.

    ``wave_speed`` is c.  The doubled field 2u solves v_t = v_xxx + v v_x and
    reads 2u0 + 12 k^2 kappa^2 cn^2(...), whose speed 8k^2 kappa^2 - 4 kappa^2
    + 2u0 is again c (see :meth:`doubled_form`).
    """

    k: float
    kappa: float
    u0: float
    x0: float
    wave_speed: float
    roots: CubicRoots

    @property
    def amplitude(self) -> float:
        return 6.0 * self.k ** 2 * self.kappa ** 2

    @property
    def m(self) -> float:
        return self.k ** 2

    @property
    def K(self) -> float:
        return ellipk(self.k)

    @property
    def E_int(self) -> float:
        return ellipe(self.k)

    @property
    def period(self) -> float:
        return 2.0 * self.K / self.kappa

    def profile(self, x):
        _, cn, _ = jacobi_sncndn(self.kappa * (np.asarray(x, dtype=float) - self.x0), self.k)
        return self.u0 + self.amplitude * cn ** 2

    def derivative(self, x):
        sn, cn, dn = jacobi_sncndn(self.kappa * (np.asarray(x, dtype=float) - self.x0), self.k)
        return -2.0 * self.amplitude * self.kappa * sn * cn * dn

    def field(self, x, t):
        """Solution of u_t = u_xxx + (u^2)_x in the lab frame, u(x + c t)."""
        return self.profile(np.asarray(x, dtype=float) + self.wave_speed * t)

    def doubled_form(self) -> dict:
        """Parameters of v = 2u written as v0 + 12 k^2 kappa^2 cn^2(kappa(x - x0 + s t))."""
        k2, kap2 = self.k ** 2, self.kappa ** 2
        v0 = 2.0 * self.u0
        return {"u0": v0, "k": self.k, "kappa": self.kappa, "x0": self.x0,
                "amplitude": 12.0 * k2 * kap2, "speed": 8.0 * k2 * kap2 - 4.0 * kap2 + v0}

    def conserved(self) -> dict:
        """Analytic T, M = int u, P = int u^2 over one period."""
        k, K, E = self.k, self.K, self.E_int
        k2, kp2 = k * k, 1.0 - k * k
        T = 2.0 * K / self.kappa
        A = self.amplitude
        scale = 2.0 / self.kappa
        # int_0^K cn^2 and int_0^K cn^4
        if k2 < 1e-3:
            # the closed forms cancel badly as k -> 0; integrate in phi instead
            th, w = theta_nodes(32)
            w = w * (0.5 * math.pi)
            jac = 1.0 / np.sqrt(1.0 - k2 * np.sin(th) ** 2)
            C1 = float(np.sum(w * np.cos(th) ** 2 * jac))
            C2 = float(np.sum(w * np.cos(th) ** 4 * jac))
        else:
            C1 = (E - kp2 * K) / k2
            C2 = (2.0 * (2.0 * k2 - 1.0) * C1 + kp2 * K) / (3.0 * k2)
        u0 = self.u0
        M = u0 * T + A * scale * C1
        P = u0 * u0 * T + 2.0 * u0 * A * scale * C1 + A * A * scale * C2
        return {"T": T, "M": M, "P": P}


def cnoidal_from_roots(roots: CubicRoots, *, rel_gap: float = 1e-14) -> CnoidalParams:
    """Cnoidal parameters from ordered roots; trough u2 at x = 0, crest u3 at T/2."""
    u1, u2, u3 = roots.roots
    width = u3 - u1
    if width <= 0.0 or (u2 - u1) <= rel_gap * width or (u3 - u2) <= rel_gap * width:
        raise DegenerateRoots(f"roots {roots.roots} are not distinct")
    k = math.sqrt((u3 - u2) / width)
    kappa = math.sqrt(width / 6.0)
    x0 = ellipk(k) / kappa
    c = 2.0 * (u1 + u2 + u3) / 3.0
    return CnoidalParams(k=k, kappa=kappa, u0=u2, x0=x0, wave_speed=c, roots=roots)


def cnoidal(pt: ParamPoint) -> CnoidalParams:
    return cnoidal_from_roots(cubic_roots(pt))


def cnoidal_from_modulus(k: float, *, c: float = 1.0, a: float = 0.0) -> ParamPoint:
    """The KdV point (a, E, c) whose wave has modulus k."""
    if not 0.0 <= k < 1.0:
        raise ValueError("modulus must lie in [0, 1)")
    if c * c + 4.0 * a <= 0.0:
        raise NoWell(f"no periodic KdV waves for a={a}, c={c} (c^2 + 4a <= 0)")
    disc = math.sqrt(c * c + 4.0 * a)
    # for a = 0 and speed c' the roots are c' w_j with w1 + w2 + w3 = 3/2 and
    # vanishing sum of pair products; w2 = w1 + (1 - m) d, w3 = w1 + d
    m = k * k
    d = 1.5 / math.sqrt(1.0 - m + m * m)
    w1 = 0.5 - (2.0 - m) * d / 3.0
    w = np.array([w1, w1 + (1.0 - m) * d, w1 + d]) * disc
    E_red = float(np.prod(w)) / 3.0
    s = 0.5 * (c - disc)
    # undo the shift: u = v + s, E = E' + V(s; a, c)
    E = float(E_red + _V(s, a, c, Nonlinearity.power_law(1)))
    return ParamPoint(a, E, c, Nonlinearity.power_law(1))


# ---------------------------------------------------------------------------
# reductions


@dataclass(frozen=True)
class ScaleReport:
    """Multiply the reduced quantity by these factors to recover the original."""

    c: float
    p: float
    T: float
    M: float
    P: float
    H: float
    K: float
    u: float
    x: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def galilean_reduce(pt: ParamPoint) -> tuple[ParamPoint, float]:
    """Shift u -> u + s so that a = 0; returns (reduced point, s).

    If u solves u'' = a + c u - u^2 then v = u - s solves v'' = c' v - v^2 with
    c' = sqrt(c^2 + 4a).  Under the shift T' = T, M' = M - s T and
    P' = P - 2 s M + s^2 T.
    """
    _require_kdv(pt.nonlinearity)
    if pt.a == 0.0:
        return pt, 0.0
    disc = pt.c * pt.c + 4.0 * pt.a
    if disc <= 0.0:
        raise NotInOmega("c^2 + 4a must be positive for a well to exist")
    cp = math.sqrt(disc)
    s = 0.5 * (pt.c - cp)
    E = pt.E - float(_V(s, pt.a, pt.c, pt.nonlinearity))
    return ParamPoint(0.0, E, cp, pt.nonlinearity), s


def galilean_map(values: dict, s: float) -> dict:
    """Conserved quantities of the reduced wave from those of the original."""
    T, M, P = values["T"], values["M"], values["P"]
    return {"T": T, "M": M - s * T, "P": P - 2.0 * s * M + s * s * T}


def scaling_reduce(pt: ParamPoint) -> tuple[ParamPoint, ScaleReport]:
    """Map a power-law point to c = 1.

    u(x; a, E, c) = c^(1/p) u(c^(1/2) x; a / c^(1+1/p), E / c^(1+2/p), 1).
    """
    nl = pt.nonlinearity
    if nl.kind != "power":
        raise ValueError("scaling reduction needs a power-law nonlinearity")
    c, p = pt.c, nl.p
    if c <= 0.0:
        raise NotInOmega("scaling reduction needs c > 0")
    red = ParamPoint(pt.a / c ** (1.0 + 1.0 / p), pt.E / c ** (1.0 + 2.0 / p), 1.0, nl)
    rep = ScaleReport(c=c, p=p, T=c ** -0.5, M=c ** (1.0 / p - 0.5), P=c ** (2.0 / p - 0.5),
                      H=c ** (2.0 / p + 0.5), K=c ** (2.0 / p + 0.5), u=c ** (1.0 / p), x=c ** -0.5)
    return red, rep


# ---------------------------------------------------------------------------
# the theta measure


def theta_nodes(n: int = 200):
    """Gauss-Legendre nodes and weights on (0, pi/2), weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(n)
    th = 0.25 * math.pi * (x + 1.0)
    return th, 0.5 * w


def jensen_gap(profile, g, h, *, variable: str = "u", n: int = 200) -> float:
    """int g h dmu - int g dmu int h dmu for the normalized d theta measure.

    The measure is uniform in theta on (0, pi/2), pushed to the oscillation
    interval by u = u_- cos^2 theta + u_+ sin^2 theta.  ``variable="theta"``
    hands theta itself to g and h.
    """
    th, w = theta_nodes(n)
    if variable == "theta":
        arg = th
    elif variable == "u":
        pp = profile.phase
        arg = pp.u_minus * np.cos(th) ** 2 + pp.u_plus * np.sin(th) ** 2
    else:
        raise ValueError("variable must be 'u' or 'theta'")
    G, Hh = np.asarray(g(arg), dtype=float), np.asarray(h(arg), dtype=float)
    return float(np.sum(w * G * Hh) - np.sum(w * G) * np.sum(w * Hh))


def sigma_theta(roots: CubicRoots, theta):
    """sigma(theta) = sqrt(s - u1), s = u2 cos^2 theta + u3 sin^2 theta."""
    th = np.asarray(theta, dtype=float)
    s = roots.u2 * np.cos(th) ** 2 + roots.u3 * np.sin(th) ** 2
    return np.sqrt(s - roots.u1)


def cos2_moments(roots: CubicRoots, n: int = 200) -> dict:
    """T, M, P as 2 sqrt(6) int_0^{pi/2} s^j / sigma d theta (valid for c = 1 units)."""
    th, w = theta_nodes(n)
    w = w * (0.5 * math.pi)
    s = roots.u2 * np.cos(th) ** 2 + roots.u3 * np.sin(th) ** 2
    sig = np.sqrt(s - roots.u1)
    pref = 2.0 * math.sqrt(6.0)
    return {"T": pref * float(np.sum(w / sig)), "M": pref * float(np.sum(w * s / sig)),
            "P": pref * float(np.sum(w * s * s / sig))}
