"""Nonlinearities, the effective potential V(u; a, c) and phase-plane geometry.

Traveling waves u(x + ct) of u_t = u_xxx + f(u)_x satisfy

    u_xx + f(u) - c u = a,        1/2 u_x^2 + V(u; a, c) = E,

with V(u; a, c) = F(u) - c/2 u^2 - a u and F' = f, F(0) = 0.  Periodic orbits
live in wells of V.  This module finds the well, its equilibrium, the bounding
saddle and the turning points u_- < u_eq < u_+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from .errors import DegenerateTurningPoint, NoWell

_EPS = np.finfo(float).eps
_BRENT_MAXITER = 2200  # full bisection from O(1) brackets down to subnormal roots


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """The nonlinearity f together with F, f' and f''.

    ``poly`` holds the ascending coefficients of F when F is a polynomial;
    the quadrature then uses exact divided differences of V instead of the
    cancellation-prone difference E - V(u).
    """

    f: Callable
    F: Callable
    df: Callable
    d2f: Callable
    kind: str = "custom"
    p: Optional[float] = None
    name: str = "custom"
    poly: Optional[tuple] = None
    scan_radius: Optional[float] = None

    @classmethod
    def power_law(cls, p: float) -> "Nonlinearity":
        """f(u) = u^(p+1).  Non-integer p uses the odd extension |u|^p u."""
        p = float(p)
        if p < 1:
            raise ValueError(f"power-law exponent must satisfy p >= 1, got {p}")
        if p.is_integer():
            n = int(p)
            poly = [0.0] * (n + 3)
            poly[n + 2] = 1.0 / (n + 2)
            return cls(
                f=lambda u: u ** (n + 1),
                F=lambda u: u ** (n + 2) / (n + 2),
                df=lambda u: (n + 1) * u ** n,
                d2f=lambda u: (n + 1) * n * u ** (n - 1),
                kind="power",
                p=p,
                name=f"u^{n + 1}",
                poly=tuple(poly),
            )
        return cls(
            f=lambda u: np.abs(u) ** p * u,
            F=lambda u: np.abs(u) ** (p + 2) / (p + 2),
            df=lambda u: (p + 1) * np.abs(u) ** p,
            d2f=lambda u: (p + 1) * p * np.abs(u) ** (p - 1) * np.sign(u),
            kind="power",
            p=p,
            name=f"|u|^{p:g} u",
        )

    @classmethod
    def custom(cls, f, F, df, d2f, *, name="custom", poly=None, scan_radius=None):
        return cls(f=f, F=F, df=df, d2f=d2f, kind="custom", name=name,
                   poly=None if poly is None else tuple(float(v) for v in poly),
                   scan_radius=scan_radius)

    @classmethod
    def linear(cls, slope: float) -> "Nonlinearity":
        """f(u) = slope * u; gives an exactly harmonic (isochronous) well."""
        s = float(slope)
        return cls.custom(lambda u: s * u, lambda u: 0.5 * s * u * u,
                          lambda u: s + 0.0 * u, lambda u: 0.0 * u,
                          name=f"{s:g} u", poly=(0.0, 0.0, 0.5 * s))

    def describe(self) -> dict:
        return {"kind": self.kind, "p": self.p, "name": self.name}


@dataclass(frozen=True)
class ParamPoint:
    """A point (a, E, c) of the traveling-wave family."""

    a: float
    E: float
    c: float
    nonlinearity: Nonlinearity

    def __post_init__(self):
        for name in ("a", "E", "c"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.c <= 0:
            raise ValueError(f"wave speed must be positive, got c={self.c}")

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.a, self.E, self.c])

    def replace(self, **kw) -> "ParamPoint":
        d = {"a": self.a, "E": self.E, "c": self.c, "nonlinearity": self.nonlinearity}
        d.update(kw)
        return ParamPoint(**d)

    def shifted(self, index: int, h: float) -> "ParamPoint":
        q = self.coords
        q[index] += h
        return ParamPoint(q[0], q[1], q[2], self.nonlinearity)


@dataclass(frozen=True)
class PhasePlane:
    """Geometry of the potential well containing the orbit.

    ``well_poly`` are the Taylor coefficients of V about u_eq (constant and
    linear terms zeroed) when V is polynomial, else ``None``.
    """

    u_minus: float
    u_plus: float
    u_eq: float
    E_star: float
    E_sep: float
    in_omega: bool
    u_saddle: Optional[float]
    Vpp_eq: float
    E: float
    well_poly: Optional[tuple] = None
    u_left_max: Optional[float] = None
    u_right_max: Optional[float] = None

    @property
    def delta_E(self) -> float:
        return self.E - self.E_star

    @property
    def half_width(self) -> float:
        return 0.5 * (self.u_plus - self.u_minus)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.u_plus + self.u_minus)


def effective_potential(u, pt: ParamPoint):
    """V(u; a, c) = F(u) - c/2 u^2 - a u."""
    return pt.nonlinearity.F(u) - 0.5 * pt.c * u * u - pt.a * u


def _V(u, a, c, nl):
    return nl.F(u) - 0.5 * c * u * u - a * u


def _dV(u, a, c, nl):
    return nl.f(u) - c * u - a


def _d2V(u, a, c, nl):
    return nl.df(u) - c


def _scan_radius(a: float, c: float, nl: Nonlinearity) -> float:
    if nl.scan_radius is not None:
        return float(nl.scan_radius)
    if nl.kind == "power":
        p = nl.p
        return 4.0 * max(1.0, (2.0 * c) ** (1.0 / p), abs(a) ** (1.0 / (p + 1.0)))
    return 10.0 * max(1.0, c, abs(a))


def critical_points(a: float, c: float, nl: Nonlinearity) -> list[tuple[float, float, float]]:
    """All simple critical points of V as sorted (u, V(u), V''(u)) triples.

    Sign changes of V' are bracketed on a geometric grid symmetric about 0 and
    polished with Newton steps.
    """
    R = _scan_radius(a, c, nl)
    g = np.geomspace(1e-12, 1.0, 800) * R
    grid = np.concatenate([-g[::-1], [0.0], g])
    dv = _dV(grid, a, c, nl)
    roots = []
    for i in np.nonzero(np.sign(dv[:-1]) * np.sign(dv[1:]) <= 0)[0]:
        lo, hi = grid[i], grid[i + 1]
        if dv[i] == 0.0:
            r = lo
        elif dv[i + 1] == 0.0:
            continue  # picked up as the left end of the next cell
        else:
            r = brentq(_dV, lo, hi, args=(a, c, nl), xtol=1e-300, rtol=4 * _EPS, maxiter=_BRENT_MAXITER)
        for _ in range(2):
            d2 = _d2V(r, a, c, nl)
            if d2 == 0.0:
                break
            step = _dV(r, a, c, nl) / d2
            if abs(step) > (hi - lo):
                break
            r -= step
        roots.append(float(r))
    out = []
    for r in sorted(set(roots)):
        d2 = float(_d2V(r, a, c, nl))
        if d2 == 0.0:
            continue
        out.append((r, float(_V(r, a, c, nl)), d2))
    return out


def _wells(crit):
    """For each local minimum: (index, left max or None, right max or None)."""
    wells = []
    for i, (u, v, d2) in enumerate(crit):
        if d2 <= 0:
            continue
        left = crit[i - 1] if i > 0 and crit[i - 1][2] < 0 else None
        right = crit[i + 1] if i + 1 < len(crit) and crit[i + 1][2] < 0 else None
        wells.append((i, left, right))
    return wells


def _sep(left, right):
    cands = [(m[1], m[0]) for m in (left, right) if m is not None]
    if not cands:
        return math.inf, None
    v, u = min(cands)
    return v, u


def _select_well(crit, E):
    wells = _wells(crit)
    if not wells:
        raise NoWell("effective potential has no local minimum")
    inside = [w for w in wells if crit[w[0]][1] < E < _sep(w[1], w[2])[0]]
    if inside:
        return inside[-1], True
    below = [w for w in wells if crit[w[0]][1] < E]
    return (below[-1] if below else wells[-1]), False


def separatrix_energy(a: float, c: float, nl: Nonlinearity, E: Optional[float] = None) -> float:
    """Potential value at the saddle bounding the well (``inf`` if unbounded).

    Without ``E`` the rightmost well is used; with ``E`` the same well that
    :func:`analyze_phase_plane` would pick.
    """
    crit = critical_points(a, c, nl)
    if E is None:
        wells = _wells(crit)
        if not wells:
            raise NoWell("effective potential has no local minimum")
        w = wells[-1]
    else:
        w, _ = _select_well(crit, E)
    return _sep(w[1], w[2])[0]


def _shifted_poly(a, c, nl, u0):
    """Taylor coefficients of V about u0 with the constant and linear terms zeroed."""
    if nl.poly is None:
        return None
    coeffs = np.zeros(max(len(nl.poly), 3))
    coeffs[: len(nl.poly)] += nl.poly
    coeffs[2] -= 0.5 * c
    coeffs[1] -= a
    # compose V(u0 + w): Horner in polynomial arithmetic
    out = np.array([coeffs[-1]])
    for ck in coeffs[-2::-1]:
        out = npoly.polyadd(npoly.polymul(out, [u0, 1.0]), [ck])
    out = np.asarray(out, dtype=float)
    out = np.concatenate([out, np.zeros(max(0, 3 - len(out)))])
    out[0] = 0.0
    out[1] = 0.0
    return tuple(out)


def well_offset(w, poly):
    """W(w) = V(u_eq + w) - V(u_eq) from shifted Taylor coefficients (Horner)."""
    acc = 0.0
    for ck in poly[:1:-1]:
        acc = acc * w + ck
    return acc * w * w


def well_offset_slope(w, poly):
    acc = 0.0
    n = len(poly) - 1
    for k in range(n, 0, -1):
        acc = acc * w + k * poly[k]
    return acc


def _turning_point(side, dE, u_eq, bound, a, c, nl, poly):
    """Solve W(w) = dE on one side of the equilibrium."""
    if poly is not None:
        W = lambda w: well_offset(w, poly) - dE
        dW = lambda w: well_offset_slope(w, poly)
    else:
        E_star = _V(u_eq, a, c, nl)
        W = lambda w: (_V(u_eq + w, a, c, nl) - E_star) - dE
        dW = lambda w: _dV(u_eq + w, a, c, nl)
    if bound is not None:
        far = bound - u_eq
    else:
        far = side * max(1.0, abs(u_eq))
        for _ in range(200):
            if W(far) > 0:
                break
            far *= 2.0
        else:
            raise NoWell("turning point search diverged")
    lo, hi = (far, 0.0) if side < 0 else (0.0, far)
    w = brentq(W, lo, hi, xtol=1e-300, rtol=4 * _EPS, maxiter=_BRENT_MAXITER)
    for _ in range(3):
        d = dW(w)
        if d == 0.0:
            break
        step = W(w) / d
        if not (lo <= w - step <= hi):
            break
        w -= step
    return u_eq + w


def analyze_phase_plane(pt: ParamPoint) -> PhasePlane:
    """Locate the well, its equilibrium, separatrix energy and turning points.

    Returns a :class:`PhasePlane` with ``in_omega`` false (and NaN turning
    points) when E is outside (E*, E_sep).  Raises :class:`NoWell` if V has no
    local minimum and :class:`DegenerateTurningPoint` if a turning point is
    numerically a double root.
    """
    a, E, c, nl = pt.a, pt.E, pt.c, pt.nonlinearity
    crit = critical_points(a, c, nl)
    (idx, left, right), ok = _select_well(crit, E)
    u_eq, E_star, vpp = crit[idx]
    E_sep, u_s = _sep(left, right)
    poly = _shifted_poly(a, c, nl, u_eq)
    common = dict(u_eq=u_eq, E_star=E_star, E_sep=E_sep, u_saddle=u_s, Vpp_eq=vpp, E=E,
                  well_poly=poly,
                  u_left_max=None if left is None else left[0],
                  u_right_max=None if right is None else right[0])
    if not ok or not (E_star < E < E_sep):
        return PhasePlane(u_minus=math.nan, u_plus=math.nan, in_omega=False, **common)

    dE = E - E_star
    um = _turning_point(-1, dE, u_eq, None if left is None else left[0], a, c, nl, poly)
    up = _turning_point(+1, dE, u_eq, None if right is None else right[0], a, c, nl, poly)
    dvm, dvp = _dV(um, a, c, nl), _dV(up, a, c, nl)
    thresh = 1e-10 * (1.0 + abs(vpp) * abs(up - um))
    if abs(dvm) < thresh or abs(dvp) < thresh or not (um < u_eq < up):
        raise DegenerateTurningPoint(
            f"turning points u-={um:.6g}, u+={up:.6g} are not simple (V'={dvm:.3g}, {dvp:.3g})")
    return PhasePlane(u_minus=float(um), u_plus=float(up), in_omega=True, **common)


def equilibrium(a: float, c: float, nl: Nonlinearity, E: Optional[float] = None) -> tuple[float, float, float]:
    """(u_eq, E_star, V''(u_eq)) of the selected well."""
    crit = critical_points(a, c, nl)
    if E is None:
        wells = _wells(crit)
        if not wells:
            raise NoWell("effective potential has no local minimum")
        idx = wells[-1][0]
    else:
        (idx, _, _), _ = _select_well(crit, E)
    return crit[idx]
