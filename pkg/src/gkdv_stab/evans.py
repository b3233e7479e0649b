"""Monodromy of the linearized operator and the periodic Evans function.

The eigenvalue problem d/dx L[u] v = mu v, L[u] = -d^2/dx^2 - f'(u) + c, is
written as the first-order system Phi' = H(x, mu) Phi with the companion
matrix

    H = [[0, 1, 0], [0, 0, 1], [-mu - u_x f''(u), c - f'(u), 0]].

The wave profile is integrated together with all requested fundamental
matrices in one ODE solve.  Sharing the step sequence across a batch of mu
values makes the discrete period map a smooth function of mu, which is what
finite differences in mu need.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .calculus import batched_derivative
from .errors import FitConditioning, IntegratorTolFail, StepUnderflow
from .potential import ParamPoint, PhasePlane, equilibrium
from .quadrature import WaveProfile, conserved_set, reconstruct_profile

MONODROMY_RTOL = 1e-12
MONODROMY_ATOL = 1e-14


def equilibrium_profile(a: float, c: float, nl, *, T: float | None = None) -> WaveProfile:
    """The constant solution u = u_eq viewed as a wave of period T.

    The default period is the small-amplitude limit 2 pi / sqrt(V''(u_eq)).
    """
    u_eq, E_star, vpp = equilibrium(a, c, nl)
    T = 2.0 * math.pi / math.sqrt(vpp) if T is None else float(T)
    pt = ParamPoint(a, E_star, c, nl)
    pp = PhasePlane(u_minus=u_eq, u_plus=u_eq, u_eq=u_eq, E_star=E_star, E_sep=math.nan,
                    in_omega=False, u_saddle=None, Vpp_eq=vpp, E=E_star)
    x = np.array([0.0, T])
    return WaveProfile(param=pt, phase=pp, T=T, x=x, u=np.full(2, u_eq), ux=np.zeros(2))


def wave_profile(pt: ParamPoint, n_samples: int = 256) -> WaveProfile:
    """Profile used by the spectral routines (quadrature period, theta samples)."""
    return reconstruct_profile(pt, n_samples)


@dataclass(frozen=True)
class MonodromyData:
    mu: complex
    matrix: np.ndarray
    integrator_stats: dict = field(default_factory=dict)

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


@dataclass(frozen=True)
class EvansSample:
    mu: complex
    lam: complex
    value: complex


def monodromy_batch(profile: WaveProfile, mus, *, rtol: float = MONODROMY_RTOL,
                    atol: float = MONODROMY_ATOL, return_stats: bool = False):
    """Period maps M(mu) for every mu in ``mus`` from a single integration.

    Returns an array of shape (len(mus), 3, 3), real when all mu are real.
    """
    pt = profile.param
    nl = pt.nonlinearity
    c = pt.c
    mus = np.atleast_1d(np.asarray(mus))
    cplx = np.iscomplexobj(mus) and np.any(mus.imag != 0)
    dtype = complex if cplx else float
    mus = mus.astype(complex) if cplx else np.real(mus).astype(float)
    n = mus.size
    y0 = np.zeros(2 + 9 * n, dtype=dtype)
    y0[0], y0[1] = profile.u[0], profile.ux[0]
    y0[2:] = np.tile(np.eye(3).ravel(), n)
    a, f, df, d2f = pt.a, nl.f, nl.df, nl.d2f

    def rhs(x, y):
        u, ux = y[0].real, y[1].real
        out = np.empty_like(y)
        out[0] = ux
        out[1] = a + c * u - f(u)
        phi = y[2:].reshape(n, 3, 3)
        d = np.empty_like(phi)
        d[:, 0] = phi[:, 1]
        d[:, 1] = phi[:, 2]
        d[:, 2] = (-mus - ux * d2f(u))[:, None] * phi[:, 0] + (c - df(u)) * phi[:, 1]
        out[2:] = d.ravel()
        return out

    sol = solve_ivp(rhs, (0.0, profile.T), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegratorTolFail(f"monodromy integration failed: {sol.message}")
    mats = sol.y[2:, -1].reshape(n, 3, 3)
    if return_stats:
        closure = float(abs(sol.y[0, -1] - profile.u[0]) + abs(sol.y[1, -1] - profile.ux[0]))
        stats = {"nfev": int(sol.nfev), "steps": int(sol.t.size - 1), "rtol": rtol,
                 "profile_closure": closure}
        return mats, stats
    return mats


def monodromy(profile: WaveProfile, mu: complex, **kw) -> MonodromyData:
    mats, stats = monodromy_batch(profile, [mu], return_stats=True, **kw)
    m = mats[0]
    stats["det_deviation"] = float(abs(np.linalg.det(m) - 1.0))
    return MonodromyData(mu=complex(mu), matrix=m, integrator_stats=stats)


def evans_values(mats: np.ndarray, lam: complex = 1.0) -> np.ndarray:
    """D = det(M - lam I) for a stack of period maps."""
    eye = np.eye(3)
    vals = np.linalg.det(mats - lam * eye)
    return vals


def evans(profile: WaveProfile, mu: complex, lam: complex = 1.0, **kw) -> EvansSample:
    m = monodromy_batch(profile, [mu], **kw)
    return EvansSample(mu=complex(mu), lam=complex(lam), value=complex(evans_values(m, lam)[0]))


def evans_scan(profile: WaveProfile, mus, lam: complex = 1.0, **kw) -> list[EvansSample]:
    mats = monodromy_batch(profile, mus, **kw)
    vals = evans_values(mats, lam)
    return [EvansSample(mu=complex(m), lam=complex(lam), value=complex(v)) for m, v in zip(mus, vals)]


def write_evans_csv(path, samples: list[EvansSample]) -> None:
    """CSV with columns mu, D_real, D_imag (mu written as its real part when real)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "D_real", "D_imag"])
        for s in samples:
            mu = repr(s.mu.real) if s.mu.imag == 0 else repr(s.mu)
            w.writerow([mu, repr(s.value.real), repr(s.value.imag)])


def mu_scale(profile: WaveProfile) -> float:
    """Natural size of mu, (2 pi / T)^3: mu carries units of x^-3."""
    return (2.0 * math.pi / profile.T) ** 3


def tr_mu_derivatives(profile: WaveProfile, order: int = 3, *, h0: float | None = None,
                      ntab: int = 8, return_error: bool = False):
    """order-th derivative of mu -> tr M(mu) at mu = 0.

    Central differences refined by Ridders' tableau; every stencil of the
    tableau is evaluated in one batched integration.
    """
    h0 = 0.2 * mu_scale(profile) if h0 is None else h0

    def traces(mus):
        return np.trace(monodromy_batch(profile, mus), axis1=1, axis2=2)

    d, err = batched_derivative(traces, h0, order, ntab=ntab)
    if not np.isfinite(err):
        raise StepUnderflow("no usable step for the mu-derivative of tr M")
    return (d, err) if return_error else d


def trace_identity_index(profile: WaveProfile) -> float:
    """-(2/3) tr M'''(0), an Evans-side estimate of {T,M,P}_{a,E,c}."""
    return -2.0 / 3.0 * tr_mu_derivatives(profile, 3)


def equilibrium_trace_third(vpp: float) -> float:
    """Closed form of tr M'''(0) for the constant profile with period 2 pi / sqrt(V'')."""
    return -6.0 * math.pi ** 3 / vpp ** 4.5


@dataclass(frozen=True)
class CubicFit:
    c3: float
    c5: float
    index: float  # -2 c3
    residual: float
    odd_residual: float
    condition: float


def evans_cubic_fit(profile: WaveProfile, *, lo: float = 1e-3, hi: float = 1e-1, n: int = 24,
                    terms: int = 3) -> CubicFit:
    """Least-squares odd fit of D(mu, 1) on mu in +-[lo, hi] * scale.

    ``terms`` odd powers starting at mu^3 are used (mu^3, mu^5, mu^7 by
    default; the mu^7 term absorbs truncation bias of the two-term model).
    """
    s = mu_scale(profile)
    pos = np.geomspace(lo, hi, n) * s
    mus = np.concatenate([pos, -pos])
    D = evans_values(monodromy_batch(profile, mus))
    Dp, Dm = D[:n], D[n:]
    odd = 0.5 * (Dp - Dm)
    even = 0.5 * (Dp + Dm)
    scale = np.max(np.abs(odd))
    odd_res = float(np.max(np.abs(even)) / scale)
    x = pos / s
    A = np.column_stack([x ** (3 + 2 * k) for k in range(terms)])
    # uniform weights: the large-mu samples carry the signal, the smallest ones
    # mostly integration noise
    w = np.full_like(odd, 1.0 / scale)
    Aw = A * w[:, None]
    cond = float(np.linalg.cond(Aw))
    if not np.isfinite(cond) or cond > 1e12:
        raise FitConditioning(f"Evans fit condition number {cond:.3g}")
    coef, *_ = np.linalg.lstsq(Aw, odd * w, rcond=None)
    resid = float(np.max(np.abs(A @ coef - odd)) / scale)
    c3 = coef[0] / s ** 3
    c5 = coef[1] / s ** 5 if terms > 1 else 0.0
    return CubicFit(c3=float(c3), c5=float(c5), index=float(-2.0 * c3), residual=resid,
                    odd_residual=odd_res, condition=cond)


def evans_cubic_coefficient(profile: WaveProfile, **kw) -> float:
    """-2 c3 from the odd fit of D(mu, 1): an estimate of {T,M,P}_{a,E,c}."""
    return evans_cubic_fit(profile, **kw).index


def _D1(profile, mus):
    return evans_values(monodromy_batch(profile, np.asarray(mus, dtype=float))).real


def large_mu_sign(profile: WaveProfile, *, start: float | None = None, max_doublings: int = 40):
    """Smallest probed mu beyond which D(mu, 1) stays negative, and D there."""
    mu = 10.0 * mu_scale(profile) if start is None else start
    for _ in range(max_doublings):
        grid = mu * np.array([1.0, 1.5, 2.0, 3.0, 4.0])
        D = _D1(profile, grid)
        if np.all(D < 0):
            return mu, float(D[0])
        mu *= 4.0
    return mu, float(_D1(profile, [mu])[0])


def real_unstable_roots(profile: WaveProfile, mu_max: float | None = None, *, n_grid: int = 400,
                        xtol: float = 1e-10) -> list[float]:
    """Positive real roots of mu -> D(mu, 1) on (0, mu_max].

    ``mu_max`` defaults to a point past which D is negative (the large-mu
    sign), found by expansion.  Sign changes on a geometric grid are refined
    by Brent's method.
    """
    s = mu_scale(profile)
    if mu_max is None:
        mu_max, _ = large_mu_sign(profile)
        mu_max *= 4.0
    grid = np.geomspace(1e-3 * s, mu_max, n_grid)
    D = _D1(profile, grid)
    roots = []
    for i in np.nonzero(np.sign(D[:-1]) * np.sign(D[1:]) < 0)[0]:
        r = brentq(lambda m: _D1(profile, [m])[0], grid[i], grid[i + 1], xtol=xtol * max(1.0, grid[i]),
                   rtol=1e-13)
        roots.append(float(r))
    return roots


def index_triplet(pt: ParamPoint, profile: WaveProfile | None = None) -> dict:
    """Evans-side index estimates at ``pt`` (cubic fit and trace identity)."""
    profile = reconstruct_profile(pt, 256) if profile is None else profile
    return {"cubic_fit": evans_cubic_coefficient(profile),
            "trace_identity": trace_identity_index(profile)}
