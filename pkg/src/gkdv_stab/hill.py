"""The Hill operator L[u] = -d^2/dx^2 - f'(u) + c on T-periodic functions.

Periodic eigenvalues are the roots of Delta(nu) = 2, where Delta is the trace
of the 2x2 monodromy of L v = nu v.  Zero is always one of them (v = u_x).
Near nu = 0 the kernel is spanned by u_x and the non-periodic u_E, which
satisfies u_E(x + T) = u_E(x) - T_E u_x(x); in the basis (u_E, -u_x) the
monodromy at nu = 0 is therefore [[1, T_E], [0, 1]].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .calculus import batched_derivative, gradients, jacobian_brackets
from .errors import GridTooCoarse, IntegratorTolFail, PhaseMismatch
from .potential import ParamPoint, _dV, analyze_phase_plane
from .quadrature import WaveProfile, conserved_set, reconstruct_profile

HILL_RTOL = 1e-12
HILL_ATOL = 1e-14


def hill_monodromy_batch(profile: WaveProfile, nus, *, rtol: float = HILL_RTOL,
                         atol: float = HILL_ATOL) -> np.ndarray:
    """Standard-basis monodromies of v'' = (c - f'(u) - nu) v, shape (n, 2, 2)."""
    pt = profile.param
    nl = pt.nonlinearity
    a, c = pt.a, pt.c
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    n = nus.size
    y0 = np.zeros(2 + 4 * n)
    y0[0], y0[1] = profile.u[0], profile.ux[0]
    y0[2:] = np.tile(np.eye(2).ravel(), n)

    def rhs(x, y):
        u = y[0]
        out = np.empty_like(y)
        out[0] = y[1]
        out[1] = a + c * u - nl.f(u)
        Y = y[2:].reshape(n, 2, 2)
        d = np.empty_like(Y)
        d[:, 0] = Y[:, 1]
        d[:, 1] = (c - nl.df(u) - nus)[:, None] * Y[:, 0]
        out[2:] = d.ravel()
        return out

    sol = solve_ivp(rhs, (0.0, profile.T), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegratorTolFail(f"Hill monodromy integration failed: {sol.message}")
    return sol.y[2:, -1].reshape(n, 2, 2)


def discriminant(profile: WaveProfile, nus) -> np.ndarray:
    """Delta(nu) = tr of the Hill monodromy."""
    return np.trace(hill_monodromy_batch(profile, nus), axis1=1, axis2=2)


def nu_range(profile: WaveProfile) -> float:
    """nu_max = c + max|f'(u)| + 10 (2 pi / T)^2."""
    pt = profile.param
    fmax = float(np.max(np.abs(pt.nonlinearity.df(profile.u))))
    return pt.c + fmax + 10.0 * (2.0 * math.pi / profile.T) ** 2


@dataclass(frozen=True)
class HillReport:
    neg_count: int
    zero_multiplicity: int
    m0: np.ndarray
    T_E_monodromy: float
    tr_m_mu0: float
    delta_at_zero: float
    discriminant_samples: list = field(repr=False, default_factory=list)
    T_E: float | None = None
    band: float | None = None

    def krein_consistent(self) -> bool | None:
        """sign(Delta'(0)) == sign(T_E); None when T_E lies in the band."""
        if self.T_E is None or self.band is None or abs(self.T_E) <= self.band:
            return None
        return bool(np.sign(self.tr_m_mu0) == np.sign(self.T_E))

    def to_dict(self) -> dict:
        return {"neg_count": self.neg_count, "zero_multiplicity": self.zero_multiplicity,
                "m0": self.m0.tolist(), "T_E_monodromy": self.T_E_monodromy,
                "tr_m_mu0": self.tr_m_mu0, "delta_at_zero": self.delta_at_zero,
                "T_E": self.T_E, "band": self.band}


def _count_crossings(delta, level=2.0):
    s = np.sign(delta - level)
    return int(np.count_nonzero(s[:-1] * s[1:] < 0))


def _negative_count(profile, nu_min, n_nu):
    # stop short of 0 so the translation eigenvalue itself is not counted
    gap = 1e-3 * (2.0 * math.pi / profile.T) ** 2
    grid = np.linspace(nu_min, -gap, n_nu)
    delta = discriminant(profile, grid)
    return _count_crossings(delta), grid, delta


def hill_report(profile: WaveProfile, *, T_E: float | None = None, band: float | None = None,
                n_nu: int = 400, check_refinement: bool = True) -> HillReport:
    """Negative periodic eigenvalues, zero structure and Krein sign of L[u].

    ``T_E`` and ``band`` (the tolerance band on T_E) decide the multiplicity
    of the zero eigenvalue; without them the value read off the monodromy is
    used with a band of 1e-8 relative to the period.
    """
    pt = profile.param
    nmax = nu_range(profile)
    count, grid, delta = _negative_count(profile, -nmax, n_nu)
    if check_refinement:
        count2, _, _ = _negative_count(profile, -nmax, 2 * n_nu)
        if count2 != count:
            raise GridTooCoarse(f"negative eigenvalue count changed from {count} to {count2} "
                                "under grid refinement")

    # monodromy at nu = 0 in the basis (u_E, -u_x)
    S = hill_monodromy_batch(profile, [0.0])[0]
    vm = float(_dV(profile.u[0], pt.a, pt.c, pt.nonlinearity))
    B = np.array([[1.0 / vm, 0.0], [0.0, vm]])
    m0 = (np.linalg.solve(B, S @ B)).T
    T_E_mono = float(m0[0, 1])
    delta0 = float(np.trace(S))

    h0 = 0.05 * (2.0 * math.pi / profile.T) ** 2
    dprime, _ = batched_derivative(lambda nus: discriminant(profile, nus), h0, 1)

    if T_E is None:
        T_E, band = T_E_mono, 1e-8 * profile.T if band is None else band
    elif band is None:
        band = 1e-8 * max(1.0, abs(T_E))
    zero_mult = 2 if abs(T_E) <= band else 1
    samples = list(zip(grid.tolist(), delta.tolist()))
    return HillReport(neg_count=count, zero_multiplicity=zero_mult, m0=m0, T_E_monodromy=T_E_mono,
                      tr_m_mu0=float(dprime), delta_at_zero=delta0, discriminant_samples=samples,
                      T_E=float(T_E), band=float(band))


def write_discriminant_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nu", "Delta"])
        for nu, d in samples:
            w.writerow([repr(float(nu)), repr(float(d))])


# ---------------------------------------------------------------------------
# phi_0 = {u, T, M}_{a,E,c}


@dataclass(frozen=True)
class Phi0Data:
    """phi_0 on a uniform grid of one period and its identities.

    ``rhs`` is the value L[u] phi_0 must take, -{T,M}_{E,c} - {T,M}_{a,E} u.
    ``inner_u`` equals (1/2){T,M,P}_{a,E,c} with P the integral of u^2.
    """

    x: np.ndarray
    u: np.ndarray
    phi0: np.ndarray
    L_phi0: np.ndarray
    rhs: np.ndarray
    residual: float
    residual_abs: float
    inner_one: float
    inner_u: float
    pairing: float
    brackets: dict
    periodicity_gap: float

    def expected_pairing(self) -> float:
        """-{T,M}_{a,E} <u, phi_0>-consistent value: -{T,M}_{a,E} {T,M,P}_{a,E,c} / 2."""
        return -self.brackets["bracket_TM_aE"] * 0.5 * self.brackets["bracket_TMP_aEc"]


def parameter_derivatives(pt: ParamPoint, n: int, T: float | None = None, *,
                          rtol: float = 1e-13) -> tuple:
    """u, u_x and (u_a, u_E, u_c) on x_j = j T / n from the variational equations.

    The derivatives are taken at fixed x with the trough pinned at x = 0, so
    u_p(0) = du_-/dp and u_p'(0) = 0.  They solve L u_a = -1, L u_E = 0 and
    L u_c = -u.
    """
    pp = analyze_phase_plane(pt)
    T = conserved_set(pt, pp).T if T is None else T
    nl, a, c = pt.nonlinearity, pt.a, pt.c
    um = pp.u_minus
    vm = float(_dV(um, a, c, nl))
    y0 = [um, 0.0, um / vm, 0.0, 1.0 / vm, 0.0, 0.5 * um * um / vm, 0.0]

    def rhs(x, y):
        u = y[0]
        k = c - nl.df(u)
        return [y[1], a + c * u - nl.f(u),
                y[3], 1.0 + k * y[2],
                y[5], k * y[4],
                y[7], u + k * y[6]]

    xs = np.arange(n + 1) * (T / n)
    sol = solve_ivp(rhs, (0.0, T), y0, method="DOP853", t_eval=xs, rtol=rtol,
                    atol=1e-14 * max(1.0, abs(um)))
    if not sol.success:
        raise IntegratorTolFail(f"variational integration failed: {sol.message}")
    Y = sol.y
    return xs, Y[0], Y[1], Y[2], Y[4], Y[6]


def _spectral_second_derivative(v, T):
    n = v.size
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=T / n)
    vh = np.fft.rfft(v)
    if n % 2 == 0:
        vh[-1] = 0.0
    return np.fft.irfft(-(k ** 2) * vh, n)


def _tail(v):
    vh = np.abs(np.fft.rfft(v))
    m = vh.size
    return float(np.max(vh[3 * m // 4:]) / np.max(vh))


def build_phi0(pt: ParamPoint, *, n: int | None = None, table=None, max_n: int = 8192) -> Phi0Data:
    """phi_0 = u_a {T,M}_{E,c} - u_E {T,M}_{a,c} + u_c {T,M}_{a,E} and its identities.

    L[u] phi_0 is applied by Fourier differentiation; the grid is doubled
    until the Fourier tail of phi_0 is below 1e-13 of its peak.
    """
    table = gradients(pt) if table is None else table
    br = jacobian_brackets(table)
    T = table.values["T"]
    b_Ec, b_ac, b_aE = br.bracket_TM_Ec, br.bracket_TM_ac, br.bracket_TM_aE
    n = 256 if n is None else n
    while True:
        xs, u, ux, ua, uE, uc = parameter_derivatives(pt, n, T)
        phi_full = ua * b_Ec - uE * b_ac + uc * b_aE
        if n >= max_n or _tail(phi_full[:-1]) < 1e-13:
            break
        n *= 2
    scale_phi = float(np.max(np.abs(phi_full)))
    gap = float(abs(phi_full[-1] - phi_full[0]) / scale_phi)
    if gap > 1e-6:
        raise PhaseMismatch(f"phi_0 is not periodic (relative gap {gap:.2e})")
    x, u, phi = xs[:-1], u[:-1], phi_full[:-1]
    nl = pt.nonlinearity
    Lphi = -_spectral_second_derivative(phi, T) - nl.df(u) * phi + pt.c * phi
    rhs = -b_Ec - b_aE * u
    res_abs = float(np.max(np.abs(Lphi - rhs)))
    res = res_abs / float(np.max(np.abs(rhs)))
    dx = T / n
    return Phi0Data(
        x=x, u=u, phi0=phi, L_phi0=Lphi, rhs=rhs, residual=res, residual_abs=res_abs,
        inner_one=float(np.sum(phi) * dx), inner_u=float(np.sum(u * phi) * dx),
        pairing=float(np.sum(Lphi * phi) * dx),
        brackets={k: v for k, v in br.as_dict().items() if k not in ("hessian_K", "errors")},
        periodicity_gap=gap,
    )
