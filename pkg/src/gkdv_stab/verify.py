"""Self-checks: identity suites with residuals against fixed tolerances."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .calculus import equilibrium_ma, gradients, jacobian_brackets, ma_sign_probe
from .evans import (equilibrium_profile, equilibrium_trace_third, evans_cubic_fit, evans_values,
                    large_mu_sign, monodromy_batch, mu_scale, real_unstable_roots, trace_identity_index)
from .errors import GkdvError
from .hill import build_phi0, hill_report
from .indices import Verdict, classify
from .kdv import cnoidal, cnoidal_from_modulus
from .potential import Nonlinearity, ParamPoint, analyze_phase_plane, equilibrium, separatrix_energy
from .quadrature import conserved_set, reconstruct_profile


@dataclass
class SuiteResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0
    points: int = 0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return (f"{mark}  {self.name:<28s} residual={self.residual:.3e} tol={self.tolerance:.1e} "
                f"n={self.points} ({self.seconds:.1f}s){'  ' + self.detail if self.detail else ''}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# ---------------------------------------------------------------------------
# sampling


def energy_at(p: float, a: float, c: float, s: float) -> ParamPoint:
    """The point with E = E* + s (E_sep - E*) for the power law u^(p+1)."""
    nl = Nonlinearity.power_law(p)
    _, E_star, _ = equilibrium(a, c, nl)
    E_sep = separatrix_energy(a, c, nl)
    return ParamPoint(a, E_star + s * (E_sep - E_star), c, nl)


def sample_omega(p: float, n: int, *, seed: int = 0, s_range=(0.05, 0.95), a_range=(-0.2, 0.2),
                 c_range=(0.5, 2.0)) -> list[ParamPoint]:
    """n reproducible points of Omega for the power law with exponent p.

    a is drawn in units of c^(1 + 1/p), so the reduced parameter a~ lies in
    ``a_range``; E is placed at a fraction s of the way from E* to E_sep.
    """
    rng = np.random.default_rng(seed)
    out = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > 100 * n:
            raise RuntimeError("could not sample enough points of Omega")
        c = float(rng.uniform(*c_range))
        a = float(rng.uniform(*a_range)) * c ** (1.0 + 1.0 / p)
        s = float(rng.uniform(*s_range))
        try:
            pt = energy_at(p, a, c, s)
        except GkdvError:
            continue
        if analyze_phase_plane(pt).in_omega:
            out.append(pt)
    return out


def mixed_sample(n: int, ps=(1, 2, 3, 5), seed: int = 0, **kw) -> list[ParamPoint]:
    pts = []
    for i, p in enumerate(ps):
        m = n // len(ps) + (1 if i < n % len(ps) else 0)
        pts.extend(sample_omega(p, m, seed=seed + i, **kw))
    return pts


def near_homoclinic_p5(delta: float = 1e-4) -> ParamPoint:
    return energy_at(5, 0.0, 1.0, 1.0 - delta)


# ---------------------------------------------------------------------------
# suites


def _timed(name, tol, fn):
    t0 = time.perf_counter()
    try:
        res, n, detail = fn()
        ok = bool(np.isfinite(res) and res <= tol)
    except GkdvError as exc:
        res, n, detail, ok = math.inf, 0, f"{type(exc).__name__}: {exc}", False
    return SuiteResult(name, ok, float(res), tol, detail, time.perf_counter() - t0, n)


def suite_action_identity(points, tol=1e-6) -> SuiteResult:
    def run():
        r = [gradients(pt, check=False).action_residual() for pt in points]
        return max(r), len(points), ""
    return _timed("action_identity", tol, run)


def suite_overdetermined(points, tol=1e-6) -> SuiteResult:
    def run():
        r = [gradients(pt, check=False).overdetermined_residual() for pt in points]
        return max(r), len(points), ""
    return _timed("overdetermined_identity", tol, run)


def suite_evans_index(points, tol=1e-3) -> SuiteResult:
    """{T,M,P} from gradients, the Evans cubic fit and the trace identity."""
    def run():
        worst = 0.0
        for pt in points:
            b = jacobian_brackets(gradients(pt, check=False)).bracket_TMP_aEc
            prof = reconstruct_profile(pt, 256)
            fit = evans_cubic_fit(prof).index
            tr = trace_identity_index(prof)
            vals = [b, fit, tr]
            worst = max(worst, max(abs(x - y) / max(abs(x), abs(y))
                                   for i, x in enumerate(vals) for y in vals[i + 1:]))
        return worst, len(points), ""
    return _timed("evans_index_equivalence", tol, run)


def suite_equilibrium_period(tol=1e-3) -> SuiteResult:
    def run():
        worst, n = 0.0, 0
        for p in (1, 2, 3):
            for c in (1.0, 2.0):
                nl = Nonlinearity.power_law(p)
                _, E_star, _ = equilibrium(0.0, c, nl)
                T = conserved_set(ParamPoint(0.0, E_star + 1e-6, c, nl)).T
                worst = max(worst, abs(T / (2.0 * math.pi / math.sqrt(c * p)) - 1.0))
                n += 1
        return worst, n, ""
    return _timed("equilibrium_period", tol, run)


EQUILIBRIUM_TRACE_CASES = ((1, 0.0, 1.0), (2, 0.0, 1.0), (3, 0.0, 2.0), (1, 0.2, 1.5), (5, 0.05, 1.0))


def suite_equilibrium_trace(tol=1e-3, cases=EQUILIBRIUM_TRACE_CASES) -> SuiteResult:
    def run():
        from .evans import tr_mu_derivatives
        worst = 0.0
        for p, a, c in cases:
            nl = Nonlinearity.power_law(p)
            _, _, vpp = equilibrium(a, c, nl)
            d3 = tr_mu_derivatives(equilibrium_profile(a, c, nl), 3)
            worst = max(worst, abs(d3 / equilibrium_trace_third(vpp) - 1.0))
        return worst, len(cases), ""
    return _timed("equilibrium_trace_closed_form", tol, run)


def suite_equilibrium_ma(tol=1e-2, dE=1e-7) -> SuiteResult:
    """Amplitude-held M_a at a = 0 near the equilibrium, p = 2, 3, c = 1."""
    def run():
        worst = 0.0
        for p in (2, 3):
            nl = Nonlinearity.power_law(p)
            _, E_star, _ = equilibrium(0.0, 1.0, nl)
            ma = ma_sign_probe(ParamPoint(0.0, E_star + dE, 1.0, nl), hold="amplitude")
            worst = max(worst, abs(ma / equilibrium_ma(p, 1.0) - 1.0))
        return worst, 2, ""
    return _timed("equilibrium_M_a", tol, run)


def suite_cnoidal(tol=1e-8, ks=(0.05, 0.2, 0.4, 0.6, 0.8, 0.95)) -> SuiteResult:
    def run():
        worst = 0.0
        for k in ks:
            pt = cnoidal_from_modulus(k)
            an = cnoidal(pt).conserved()
            cs = conserved_set(pt)
            worst = max(worst, max(abs(an[q] / getattr(cs, q) - 1.0) for q in "TMP"))
        return worst, len(ks), ""
    return _timed("cnoidal_crosscheck", tol, run)


def suite_evans_structure(points, tol=1e-7) -> SuiteResult:
    """D(0,1) = 0, oddness of D(mu,1) and its negative sign at large mu."""
    def run():
        worst, notes = 0.0, []
        for pt in points:
            prof = reconstruct_profile(pt, 256)
            d0 = abs(evans_values(monodromy_batch(prof, [0.0]))[0])
            fit = evans_cubic_fit(prof)
            _, d_large = large_mu_sign(prof)
            worst = max(worst, fit.odd_residual, d0 * 10.0)  # D(0) is held to 1e-8
            if d_large >= 0:
                notes.append("D >= 0 at large mu")
                worst = math.inf
        return worst, len(points), "; ".join(notes)
    return _timed("evans_oddness", tol, run)


def suite_hill(points, tol=1e-6) -> SuiteResult:
    def run():
        worst, notes = 0.0, []
        for pt in points:
            tb = gradients(pt, check=False)
            T_E = float(tb.grad_T[1])
            rep = hill_report(reconstruct_profile(pt, 256), T_E=T_E, band=10 * float(tb.error("T")[1]))
            dev = np.max(np.abs(rep.m0 - np.array([[1.0, T_E], [0.0, 1.0]]))) / max(1.0, abs(T_E))
            worst = max(worst, dev)
            if rep.neg_count != 1 or rep.zero_multiplicity != 1 or rep.krein_consistent() is not True:
                notes.append(f"shape mismatch at {pt.coords}")
                worst = math.inf
        return worst, len(points), "; ".join(notes)
    return _timed("hill_trichotomy", tol, run)


def suite_phi0(points, tol=1e-5) -> SuiteResult:
    def run():
        worst = 0.0
        for pt in points:
            d = build_phi0(pt)
            rel = abs(d.pairing / d.expected_pairing() - 1.0)
            worst = max(worst, d.residual, rel / 100.0)  # pairing is held to 1e-3
        return worst, len(points), ""
    return _timed("phi0_identities", tol, run)


def suite_kdv_stability(n=10, tol=0.0, seed=11) -> SuiteResult:
    def run():
        pts = sample_omega(1, n, seed=seed, c_range=(1.0, 1.0))
        bad = [pt.coords for pt in pts if classify(pt).verdict is not Verdict.ORBITALLY_STABLE]
        return float(len(bad)), n, f"non-stable at {bad}" if bad else ""
    return _timed("kdv_orbital_stability", tol, run)


def suite_p5_instability(tol=0.1, with_evolution=False) -> SuiteResult:
    def run():
        pt = near_homoclinic_p5()
        b = jacobian_brackets(gradients(pt, check=False)).bracket_TMP_aEc
        prof = reconstruct_profile(pt, 256)
        roots = real_unstable_roots(prof)
        if b >= 0 or len(roots) != 1:
            return math.inf, 1, f"bracket {b:.4g}, roots {roots}"
        res = 0.0
        if with_evolution:
            from .evolution import SimConfig, cosine_perturbation, fit_growth, run_orbit_experiment
            v = cosine_perturbation(256, 1e-6, prof.T)
            ser = run_orbit_experiment(pt, v, SimConfig(n_modes=256, t_end=16.0, output_every=0.25),
                                       profile=prof)
            res = abs(fit_growth(ser).rate / roots[0] - 1.0)
        return res, 1, f"mu* = {roots[0]:.6g}"
    return _timed("p5_instability", tol, run)


def suite_stationary(tol=1e-7, periods=10) -> SuiteResult:
    def run():
        from .evolution import SimConfig, run_orbit_experiment
        pt = ParamPoint(0.0, -0.05, 1.0, Nonlinearity.power_law(1))
        prof = reconstruct_profile(pt, 256)
        ser = run_orbit_experiment(pt, None, SimConfig(n_modes=128, t_end=periods * prof.T,
                                                        output_every=prof.T), profile=prof)
        return max(ser.rho), 1, ""
    return _timed("traveling_wave_persistence", tol, run)


def run_suites(level: str = "fast") -> list[SuiteResult]:
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    full = level == "full"
    ident = mixed_sample(30 if full else 12, seed=1)
    evans_pts = mixed_sample(20 if full else 6, seed=2, s_range=(0.1, 0.9))
    struct_pts = mixed_sample(10 if full else 4, seed=3, s_range=(0.1, 0.9))
    hill_pts = mixed_sample(10 if full else 3, seed=4, s_range=(0.1, 0.9))
    phi_pts = mixed_sample(4 if full else 2, seed=5, s_range=(0.2, 0.8))
    out = [
        suite_action_identity(ident),
        suite_overdetermined(ident),
        suite_equilibrium_period(),
        suite_equilibrium_trace(),
        suite_evans_index(evans_pts),
        suite_evans_structure(struct_pts),
        suite_kdv_stability(50 if full else 10),
        suite_equilibrium_ma(),
        suite_p5_instability(with_evolution=full),
        suite_cnoidal(),
        suite_hill(hill_pts),
        suite_phi0(phi_pts),
    ]
    if full:
        out.append(suite_stationary())
    return out
