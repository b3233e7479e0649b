import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkdv_stab.kdv import cnoidal
from gkdv_stab.potential import Nonlinearity, ParamPoint, analyze_phase_plane, equilibrium
from gkdv_stab.quadrature import (conserved_set, equilibrium_period, reconstruct_profile,
                                  regularized_quadrature, uniform_samples)
from gkdv_stab.verify import energy_at


def _one(u):
    return np.ones_like(u)


@pytest.mark.parametrize("E", [-0.49, 0.0, 0.3, 4.0])
def test_harmonic_well_period(E):
    # V = u^2/2 - u, i.e. (u - 1)^2 / 2 up to a constant
    pt = ParamPoint(1.0, E, 1.0, Nonlinearity.linear(2.0))
    pp = analyze_phase_plane(pt)
    assert regularized_quadrature(_one, pp, pt) == pytest.approx(2 * math.pi, rel=1e-13)


def test_kdv_period_tends_to_two_pi(kdv):
    Ts = [conserved_set(ParamPoint(0.0, -1 / 6 + d, 1.0, kdv)).T for d in (1e-3, 1e-5, 1e-7)]
    gaps = [abs(T - 2 * math.pi) for T in Ts]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-5


def test_mass_against_tanh_sinh(kdv):
    pt = ParamPoint(0.0, -0.05, 1.0, kdv)
    pp = analyze_phase_plane(pt)
    mp.mp.dps = 30
    E = mp.mpf(pt.E)

    def V(u):
        return u ** 3 / 3 - u ** 2 / 2

    um = mp.findroot(lambda u: V(u) - E, mp.mpf(pp.u_minus))
    up = mp.findroot(lambda u: V(u) - E, mp.mpf(pp.u_plus))
    oracle = 2 * mp.quad(lambda u: u / mp.sqrt(2 * (E - V(u))), [um, 1, up], method="tanh-sinh")
    got = regularized_quadrature(lambda u: u, pp, pt)
    assert got == pytest.approx(float(oracle), rel=1e-9)
    assert got == pytest.approx(conserved_set(pt).M, rel=1e-13)


def test_equilibrium_limit_of_conserved_set(kdv):
    cs = conserved_set(ParamPoint(0.0, -1 / 6 + 1e-10, 1.0, kdv))
    assert abs(cs.T - 2 * math.pi) < 1e-4
    assert abs(cs.M - 2 * math.pi) < 1e-3
    assert abs(cs.P - 2 * math.pi) < 1e-2


@pytest.mark.parametrize("p,c", [(1, 1.0), (2, 1.0), (3, 2.0), (5, 0.7)])
def test_equilibrium_period_closed_form(p, c):
    nl = Nonlinearity.power_law(p)
    _, E_star, _ = equilibrium(0.0, c, nl)
    pt = ParamPoint(0.0, E_star + 1e-9, c, nl)
    T = conserved_set(pt).T
    assert T == pytest.approx(2 * math.pi / math.sqrt(c * p), rel=1e-5)
    assert T == pytest.approx(equilibrium_period(analyze_phase_plane(pt)), rel=1e-5)


def test_kdv_conserved_set_against_cnoidal(kdv):
    pt = ParamPoint(0.0, -0.05, 1.0, kdv)
    cs = conserved_set(pt)
    an = cnoidal(pt).conserved()
    for q in "TMP":
        assert getattr(cs, q) == pytest.approx(an[q], rel=1e-8)


def test_node_doubling_converges():
    pt = energy_at(3, 0.05, 1.2, 0.95)
    fine = conserved_set(pt, rtol=1e-15).as_array()
    coarse = conserved_set(pt, rtol=1e-8).as_array()
    assert np.all(np.abs(coarse / fine - 1.0) < 1e-8)


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_period_scaling_law(p):
    nl = Nonlinearity.power_law(p)
    c = 1.7
    base = energy_at(p, 0.05, 1.0, 0.6)
    scaled = ParamPoint(base.a * c ** (1 + 1 / p), base.E * c ** (1 + 2 / p), c, nl)
    assert conserved_set(scaled).T * math.sqrt(c) == pytest.approx(conserved_set(base).T, rel=1e-9)


def test_period_diverges_at_separatrix():
    Ts = [conserved_set(energy_at(2, 0.0, 1.0, 1 - d)).T for d in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(b > a for a, b in zip(Ts, Ts[1:]))
    # logarithmic divergence: equal steps in log(delta) give nearly equal increments
    steps = np.diff(Ts)
    assert steps[-1] == pytest.approx(steps[-2], rel=1e-2)


@settings(max_examples=40, deadline=None)
@given(p=st.sampled_from([1, 2, 3, 5]), a=st.floats(-0.2, 0.2), c=st.floats(0.5, 2.0),
       s=st.floats(0.02, 0.98))
def test_conserved_set_inequalities(p, a, c, s):
    cs = conserved_set(energy_at(p, a * c ** (1 + 1 / p), c, s))
    assert cs.T > 0 and cs.K > 0 and cs.P > 0
    assert cs.P * cs.T - cs.M ** 2 > 0


def test_profile_turning_points_and_energy(kdv_point):
    prof = reconstruct_profile(kdv_point, 256)
    pp = prof.phase
    assert prof.x[0] == 0.0 and prof.u[0] == pp.u_minus and prof.ux[0] == 0.0
    mid = np.argmax(prof.u)
    assert prof.x[mid] == pytest.approx(prof.T / 2, rel=1e-15)
    assert prof.u[mid] == pytest.approx(pp.u_plus, rel=1e-15) and prof.ux[mid] == 0.0
    assert prof.energy_residual() <= 1e-9 * max(1.0, abs(kdv_point.E))
    assert np.all(prof.ux[1:mid] > 0) and np.all(prof.ux[mid + 1:-1] < 0)
    assert prof.u[-1] == pp.u_minus and prof.x[-1] == pytest.approx(prof.T, rel=1e-15)


def test_profile_even_symmetry():
    pt = energy_at(3, 0.1, 1.3, 0.7)
    x, u, ux = uniform_samples(pt, 128)
    assert np.array_equal(u[1:], u[1:][::-1])
    assert np.array_equal(ux[1:], -ux[1:][::-1])
    prof = reconstruct_profile(pt, 128)
    assert np.allclose(prof.u, prof.u[::-1], atol=0, rtol=0)


def test_profile_matches_cnoidal_pointwise(kdv_point):
    prof = reconstruct_profile(kdv_point, 256)
    cp = cnoidal(kdv_point)
    assert np.max(np.abs(prof.u - cp.profile(prof.x))) <= 1e-7
    x, u, ux = prof.uniform(100)
    assert np.max(np.abs(u - cp.profile(x))) <= 1e-10
    assert np.max(np.abs(ux - cp.derivative(x))) <= 1e-10


def test_profile_needs_enough_samples(kdv_point):
    with pytest.raises(ValueError):
        reconstruct_profile(kdv_point, 32)
