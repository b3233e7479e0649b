import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkdv_stab.calculus import (bracket3, gradients, jacobian_brackets, ma_sign_probe, ridders,
                                batched_derivative)
from gkdv_stab.errors import IdentityViolation
from gkdv_stab.potential import Nonlinearity, ParamPoint, equilibrium
from gkdv_stab.quadrature import tampered_action
from gkdv_stab.verify import energy_at, mixed_sample


def test_ridders_on_smooth_function():
    d, err, _ = ridders(lambda h: np.array([(math.sin(1 + h) - math.sin(1 - h)) / (2 * h)]), 0.5)
    assert abs(d[0] - math.cos(1)) < 1e-13
    assert abs(d[0] - math.cos(1)) <= 10 * err[0]


@pytest.mark.parametrize("order,expected", [(1, 1.0), (2, 1.0), (3, 1.0)])
def test_batched_derivative_orders(order, expected):
    d, err = batched_derivative(lambda x: np.exp(x), 0.3, order)
    assert d == pytest.approx(expected, abs=1e-8)


def test_action_identity_kdv(kdv_point):
    tb = gradients(kdv_point)
    v = tb.values
    assert np.allclose(tb.grad_K, [v["M"], v["T"], v["P"] / 2], rtol=1e-7, atol=0)


def test_overdetermined_identity_p2():
    nl = Nonlinearity.power_law(2)
    pt = energy_at(2, 0.02, 1.3, 0.5)
    tb = gradients(pt)
    total = pt.E * tb.grad_T + pt.a * tb.grad_M + 0.5 * pt.c * tb.grad_P + tb.grad_H
    assert np.linalg.norm(total) <= 1e-7 * np.linalg.norm(tb.grad_H)
    assert nl.p == pt.nonlinearity.p


def test_harmonic_well_isochronous():
    # V = (2 - c) u^2 / 2 - a u has period 2 pi / sqrt(2 - c) for every a, E
    pt = ParamPoint(1.0, 0.3, 1.0, Nonlinearity.linear(2.0))
    tb = gradients(pt)
    assert abs(tb.grad_T[0]) < 1e-10 and abs(tb.grad_T[1]) < 1e-10
    assert tb.grad_T[2] == pytest.approx(math.pi, rel=1e-9)


def test_equilibrium_limit_of_three_bracket(kdv):
    b = jacobian_brackets(ParamPoint(0.0, -1 / 6 + 1e-3, 1.0, kdv)).bracket_TMP_aEc
    assert b == pytest.approx(4 * math.pi ** 3, rel=0.02)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-0.2, 0.2), c=st.floats(0.5, 2.0), s=st.floats(0.03, 0.97))
def test_kdv_two_bracket_positive(a, c, s):
    br = jacobian_brackets(energy_at(1, a * c * c, c, s))
    assert br.bracket_TM_aE > 10 * br.errors["bracket_TM_aE"]


@pytest.mark.parametrize("p", [1, 2, 3])
def test_near_homoclinic_sign(p):
    br = jacobian_brackets(energy_at(p, 0.0, 1.0, 1 - 1e-6))
    expected = np.sign(2 / p - 0.5)
    assert np.sign(br.bracket_TMP_aEc) == expected
    assert abs(br.bracket_TMP_aEc) > 10 * br.errors["bracket_TMP_aEc"]


def test_near_homoclinic_sign_p5():
    assert jacobian_brackets(energy_at(5, 0.0, 1.0, 1 - 1e-6)).bracket_TMP_aEc < 0


def test_equilibrium_ma_p2():
    nl = Nonlinearity.power_law(2)
    _, E_star, _ = equilibrium(0.0, 1.0, nl)
    ma = ma_sign_probe(ParamPoint(0.0, E_star + 1e-7, 1.0, nl), hold="amplitude")
    assert ma == pytest.approx(-math.pi / (2 * math.sqrt(2)), rel=1e-3)


def test_equilibrium_ma_kdv_vanishes(kdv):
    vals = [ma_sign_probe(ParamPoint(0.0, -1 / 6 + d, 1.0, kdv), hold="amplitude") for d in (1e-4, 1e-6)]
    assert max(abs(v) for v in vals) < 1e-6


def test_kdv_ma_against_tanh_sinh(kdv):
    pt = ParamPoint(0.0, -0.1, 1.0, kdv)
    mp.mp.dps = 30
    E = mp.mpf(pt.E)

    def mass(a):
        def V(u):
            return u ** 3 / 3 - u ** 2 / 2 - a * u
        um = mp.findroot(lambda u: V(u) - E, mp.mpf("0.6"))
        up = mp.findroot(lambda u: V(u) - E, mp.mpf("1.3"))
        return 2 * mp.quad(lambda u: u / mp.sqrt(2 * (E - V(u))), [um, 1, up], method="tanh-sinh")

    h = mp.mpf("1e-6")
    oracle = float((mass(h) - mass(-h)) / (2 * h))
    ma = ma_sign_probe(pt)
    assert ma < 0
    assert ma == pytest.approx(oracle, rel=1e-7)


def test_ma_probe_rejects_unknown_hold(kdv_point):
    with pytest.raises(ValueError):
        ma_sign_probe(kdv_point, hold="c")


def test_hessian_symmetry_and_brackets():
    for pt in mixed_sample(8, seed=31):
        tb = gradients(pt)
        assert max(tb.symmetry_residuals().values()) <= 1e-6
        br = jacobian_brackets(tb)
        H = br.hessian_K
        assert np.allclose(H, H.T, rtol=1e-6, atol=1e-9 * np.max(np.abs(H)))
        T, M, P = tb.grad_T, tb.grad_M, tb.grad_P
        assert br.T_E == T[1]
        assert br.bracket_TM_aE == T[0] * M[1] - T[1] * M[0]
        assert br.bracket_TM_Ec == T[1] * M[2] - T[2] * M[1]
        # antisymmetry of the two- and three-row brackets
        assert M[0] * T[1] - M[1] * T[0] == -br.bracket_TM_aE
        assert bracket3(np.vstack([M, T, P])) == pytest.approx(-br.bracket_TMP_aEc, rel=1e-12)


def test_error_estimates_bound_identity_residuals():
    pts = mixed_sample(100, seed=21)
    covered = 0
    for pt in pts:
        tb = gradients(pt, check=False)
        v = tb.values
        target = np.array([v["M"], v["T"], v["P"] / 2])
        bound = tb.error("K") + tb.value_noise * np.abs(target)
        covered += bool(np.all(np.abs(tb.grad_K - target) <= bound))
    assert covered >= 95


def test_step_report_lists_every_entry(kdv_point):
    rows = gradients(kdv_point).step_report()
    assert len(rows) == 15
    assert all(r["step"] > 0 and r["error"] >= 0 for r in rows)


def test_identity_violation_on_tampered_quadrature(kdv_point):
    with tampered_action(1e-4):
        with pytest.raises(IdentityViolation):
            gradients(kdv_point)
