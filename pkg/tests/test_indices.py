import dataclasses
import json

import numpy as np
import pytest

from gkdv_stab.calculus import jacobian_brackets
from gkdv_stab.errors import UncertainSign
from gkdv_stab.indices import SpectrumShape, Verdict, classify, trichotomy_expected, verdict_from_brackets
from gkdv_stab.potential import Nonlinearity, ParamPoint, equilibrium
from gkdv_stab.verify import energy_at, near_homoclinic_p5


def test_kdv_point_stable(kdv_point):
    rep = classify(kdv_point)
    assert rep.verdict is Verdict.ORBITALLY_STABLE
    assert any("orbitally stable" in r for r in rep.reasons)


def test_p5_near_separatrix_unstable():
    rep = classify(near_homoclinic_p5())
    assert rep.verdict is Verdict.SPECTRALLY_UNSTABLE
    assert any("exponentially unstable" in r for r in rep.reasons)


def test_p2_near_equilibrium_stable():
    nl = Nonlinearity.power_law(2)
    _, E_star, _ = equilibrium(0.0, 1.0, nl)
    for d in (1e-3, 1e-5):
        assert classify(ParamPoint(0.0, E_star + d, 1.0, nl)).verdict is Verdict.ORBITALLY_STABLE


def test_report_serializes(kdv_point):
    doc = json.loads(classify(kdv_point).to_json())
    assert doc["verdict"] == "OrbitallyStable"
    assert set(doc["brackets"]) >= {"T_E", "bracket_TM_aE", "bracket_TMP_aEc", "hessian_K"}


def _with(br, **kw):
    return dataclasses.replace(br, **kw)


@pytest.fixture(scope="module")
def stable_brackets():
    return jacobian_brackets(ParamPoint(0.0, -0.05, 1.0, Nonlinearity.power_law(1)))


def test_negative_time_derivative_left_open(stable_brackets):
    verdict, reasons, _ = verdict_from_brackets(_with(stable_brackets, T_E=-1.0))
    assert verdict is Verdict.INDETERMINATE
    assert any("left open" in r for r in reasons)


def test_negative_two_bracket_left_open(stable_brackets):
    verdict, reasons, _ = verdict_from_brackets(_with(stable_brackets, bracket_TM_aE=-1.0))
    assert verdict is Verdict.INDETERMINATE
    assert any("spectrally stable" in r for r in reasons)


def test_band_decides(stable_brackets):
    big = 10 * stable_brackets.bracket_TMP_aEc
    verdict, _, _ = verdict_from_brackets(stable_brackets, big)
    assert verdict is Verdict.INDETERMINATE
    with pytest.raises(UncertainSign):
        verdict_from_brackets(stable_brackets, big, strict=True)


def test_verdict_monotone_within_error(stable_brackets):
    br = stable_brackets
    base, _, _ = verdict_from_brackets(br)
    rng = np.random.default_rng(3)
    for _ in range(50):
        kw = {k: getattr(br, k) + rng.uniform(-1, 1) * br.errors[k]
              for k in ("T_E", "bracket_TM_aE", "bracket_TMP_aEc")}
        assert verdict_from_brackets(_with(br, **kw))[0] is base


def test_trichotomy_cases():
    assert trichotomy_expected(energy_at(3, 0.05, 1.2, 0.5)) is SpectrumShape.ONE_NEG_SIMPLE_ZERO
    assert trichotomy_expected(ParamPoint(1.0, 0.3, 1.0, Nonlinearity.linear(2.0))) \
        is SpectrumShape.ONE_NEG_DOUBLE_ZERO
    assert trichotomy_expected(-0.5) is SpectrumShape.TWO_NEG_SIMPLE_ZERO
    assert trichotomy_expected(1e-9, band=1e-8) is SpectrumShape.ONE_NEG_DOUBLE_ZERO
