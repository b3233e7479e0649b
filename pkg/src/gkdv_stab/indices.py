"""Stability verdicts from the Hessian of the classical action."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .calculus import GradientTable, JacobianBrackets, gradients, jacobian_brackets
from .errors import UncertainSign
from .potential import ParamPoint

BAND_FACTOR = 10.0
BRACKETS = ("T_E", "bracket_TM_aE", "bracket_TMP_aEc")


class Verdict(str, enum.Enum):
    ORBITALLY_STABLE = "OrbitallyStable"
    SPECTRALLY_UNSTABLE = "SpectrallyUnstable"
    INDETERMINATE = "Indeterminate"


class SpectrumShape(str, enum.Enum):
    """Predicted low spectrum of the Hill operator L = -d^2/dx^2 - f'(u) + c."""

    ONE_NEG_SIMPLE_ZERO = "OneNegSimpleZero"
    ONE_NEG_DOUBLE_ZERO = "OneNegDoubleZero"
    TWO_NEG_SIMPLE_ZERO = "TwoNegSimpleZero"


@dataclass(frozen=True)
class IndexReport:
    point: ParamPoint
    brackets: JacobianBrackets
    verdict: Verdict
    reasons: list
    bands: dict
    table: GradientTable | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        pt = self.point
        out = {
            "point": {"a": pt.a, "E": pt.E, "c": pt.c},
            "nonlinearity": pt.nonlinearity.describe(),
            "verdict": self.verdict.value,
            "reasons": list(self.reasons),
            "brackets": {k: v for k, v in self.brackets.as_dict().items() if k != "errors"},
            "errors": dict(self.brackets.errors),
            "bands": dict(self.bands),
        }
        if self.table is not None:
            t = self.table
            out["values"] = dict(t.values)
            out["gradients"] = {q: t.grad(q).tolist() for q in ("T", "M", "P", "H", "K")}
            out["gradient_errors"] = {q: t.error(q).tolist() for q in ("T", "M", "P", "H", "K")}
            out["M_a"] = float(t.grad_M[0])
            out["identity_residuals"] = {"action": t.action_residual(),
                                         "overdetermined": t.overdetermined_residual()}
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _bands(br: JacobianBrackets, tol_band):
    if tol_band is None:
        return {k: BAND_FACTOR * br.errors[k] for k in BRACKETS}
    return {k: float(tol_band) for k in BRACKETS}


def verdict_from_brackets(br: JacobianBrackets, tol_band: float | None = None, *,
                          strict: bool = False) -> tuple[Verdict, list, dict]:
    """Apply the classification rules to precomputed brackets.

    ``tol_band=None`` uses ten times each bracket's own error estimate.
    """
    bands = _bands(br, tol_band)
    val = {k: getattr(br, k) for k in BRACKETS}
    sign = {k: (0 if abs(val[k]) <= bands[k] else int(np.sign(val[k]))) for k in BRACKETS}
    reasons = []
    for k in BRACKETS:
        if tol_band is not None and br.errors[k] > bands[k] / 10.0:
            reasons.append(f"{k}: error estimate {br.errors[k]:.3g} exceeds a tenth of the band")
            sign[k] = 0

    if sign["bracket_TMP_aEc"] < 0:
        reasons.append("{T,M,P}_{a,E,c} < 0: D(mu,1) has an odd number of positive roots, "
                       "exponentially unstable to co-periodic perturbations")
        return Verdict.SPECTRALLY_UNSTABLE, reasons, bands
    if sign["T_E"] > 0 and sign["bracket_TM_aE"] > 0 and sign["bracket_TMP_aEc"] > 0:
        reasons.append("T_E > 0, {T,M}_{a,E} > 0 and {T,M,P}_{a,E,c} > 0: orbitally stable "
                       "to co-periodic perturbations")
        return Verdict.ORBITALLY_STABLE, reasons, bands

    undecided = [k for k in BRACKETS if sign[k] == 0]
    if undecided:
        msg = ", ".join(f"{k}={val[k]:.3g} (band {bands[k]:.3g})" for k in undecided)
        if strict:
            raise UncertainSign(f"sign not resolved: {msg}")
        reasons.append(f"sign not resolved: {msg}")
    if sign["T_E"] < 0:
        reasons.append("T_E < 0: two negative Hill eigenvalues, left open by the theory")
    if sign["bracket_TMP_aEc"] > 0:
        reasons.append("{T,M,P}_{a,E,c} > 0: spectrally stable to co-periodic perturbations")
        if sign["bracket_TM_aE"] < 0:
            reasons.append("{T,M}_{a,E} < 0: orbital stability left open by the theory")
    return Verdict.INDETERMINATE, reasons, bands


def classify(pt: ParamPoint, tol_band: float | None = None, *, strict: bool = False,
             table: GradientTable | None = None, **grad_kw) -> IndexReport:
    """Stability verdict at ``pt``.

    ``strict=True`` raises :class:`UncertainSign` instead of returning an
    Indeterminate verdict when the decision hinges on a bracket inside its
    tolerance band.
    """
    table = gradients(pt, **grad_kw) if table is None else table
    br = jacobian_brackets(table)
    verdict, reasons, bands = verdict_from_brackets(br, tol_band, strict=strict)
    return IndexReport(point=pt, brackets=br, verdict=verdict, reasons=reasons, bands=bands,
                       table=table)


def trichotomy_expected(pt_or_TE, band: float | None = None, **grad_kw) -> SpectrumShape:
    """Predicted Hill spectrum shape from the sign of T_E.

    Accepts a :class:`ParamPoint` (T_E computed here) or a numeric T_E.
    """
    if isinstance(pt_or_TE, ParamPoint):
        table = gradients(pt_or_TE, **grad_kw)
        T_E = float(table.grad_T[1])
        if band is None:
            band = BAND_FACTOR * float(table.error("T")[1])
    else:
        T_E = float(pt_or_TE)
        band = 0.0 if band is None else band
    if abs(T_E) <= band:
        return SpectrumShape.ONE_NEG_DOUBLE_ZERO
    return SpectrumShape.ONE_NEG_SIMPLE_ZERO if T_E > 0 else SpectrumShape.TWO_NEG_SIMPLE_ZERO
