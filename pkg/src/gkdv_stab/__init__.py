"""Stability of periodic traveling waves of generalized KdV equations."""

from .errors import *  # noqa: F401,F403
from .potential import (Nonlinearity, ParamPoint, PhasePlane, analyze_phase_plane,
                        effective_potential, equilibrium, separatrix_energy)
from .quadrature import ConservedSet, WaveProfile, conserved_set, reconstruct_profile, regularized_quadrature
from .calculus import GradientTable, JacobianBrackets, gradients, jacobian_brackets
from .indices import IndexReport, SpectrumShape, Verdict, classify, trichotomy_expected
from .evans import evans, evans_cubic_fit, monodromy, real_unstable_roots, trace_identity_index
from .hill import HillReport, Phi0Data, build_phi0, hill_report
from .kdv import CnoidalParams, CubicRoots, cnoidal_from_roots, cubic_roots, galilean_reduce, scaling_reduce
from .evolution import OrbitDistanceSeries, SimConfig, evolve, orbit_distance, project_sigma0

__version__ = "0.1.0"
