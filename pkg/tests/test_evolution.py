import math

import numpy as np
import pytest

from gkdv_stab.errors import BlowupDetected, GridTooCoarse, ResolutionLoss, SingularConstraint
from gkdv_stab.evolution import (SimConfig, compare_anchorings, cosine_perturbation, evolve,
                                 fit_growth, fourier_shift, functionals, grid_norm,
                                 noise_perturbation, orbit_distance, phi0_perturbation,
                                 project_sigma0, run_orbit_experiment, sigma0_perturbation)
from gkdv_stab.evans import real_unstable_roots
from gkdv_stab.kdv import cnoidal
from gkdv_stab.potential import Nonlinearity, ParamPoint
from gkdv_stab.quadrature import reconstruct_profile
from gkdv_stab.verify import near_homoclinic_p5

KDV = Nonlinearity.power_law(1)


@pytest.fixture(scope="module")
def kdv_wave():
    pt = ParamPoint(0.0, -0.05, 1.0, KDV)
    return pt, reconstruct_profile(pt, 256)


def test_orbit_distance_recovers_shift(kdv_wave):
    _, prof = kdv_wave
    T = prof.T
    _, u, _ = prof.uniform(128)
    shifted = fourier_shift(u, T, 0.37 * T)
    rho, xi = orbit_distance(shifted, u, T)
    assert rho <= 1e-9
    assert xi == pytest.approx(0.37 * T, abs=1e-9)
    rho_h1, _ = orbit_distance(shifted, u, T, norm="H1")
    assert rho_h1 <= 1e-9


def test_orbit_distance_is_translation_invariant(kdv_wave):
    _, prof = kdv_wave
    T = prof.T
    _, u, _ = prof.uniform(128)
    w = u + noise_perturbation(128, 1e-2, T, seed=3)
    r0, _ = orbit_distance(w, u, T)
    for xi in (0.1, 1.7, 4.0):
        r, _ = orbit_distance(fourier_shift(w, T, xi), u, T)
        assert r == pytest.approx(r0, rel=1e-10)


def test_orbit_distance_bounded_by_perturbation(kdv_wave):
    _, prof = kdv_wave
    T = prof.T
    _, u, _ = prof.uniform(128)
    x = np.arange(128) * T / 128
    bump = 1e-3 * np.exp(-10 * np.sin(math.pi * (x - 1.3) / T) ** 2)
    rho, _ = orbit_distance(u + bump, u, T)
    assert rho <= grid_norm(bump, T) * (1 + 1e-12)


def test_grid_norm_parseval():
    T = 3.0
    x = np.arange(64) * T / 64
    v = np.sin(2 * math.pi * x / T) + 0.5
    assert grid_norm(v, T) == pytest.approx(math.sqrt(np.sum(v * v) * T / 64), rel=1e-13)


def test_projection_onto_sigma0(kdv_wave):
    _, prof = kdv_wave
    T = prof.T
    n = 128
    _, u, _ = prof.uniform(n)
    zero = np.zeros(n)
    assert np.array_equal(project_sigma0(zero, prof), zero)
    v = project_sigma0(noise_perturbation(n, 1e-2, T, seed=5), prof)
    dx = T / n
    assert abs(np.sum(u + v) * dx - np.sum(u) * dx) <= 1e-12 * np.sum(np.abs(u)) * dx
    assert abs(np.sum((u + v) ** 2) * dx - np.sum(u * u) * dx) <= 1e-12 * np.sum(u * u) * dx
    w = sigma0_perturbation(cosine_perturbation(n, 1.0, T), prof, 1e-3)
    assert grid_norm(w, T) == pytest.approx(1e-3, rel=1e-8)


def test_projection_singular_on_constant_state():
    u = np.full(32, 0.7)
    with pytest.raises(SingularConstraint):
        project_sigma0(np.linspace(0, 1e-3, 32), u, 2.0)


def test_stationary_wave_stays_on_orbit(kdv_wave):
    pt, prof = kdv_wave
    cfg = SimConfig(n_modes=128, t_end=50 * prof.T, output_every=prof.T)
    s = run_orbit_experiment(pt, None, cfg, profile=prof)
    assert max(s.rho) <= 1e-7
    assert max(s.conserved_drift) <= 1e-10


def test_lab_frame_matches_cnoidal_translate(kdv_wave):
    # u_t = u_xxx + (u^2)_x carries u(x + ct): the wave moves left for c > 0
    pt, prof = kdv_wave
    cp = cnoidal(pt)
    n = 128
    x, u, _ = prof.uniform(n)
    t_end = 2.0
    traj = evolve(u, prof.T, KDV, SimConfig(n_modes=n, t_end=t_end))
    assert np.max(np.abs(traj.final - cp.field(x, t_end))) <= 1e-8
    assert np.max(np.abs(traj.final - cp.field(x, -t_end))) > 1e-2


def test_time_step_halving(kdv_wave):
    pt, prof = kdv_wave
    v = sigma0_perturbation(cosine_perturbation(128, 1.0, prof.T), prof, 1e-3)
    base = SimConfig(n_modes=128, t_end=10 * prof.T, output_every=prof.T)
    s1 = run_orbit_experiment(pt, v, base, profile=prof)
    dt = s1.dt
    s2 = run_orbit_experiment(pt, v, SimConfig(**{**base.__dict__, "dt": dt / 2}), profile=prof)
    assert max(s2.rho) == pytest.approx(max(s1.rho), rel=1e-2)
    assert s2.dt == pytest.approx(dt / 2, rel=1e-2)


def test_growth_rate_is_resolution_independent():
    pt = near_homoclinic_p5()
    prof = reconstruct_profile(pt, 256)
    mu = real_unstable_roots(prof)[0]
    rates = []
    for n in (256, 512):
        v = cosine_perturbation(n, 1e-6, prof.T)
        cfg = SimConfig(n_modes=n, t_end=16.0, output_every=0.25)
        rates.append(fit_growth(run_orbit_experiment(pt, v, cfg, profile=prof)).rate)
    assert rates[1] == pytest.approx(rates[0], rel=0.05)
    assert rates[0] == pytest.approx(mu, rel=0.1)


def test_reanchoring_tightens_the_orbit(kdv_wave):
    # an amplitude change moves the data off Sigma_0; the re-anchored wave
    # carries the same T, M and P and is much closer for all time
    pt, prof = kdv_wave
    n = 128
    _, u, _ = prof.uniform(n)
    cfg = SimConfig(n_modes=n, t_end=20 * prof.T, output_every=prof.T)
    cmp = compare_anchorings(pt, 1e-3 * u, cfg, profile=prof)
    orig, new = cmp.original.rho, cmp.reanchored.rho
    assert max(new) <= 0.1 * max(orig)
    assert max(new) <= 1.01 * new[0]
    assert cmp.anchor.c != pt.c


def test_phi0_direction_has_requested_norm(kdv_wave):
    pt, prof = kdv_wave
    v = phi0_perturbation(pt, 128, 1e-3)
    assert grid_norm(v, prof.T) == pytest.approx(1e-3, rel=1e-12)


def test_functionals_of_cosine():
    T = 2 * math.pi
    x = np.arange(32) * T / 32
    M, P, E = functionals(1 + np.cos(x), T, KDV)
    assert M == pytest.approx(T)
    assert P == pytest.approx(1.5 * T)
    # int (u_x^2/2 - u^3/3) for u = 1 + cos x
    assert E == pytest.approx(0.25 * T - (1 + 1.5) * T / 3)


def test_blowup_is_detected():
    T = 2 * math.pi
    x = np.arange(32) * T / 32
    cfg = SimConfig(n_modes=32, t_end=5.0, dt=0.5, output_every=0.5, check_resolution=False)
    with pytest.raises(BlowupDetected):
        evolve(5 * np.cos(x), T, KDV, cfg)


def test_resolution_loss_is_detected():
    T = 2 * math.pi
    x = np.arange(32) * T / 32
    cfg = SimConfig(n_modes=32, t_end=2.0, output_every=0.1)
    with pytest.raises(ResolutionLoss):
        evolve(8 * np.cos(x), T, KDV, cfg)


def test_coarse_initial_data_is_rejected():
    u0 = np.where(np.arange(64) < 32, 1.0, 0.0)
    with pytest.raises(GridTooCoarse):
        evolve(u0, 1.0, KDV, SimConfig(n_modes=64))


@pytest.mark.parametrize("kw", [dict(n_modes=100), dict(n_modes=4), dict(dt=0.0), dict(t_end=-1.0),
                                dict(norm="H2")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_mismatched_grid_is_rejected():
    with pytest.raises(ValueError):
        evolve(np.zeros(16), 1.0, KDV, SimConfig(n_modes=32))
