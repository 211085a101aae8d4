import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from otoclab import bose_hubbard as bh
from otoclab import dynamics as dyn
from otoclab import spin
from otoclab.errors import (
    ContinuationBreak,
    ContractError,
    ConvergenceError,
    DegenerateSeedWarning,
    EmptyShellError,
)


def _spin(J, bx=0.05, bz=0.05):
    return spin.build_classical(spin.SpinParams(J=J, b_x=bx, b_z=bz))


@pytest.fixture(scope="module")
def fp217():
    return spin.find_hyperbolic_fixed_point(spin.SpinParams(J=0.217))


def test_free_precession_is_linear():
    sys = _spin(0.0, bx=0.0, bz=0.05)
    z0 = np.array([0.3, -1.0, 0.2, -0.4])
    traj = dyn.integrate(sys, z0, 20.0, n_out=51)
    expected_q = z0[:2] + 2 * 0.05 * traj.times[:, None]
    np.testing.assert_allclose(traj.points[:, :2], expected_q, atol=1e-8)
    np.testing.assert_allclose(traj.points[:, 2:], np.broadcast_to(z0[2:], (51, 2)), atol=1e-10)


def test_trajectory_times_increase_and_drift_small(rng):
    sys = _spin(0.095)
    z0 = np.concatenate([rng.uniform(-np.pi, np.pi, 2), rng.uniform(-0.7, 0.7, 2)])
    traj = dyn.integrate(sys, z0, 500.0)
    assert np.all(np.diff(traj.times) > 0)
    drift, series = dyn.energy_drift_report(traj)
    assert drift <= 1e-5
    assert series.shape == traj.times.shape


def test_drift_report_trivial_cases():
    single = dyn.Trajectory(np.array([0.0]), np.zeros((1, 2)), np.array([1.5]))
    assert dyn.energy_drift_report(single)[0] == 0.0
    flat = dyn.Trajectory(np.linspace(0, 1, 5), np.zeros((5, 2)), np.full(5, -0.3))
    assert dyn.energy_drift_report(flat)[0] == 0.0


def test_trajectory_rejects_unsorted_times():
    with pytest.raises(ContractError):
        dyn.Trajectory(np.array([0.0, 0.0]), np.zeros((2, 2)), np.zeros(2))


def test_bose_hubbard_norm_conserved(rng):
    params = bh.BHParams(3, 60, -1.2)
    sys = bh.mean_field_system(params, bh.homogeneous_mu(params.theta))
    z0 = rng.normal(size=6)
    z0 *= np.sqrt(2) / np.linalg.norm(z0)
    traj = dyn.integrate(sys, z0, 200.0)
    norms = 0.5 * np.sum(traj.points**2, axis=1)
    assert np.max(np.abs(norms - 1.0)) <= 1e-8


def test_variational_flow_identity_at_zero(rng):
    sys = _spin(0.1)
    _, m = dyn.variational_flow(sys, np.array([0.1, 0.2, 0.3, 0.4]), 0.0)
    np.testing.assert_array_equal(m, np.eye(4))


def test_monodromy_at_fixed_point_matches_expm(fp217):
    sys = _spin(0.217)
    _, m = dyn.variational_flow(sys, fp217.point, 1.0, tol=1e-12)
    expected = expm(sys.jacobian_at(fp217.point))
    np.testing.assert_allclose(m, expected, atol=1e-8)
    ev = np.sort_complex(np.linalg.eigvals(m))
    oracle = np.sort_complex(np.exp(fp217.spectrum))
    np.testing.assert_allclose(ev, oracle, rtol=1e-5)


def test_variational_flow_carries_seed():
    sys = _spin(0.15)
    z0 = np.array([0.5, 0.1, -0.2, 0.3])
    seed = dyn.random_seeds(sys, z0, 1, 3)[0]
    _, m, v = dyn.variational_flow(sys, z0, 2.0, seed)
    np.testing.assert_allclose(v.components, m @ seed.components, atol=1e-12)


@given(st.floats(min_value=0.04, max_value=0.3))
def test_spectrum_pairing(J):
    fp = spin.find_hyperbolic_fixed_point(spin.SpinParams(J=J), n_per_axis=7, keep=20)
    spec = np.sort_complex(fp.spectrum)
    np.testing.assert_allclose(np.sort_complex(-spec), spec, atol=1e-8)
    assert fp.lambda_loc >= 0
    assert fp.residual_norm <= 1e-10


def test_fixed_point_of_spin_model_j095():
    fp = spin.find_hyperbolic_fixed_point(spin.SpinParams(J=0.095))
    sys = _spin(0.095)
    assert np.linalg.norm(sys.vector_field(fp.coords)) <= 1e-10
    assert sys.energy(fp.point) == pytest.approx(-0.221, abs=0.002)


def test_newton_returns_converged_guess_unchanged(fp217):
    sys = _spin(0.217)
    again = dyn.find_fixed_point(sys, fp217.point)
    assert again.iterations == 1
    np.testing.assert_array_equal(again.coords, fp217.coords)


def test_newton_reports_nonconvergence():
    sys = _spin(0.217)
    with pytest.raises(ConvergenceError):
        dyn.find_fixed_point(sys, np.array([1.0, 2.0, 0.5, -0.5]), max_iter=1)


def test_bose_hubbard_homogeneous_point_via_newton():
    params = bh.BHParams(4, 40, -1.2)
    sys = bh.mean_field_system(params, 0.0)
    guess = bh.homogeneous_point(4).coords + 1e-3
    fp = dyn.find_fixed_point(sys, guess, extra_unknowns=[0.0])
    np.testing.assert_allclose(fp.coords, np.r_[np.full(4, np.sqrt(0.5)), np.zeros(4)], atol=1e-9)
    assert fp.extras["mu"] == pytest.approx(np.sin(-1.2) - 2 * np.cos(-1.2), abs=1e-9)


def test_continuation_spin_branch():
    grid = [0.095, 0.156, 0.217, 0.278]
    fp0 = spin.find_hyperbolic_fixed_point(spin.SpinParams(J=grid[0]))
    branch = dyn.continue_fixed_point(lambda J: _spin(J), fp0, grid)
    assert len(branch) == 4
    lam = [fp.lambda_loc for fp in branch]
    assert np.all(np.diff(lam) > 0)
    jumps = [np.linalg.norm(a.coords - b.coords) for a, b in zip(branch, branch[1:])]
    assert max(jumps) < 0.25


def test_continuation_single_element_grid(fp217):
    branch = dyn.continue_fixed_point(lambda J: _spin(J), fp217, [0.217])
    assert len(branch) == 1
    np.testing.assert_array_equal(branch[0].coords, fp217.coords)


def test_continuation_break_keeps_partial_results(fp217):
    with pytest.raises(ContinuationBreak) as info:
        dyn.continue_fixed_point(lambda J: _spin(J), fp217, [0.217, 0.3], max_jump=1e-6)
    assert len(info.value.partial) == 1


def test_continuation_bose_hubbard_theta():
    family = lambda th: bh.mean_field_system(bh.BHParams(3, 60, th), 0.0)
    fp0 = bh.homogeneous_fixed_point(bh.BHParams(3, 60, -1.4))
    thetas = np.linspace(-1.4, -1.1, 4)
    branch = dyn.continue_fixed_point(family, fp0, thetas)
    for th, fp in zip(thetas, branch):
        np.testing.assert_allclose(fp.coords, fp0.coords, atol=1e-10)
        assert fp.extras["mu"] == pytest.approx(np.sin(th) - 2 * np.cos(th), abs=1e-10)


def test_lyapunov_warns_at_fixed_point(fp217):
    sys = _spin(0.217)
    seeds = dyn.random_seeds(sys, fp217.point, 2, 0)
    with pytest.warns(DegenerateSeedWarning):
        est = dyn.lyapunov(sys, fp217.point, seeds, 20.0)
    assert np.all(np.isfinite(est.terminal))


def test_lyapunov_value_is_seed_mean_and_nonnegative(fp217):
    sys = _spin(0.217)
    z0 = dyn.chaotic_offset_point(sys, fp217)
    est = dyn.lyapunov(sys, z0, dyn.random_seeds(sys, z0, 4, 1), 200.0)
    assert est.value == pytest.approx(np.mean(est.terminal))
    assert est.value >= -0.005
    for _, times, curve in est.per_seed:
        assert np.all(np.isfinite(curve))


def test_lyapunov_independent_seed_batches_agree(fp217):
    sys = _spin(0.217)
    z0 = dyn.chaotic_offset_point(sys, fp217)
    a = dyn.lyapunov(sys, z0, dyn.random_seeds(sys, z0, 10, 11), 2000.0)
    b = dyn.lyapunov(sys, z0, dyn.random_seeds(sys, z0, 10, 12), 2000.0)
    assert abs(a.value - b.value) <= 0.1 * max(a.value, b.value)


def test_lyapunov_trajectory_invariance(fp217):
    sys = _spin(0.217)
    z0 = dyn.chaotic_offset_point(sys, fp217)
    first = dyn.lyapunov(sys, z0, dyn.random_seeds(sys, z0, 10, 5), 2000.0)
    start = first.end_point
    moved = dyn.lyapunov(sys, start, dyn.random_seeds(sys, start, 10, 6), 2000.0)
    assert abs(first.value - moved.value) <= 0.01


def test_lyapunov_contracts():
    sys = _spin(0.1)
    z0 = np.array([0.1, 0.2, 0.3, 0.4])
    with pytest.raises(ContractError):
        dyn.lyapunov(sys, z0, [], 10.0)
    with pytest.raises(ContractError):
        dyn.lyapunov(sys, z0, dyn.random_seeds(sys, z0, 1, 0), -1.0)


def test_section_hits_on_plane_and_shell(fp217):
    sys = _spin(0.217)
    energy = sys.energy(fp217.point)
    assert energy == pytest.approx(-0.21, abs=0.002)
    plane = dyn.SectionPlane(1, float(fp217.coords[1]), 1)
    cloud = dyn.poincare_section(sys, energy, plane, 3, 300.0, rng=4)
    assert cloud.hits.shape[0] > 10
    wrapped = np.angle(np.exp(1j * (cloud.points[:, 1] - plane.value)))
    assert np.max(np.abs(wrapped)) <= 1e-8
    energies = np.array([sys.hamiltonian(z) for z in cloud.points])
    assert np.max(np.abs(energies - energy)) <= 1e-6
    assert np.max(cloud.max_drifts) <= 1e-5


def test_integrable_section_hits_lie_on_curves():
    # at J = 0 each spin's own energy is conserved, so hits of one orbit lie on a level curve
    sys = _spin(0.0)
    energy = -0.1
    plane = dyn.SectionPlane(1, 0.0, 1)
    cloud = dyn.poincare_section(sys, energy, plane, 4, 400.0, rng=2)
    q1, p1 = cloud.hits[:, 0], cloud.hits[:, 1]
    h1 = 2 * (0.05 * np.cos(q1) * np.sqrt(1 - p1**2) + 0.05 * p1)
    for k in np.unique(cloud.trajectory):
        sel = cloud.trajectory == k
        if sel.sum() > 2:
            assert np.ptp(h1[sel]) <= 1e-6


def test_section_empty_shell():
    sys = _spin(0.217)
    with pytest.raises(EmptyShellError):
        dyn.poincare_section(sys, 5.0, dyn.SectionPlane(1, 0.0, 1), 2, 10.0, rng=0, max_tries=5)
