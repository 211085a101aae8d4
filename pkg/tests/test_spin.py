import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from otoclab import spin
from otoclab.errors import ChartBoundaryError, NormalizationError, ResourceError
from otoclab.symplectic import PhasePoint

half_integers = st.integers(min_value=1, max_value=12).map(lambda k: k / 2)


@given(half_integers)
def test_su2_algebra_and_casimir(s):
    sx, sy, sz, sp, sm = spin.spin_matrices(s)
    for a, b, c in ((sx, sy, sz), (sy, sz, sx), (sz, sx, sy)):
        assert np.max(np.abs(a @ b - b @ a - 1j * c)) <= 1e-12
    casimir = sx @ sx + sy @ sy + sz @ sz
    assert np.max(np.abs(casimir - s * (s + 1) * np.eye(int(2 * s + 1)))) <= 1e-10
    np.testing.assert_allclose(sp, sx + 1j * sy, atol=1e-14)
    np.testing.assert_allclose(sm, sp.conj().T, atol=1e-14)


def test_two_spin_operators_commute_across_factors():
    model = spin.build_quantum(spin.SpinParams(J=0.1, s=1.5))
    ops = model.operators
    for a in "xyz":
        for b in "xyz":
            comm = ops[f"S{a}1"] @ ops[f"S{b}2"] - ops[f"S{b}2"] @ ops[f"S{a}1"]
            assert abs(comm).max() <= 1e-12
    comm = ops["Sx1"] @ ops["Sy1"] - ops["Sy1"] @ ops["Sx1"] - 1j * ops["Sz1"]
    assert abs(comm).max() <= 1e-12


def test_quantum_dimension_and_cap():
    assert spin.build_quantum(spin.SpinParams(J=0.1, s=3.0)).dim == 49
    with pytest.raises(ResourceError, match="14641"):
        spin.build_quantum(spin.SpinParams(J=0.1, s=60.0), max_dim=20000 - 6000)


def test_spin_half_zeeman_spectrum():
    bz = 0.05
    model = spin.build_quantum(spin.SpinParams(J=0.0, b_x=0.0, b_z=bz, s=0.5))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(model.hamiltonian)), [-2 * bz, 0, 0, 2 * bz],
                               atol=1e-15)


def test_hamiltonian_hermitian():
    model = spin.build_quantum(spin.SpinParams(J=0.217, s=4.0))
    h = model.hamiltonian
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12
    assert model.hbar_eff == pytest.approx(1 / 4.5)


def test_classical_hamiltonian_values():
    sys = spin.build_classical(spin.SpinParams(J=0.3, b_x=0.07, b_z=0.0))
    assert sys.hamiltonian(np.array([np.pi / 2, np.pi / 2, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-15)
    z = np.array([0.4, -1.1, 0.3, -0.6])
    r = np.sqrt(1 - z[2:] ** 2)
    expected = np.sum(2 * 0.07 * np.cos(z[:2]) * r) + 4 * 0.3 * z[2] * z[3]
    assert sys.hamiltonian(z) == pytest.approx(expected, abs=1e-15)


def test_classical_guard_band():
    sys = spin.build_classical(spin.SpinParams(J=0.1))
    for accessor in (sys.field_at, sys.energy, sys.jacobian_at):
        with pytest.raises(ChartBoundaryError):
            accessor(np.array([0.0, 0.0, 1.0, 0.0]))


def test_coherent_state_pole():
    s = 3.0
    state = spin.coherent_state(s, np.array([0.7, -0.2, 1.0, 1.0]))
    top = np.zeros(int(2 * s + 1))
    top[0] = 1.0
    overlap = abs(np.vdot(np.kron(top, top), state.vector))
    assert overlap == pytest.approx(1.0, abs=1e-12)


def test_coherent_state_normalisation_error():
    with pytest.raises(NormalizationError):
        spin.coherent_state(2.0, np.array([0.0, 0.0, 1.2, 0.0]))


def test_bloch_consistency_random_points(rng):
    s = 6.0
    model = spin.build_quantum(spin.SpinParams(J=0.1, s=s))
    for _ in range(20):
        z = np.concatenate([rng.uniform(-np.pi, np.pi, 2), rng.uniform(-0.99, 0.99, 2)])
        state = spin.coherent_state(s, z)
        assert abs(np.linalg.norm(state.vector) - 1) <= 1e-12
        n = spin.bloch_of_point(z)
        for i in (1, 2):
            assert np.max(np.abs(spin.bloch_vector(state, model, i) - n[i - 1])) * s <= 1e-8 * s
        # <S_z> = s p
        assert spin.bloch_vector(state, model, 1)[2] == pytest.approx(z[2], abs=1e-10)


def test_printed_convention_is_not_centred():
    s = 4.0
    model = spin.build_quantum(spin.SpinParams(J=0.1, s=s))
    z = np.array([0.5, 1.0, 0.2, -0.3])
    printed = spin.coherent_state(s, z, convention="printed")
    assert np.max(np.abs(spin.bloch_vector(printed, model, 1) - spin.bloch_of_point(z)[0])) > 1e-3


def test_quantum_energy_approaches_classical():
    params = spin.SpinParams(J=0.217)
    sys = spin.build_classical(params)
    z = np.array([2.5, -2.9, -0.2, 0.1])
    diffs = []
    for s in (10.0, 20.0):
        model = spin.build_quantum(params.with_s(s))
        psi = spin.coherent_state(s, z).vector
        diffs.append(abs(np.vdot(psi, model.hamiltonian @ psi).real - sys.hamiltonian(z)))
    assert 0.4 <= diffs[1] / diffs[0] <= 0.6


def test_line_sampler():
    fp = spin.find_hyperbolic_fixed_point(spin.SpinParams(J=0.217))
    pts = spin.line_sampler(fp, [0.0, 0.05, 0.10, 0.15, 0.30])
    assert len(pts) == 5
    np.testing.assert_array_equal(pts[0].coords, fp.coords)
    for dp, pt in zip([0.05, 0.10, 0.15, 0.30], pts[1:]):
        np.testing.assert_allclose(pt.coords - fp.coords, [0, 0, 0, dp], atol=1e-15)
    with pytest.raises(ChartBoundaryError):
        spin.line_sampler(fp, [1.5])


def test_hyperbolic_branch_energies():
    for J, E in ((0.095, -0.221), (0.156, -0.214), (0.217, -0.21)):
        fp = spin.find_hyperbolic_fixed_point(spin.SpinParams(J=J))
        sys = spin.build_classical(spin.SpinParams(J=J))
        assert sys.energy(fp.point) == pytest.approx(E, abs=0.002)
        assert fp.is_hyperbolic
