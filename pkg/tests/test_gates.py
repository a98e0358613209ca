import numpy as np
import pytest

from demongain import gates
from demongain.gates import GateOp, NoiseParams, apply, bell_prep, cy, cy_exact, cz_half, local_rot, swap, u_zz
from demongain.qlin import ID2, PAULI_X, PAULI_Y, kron

from conftest import haar_unitary, random_density

BELL = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)
PAPER_DELTAS = NoiseParams(tuple(np.pi / 2 * np.array([0.009, 0.068, 0.165])))


def max_abs_after_phase(u, v):
    """Max-abs difference after aligning global phase on the largest entry."""
    k = np.argmax(np.abs(v))
    return np.max(np.abs(u - (u.flat[k] / v.flat[k]) * v))


def test_noise_params_validation():
    with pytest.raises(ValueError):
        NoiseParams((0.0, 0.0))
    with pytest.raises(ValueError):
        NoiseParams((np.pi / 2, 0.0, 0.0))


def test_gateop_rejects_non_unitary():
    with pytest.raises(ValueError, match="unitary"):
        GateOp(np.diag([1.0, 1, 1, 0.5]).astype(complex), "Bad")


class TestLocalRot:
    def test_pi_about_x_is_pauli(self):
        u = local_rot(np.pi, 0.0, "A").matrix
        assert np.allclose(u, -1j * kron(PAULI_X, ID2))

    def test_zero_angle_identity(self):
        for phi in (0.0, 1.0, 2.5):
            assert np.allclose(local_rot(0.0, phi, "D").matrix, np.eye(4))

    def test_half_pi_about_y_superposes(self):
        u = local_rot(np.pi / 2, np.pi / 2, "A").matrix
        out = u @ np.array([1, 0, 0, 0], dtype=complex)
        assert np.allclose(out, np.array([1, 0, 1, 0]) / np.sqrt(2))


class TestUzz:
    def test_ideal_diagonal(self):
        expect = np.diag(np.exp(-1j * np.pi / 8 * np.array([1, -1, -1, 1])))
        assert np.allclose(u_zz().matrix, expect)

    def test_composition_doubles_angle(self):
        u = u_zz().matrix
        expect = np.diag(np.exp(-1j * np.pi / 4 * np.array([1, -1, -1, 1])))
        assert np.allclose(u @ u, expect)

    def test_unitary_for_any_deviation(self, rng):
        for d in rng.uniform(-1, 1, 5):
            u = u_zz(d).matrix
            assert np.allclose(u.conj().T @ u, np.eye(4))


class TestCzHalf:
    def test_ideal_equals_quarter_zz(self):
        expect = np.diag(np.exp(-1j * np.pi / 4 * np.array([1, -1, -1, 1])))
        for slot in (1, 2, 3):
            assert np.allclose(cz_half(slot).matrix, expect, atol=1e-12)

    def test_half_pi_deviation_doubles_phase(self):
        nz = NoiseParams((np.pi / 2 - 1e-9, 0.0, 0.0))
        got = cz_half(1, nz).matrix
        expect = np.diag(np.exp(-1j * np.pi / 2 * np.array([1, -1, -1, 1])))
        assert np.max(np.abs(got - expect)) < 1e-8

    def test_slot_out_of_range(self):
        with pytest.raises(ValueError):
            cz_half(4)


class TestBellPrep:
    def test_maps_vacuum_to_odd_bell(self):
        psi = bell_prep().matrix @ np.array([1, 0, 0, 0], dtype=complex)
        assert abs(np.vdot(BELL, psi)) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_output_concurrence_is_one(self):
        from demongain.tomography import concurrence

        psi = bell_prep().matrix @ np.array([1, 0, 0, 0], dtype=complex)
        assert concurrence(np.outer(psi, psi.conj())) == pytest.approx(1.0, abs=1e-10)

    def test_noisy_fidelity_regression(self):
        # frozen output of this simulator at the largest paper deviation
        nz = NoiseParams((0.165 * np.pi / 2, 0.0, 0.0))
        psi = bell_prep(nz).matrix @ np.array([1, 0, 0, 0], dtype=complex)
        fid = abs(np.vdot(BELL, psi)) ** 2
        assert fid < 1.0
        assert fid == pytest.approx(0.9833000510084537, abs=1e-12)


class TestControlledY:
    def test_zero_angle_identity(self):
        assert max_abs_after_phase(cy(0.0).matrix, np.eye(4)) < 1e-12

    @pytest.mark.parametrize("theta", np.arange(0, np.pi / 2 + 1e-9, np.pi / 8))
    def test_matches_closed_form(self, theta):
        assert max_abs_after_phase(cy(theta).matrix, cy_exact(theta)) <= 1e-9

    def test_bell_to_resource_state(self):
        th = 1.1
        psi = cy(th).matrix @ BELL
        expect = np.array([-np.sin(th), 1, np.cos(th), 0], dtype=complex) / np.sqrt(2)
        assert max_abs_after_phase(psi.reshape(4, 1), expect.reshape(4, 1)) < 1e-12

    def test_demon_zero_block_rotation(self):
        # on the demon-|0> block cy(theta) acts as exp[-i theta Y_A]
        th = 0.9
        u = cy(th).matrix
        block = u[np.ix_([0, 2], [0, 2])]
        ry = np.cos(th) * ID2 - 1j * np.sin(th) * PAULI_Y
        assert np.max(np.abs(block - ry)) < 1e-12
        assert np.max(np.abs(u[np.ix_([1, 3], [1, 3])] - ID2)) < 1e-12


class TestSwap:
    def test_exchanges_basis_states(self):
        v = np.zeros(4, dtype=complex)
        v[1] = 1  # |0_A 1_D>
        out = swap().matrix @ v
        assert out[2] == 1  # |1_A 0_D>

    def test_involution(self):
        s = swap().matrix
        assert np.allclose(s @ s, np.eye(4))

    def test_conjugation_swaps_factors(self, rng):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        s = swap().matrix
        assert np.allclose(s @ kron(a, b) @ s.conj().T, kron(b, a))


class TestApply:
    def test_identity(self, rng):
        rho = random_density(rng)
        assert np.allclose(apply(GateOp(np.eye(4, dtype=complex), "Id"), rho), rho)

    def test_bell_state_swap_invariant(self):
        rho = np.outer(BELL, BELL.conj())
        assert np.allclose(apply(swap(), rho), rho)

    def test_preserves_trace_spectrum_purity(self, rng):
        rho = random_density(rng)
        u = kron(haar_unitary(rng), haar_unitary(rng))
        out = apply(u, rho)
        assert abs(np.trace(out) - np.trace(rho)) < 1e-12
        assert np.allclose(
            np.sort(np.linalg.eigvalsh(out)), np.sort(np.linalg.eigvalsh(rho)), atol=1e-12
        )


def test_zero_noise_gates_equal_ideal():
    nz = NoiseParams.zeros()
    assert np.array_equal(cz_half(2, nz).matrix, cz_half(2).matrix)
    assert np.array_equal(bell_prep(nz).matrix, bell_prep().matrix)
    assert np.array_equal(cy(0.4, nz).matrix, cy(0.4).matrix)


def test_all_gates_unitary_under_noise():
    for g in (
        bell_prep(PAPER_DELTAS),
        cy(0.7, PAPER_DELTAS),
        cz_half(3, PAPER_DELTAS),
        swap(),
        local_rot(1.2, 0.3, "D"),
    ):
        u = g.matrix
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-10
