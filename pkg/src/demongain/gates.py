"""Two-qubit circuit blocks for the feedback energy-extraction protocol.

The native set is single-qubit rotations R(theta, phi) about axes in the
XY plane and the entangling phase gate U_ZZ = exp[-i (pi/8) Z(x)Z]. A
composite controlled-Z pi/2 block is two U_ZZ gates with a simultaneous
X(x)X echo in between. Three such blocks appear in the circuit (one in
the Bell preparation, two inside the parametric controlled-Y); each may
carry a coherent phase deviation delta_phi relative to its preset pi/2
two-qubit phase.

Angle convention for the controlled-Y: cy(theta) acts as exp[-i theta Y]
on the agent when the demon is in |0>, so that cy(theta) applied to the
odd-parity Bell state yields amplitudes (-sin(theta), 1, cos(theta), 0)/sqrt(2)
in the (|00>, |01>, |10>, |11>) basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qlin import ID2, PAULI_X, PAULI_Y, PAULI_Z, dag, kron

UNITARITY_TOL = 1e-10

_XX = kron(PAULI_X, PAULI_X)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class NoiseParams:
    """Coherent phase deviations of the three controlled-Z pi/2 blocks."""

    delta_phi: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.delta_phi) != 3:
            raise ValueError("delta_phi must have exactly three entries")
        for d in self.delta_phi:
            if not abs(d) < np.pi / 2:
                raise ValueError(f"|delta_phi| must be < pi/2, got {d}")

    @classmethod
    def zeros(cls) -> "NoiseParams":
        return cls((0.0, 0.0, 0.0))


@dataclass(frozen=True)
class GateOp:
    """A 4x4 unitary with provenance metadata."""

    matrix: np.ndarray
    label: str
    delta_phi_slot: int | None = None

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if u.shape != (4, 4):
            raise ValueError(f"gate matrix must be 4x4, got {u.shape}")
        dev = np.max(np.abs(dag(u) @ u - np.eye(4)))
        if dev > UNITARITY_TOL:
            raise ValueError(f"gate is not unitary: max |U^dag U - I| = {dev:.3e}")
        object.__setattr__(self, "matrix", u)


def _rot2(theta: float, phi: float) -> np.ndarray:
    """exp[-i (theta/2) (cos(phi) X + sin(phi) Y)]."""
    axis = np.cos(phi) * PAULI_X + np.sin(phi) * PAULI_Y
    return np.cos(theta / 2) * ID2 - 1j * np.sin(theta / 2) * axis


def _rz2(alpha: float) -> np.ndarray:
    return np.diag(np.exp([-0.5j * alpha, 0.5j * alpha]))


def _embed(u2: np.ndarray, target: str) -> np.ndarray:
    if target == "A":
        return kron(u2, ID2)
    if target == "D":
        return kron(ID2, u2)
    raise ValueError(f"target must be 'A' or 'D', got {target!r}")


def local_rot(theta: float, phi: float, target: str) -> GateOp:
    """Single-qubit rotation about an XY-plane axis, embedded on one qubit."""
    return GateOp(_embed(_rot2(theta, phi), target), "LocalRot")


def u_zz(delta_phi: float = 0.0) -> GateOp:
    """exp[-i (pi/8 + delta_phi/4) Z(x)Z]; half of a controlled-Z pi/2 block."""
    angle = np.pi / 8 + delta_phi / 4
    zz = np.array([1, -1, -1, 1])
    return GateOp(np.diag(np.exp(-1j * angle * zz)), "Uzz")


def cz_half(slot: int, noise: NoiseParams | None = None) -> GateOp:
    """Controlled-Z pi/2 block: u_zz . (X(x)X) . u_zz . (X(x)X).

    Total two-qubit phase is pi/2 + delta_phi[slot-1]; the deviation is
    split evenly over the two u_zz halves (the split is unobservable at
    the composite level since the halves commute).
    """
    if slot not in (1, 2, 3):
        raise ValueError(f"slot must be 1, 2 or 3, got {slot}")
    noise = noise or NoiseParams.zeros()
    d = noise.delta_phi[slot - 1]
    half = u_zz(d).matrix
    return GateOp(half @ _XX @ half @ _XX, "CZHalf", delta_phi_slot=slot)


def _cnot_d_to_a(slot: int, noise: NoiseParams | None) -> np.ndarray:
    """CNOT with demon control and agent target, built from one cz_half block."""
    cz = kron(_rz2(-np.pi / 2), _rz2(-np.pi / 2)) @ cz_half(slot, noise).matrix
    cz = np.exp(-1j * np.pi / 4) * cz  # fixes cz to diag(1,1,1,-1) at zero noise
    h_a = _embed(_HADAMARD, "A")
    return h_a @ cz @ h_a


def bell_prep(noise: NoiseParams | None = None) -> GateOp:
    """Preparation block mapping |00> to the odd-parity Bell state.

    Simultaneous pi/2 rotations about Y on both qubits, one controlled-Z
    pi/2 block (slot 1), and a closing pi/2 rotation about -X on the
    agent. With zero noise the output on |00> is (|01> + |10>)/sqrt(2)
    up to a global phase.
    """
    open_rots = _embed(_rot2(np.pi / 2, np.pi / 2), "A") @ _embed(
        _rot2(np.pi / 2, np.pi / 2), "D"
    )
    close_rot = _embed(_rot2(np.pi / 2, np.pi), "A")
    return GateOp(
        close_rot @ cz_half(1, noise).matrix @ open_rots, "BellPrep", delta_phi_slot=1
    )


def cy_exact(theta: float) -> np.ndarray:
    """Closed-form controlled-Y: exp[-i theta Y_A] on the agent iff demon in |0>."""
    ry = _rot2(2 * theta, np.pi / 2)  # exp[-i theta Y]
    p0 = np.array([[1, 0], [0, 0]], dtype=complex)
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)
    return kron(ry, p0) + kron(ID2, p1)


def cy(theta: float, noise: NoiseParams | None = None) -> GateOp:
    """Parametric controlled-Y, decomposed around cz_half blocks 2 and 3.

    Decomposition: CNOT(slot 3) . Ry_A(theta) . CNOT(slot 2) . Ry_A(theta),
    with the CNOTs (demon control) flipping the sign of the second agent
    rotation on the |1_D> branch so the two halves cancel there. Equals
    cy_exact(theta) exactly at zero noise.
    """
    ry_half = _embed(_rot2(theta, np.pi / 2), "A")
    u = _cnot_d_to_a(3, noise) @ ry_half @ _cnot_d_to_a(2, noise) @ ry_half
    return GateOp(u, "ControlledY")


def swap() -> GateOp:
    """Exchange the two qubits."""
    return GateOp(_SWAP.copy(), "Swap")


def pauli(which: str, target: str) -> GateOp:
    """Embedded Pauli gate on one qubit."""
    p = {"X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}[which]
    return GateOp(_embed(p, target), f"Pauli{which}")


def apply(u: GateOp | np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Conjugate a density matrix by a unitary: U rho U^dag."""
    m = u.matrix if isinstance(u, GateOp) else np.asarray(u, dtype=complex)
    return m @ rho @ dag(m)
