"""Statevector simulation of the angle-encoding circuit and its kernel.

Qubit 0 is the most significant bit of the basis-state index, so for two
qubits the amplitude order is |00>, |01>, |10>, |11>. The encoding circuit
packs two features per qubit into the first two angles of the universal
one-qubit gate

    G(theta, phi, lam) = [[cos(t/2),            -e^{i lam} sin(t/2)],
                          [e^{i phi} sin(t/2),   e^{i (phi+lam)} cos(t/2)]]

and entangles neighbours with a CNOT chain; a second rotation layer repeats
the pattern with cyclically shifted feature pairs. The kernel between two
samples is the squared overlap of their encoded states, equal to the
probability of the all-zeros outcome of the compound circuit U(x2)^dag U(x1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RangeError, ShapeError


@dataclass(frozen=True)
class EncodingCircuit:
    n_qubits: int = 8
    angle_scale: float = math.pi
    permutation_shift: int = 1

    @property
    def n_features(self) -> int:
        return 2 * self.n_qubits

    def operations(self):
        """Symbolic gate list; G entries name the feature indices they read."""
        ops = []
        for layer in range(2):
            for q in range(self.n_qubits):
                src = (q + layer * self.permutation_shift) % self.n_qubits
                ops.append(("g", q, 2 * src, 2 * src + 1))
            for q in range(self.n_qubits - 1):
                ops.append(("cnot", q, q + 1))
        return ops


class StateVector:
    """Immutable n-qubit state; gate applications return new instances."""

    def __init__(self, amplitudes: np.ndarray, n_qubits: int):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (2**n_qubits,):
            raise ShapeError(f"need {2**n_qubits} amplitudes for {n_qubits} qubits")
        self.amplitudes = amplitudes
        self.n_qubits = n_qubits

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    def norm(self) -> float:
        return float(np.sqrt((np.abs(self.amplitudes) ** 2).sum()))

    def probability(self, basis_index: int) -> float:
        return float(np.abs(self.amplitudes[basis_index]) ** 2)


def _g_entries(theta, phi, lam):
    half = np.asarray(theta, dtype=np.float64) / 2.0
    c, s = np.cos(half), np.sin(half)
    phi = np.asarray(phi, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    return c, -np.exp(1j * lam) * s, np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c


def _apply_g_batch(states: np.ndarray, n_qubits: int, qubit: int, theta, phi, lam) -> None:
    """Apply G to one qubit of a (batch, 2**n) amplitude array, in place.

    Angles may be scalars or per-row arrays.
    """
    m00, m01, m10, m11 = _g_entries(theta, phi, lam)
    shape = (states.shape[0], 2**qubit, 2, -1)
    view = states.reshape(shape)
    if np.ndim(m00):  # per-row angles broadcast over the qubit axes
        m00, m01, m10, m11 = (m.reshape(-1, 1, 1) for m in (m00, m01, m10, m11))
    a0 = view[:, :, 0, :].copy()
    a1 = view[:, :, 1, :]
    view[:, :, 0, :] = m00 * a0 + m01 * a1
    view[:, :, 1, :] = m10 * a0 + m11 * a1


def _cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    if control == target or not (0 <= control < n_qubits and 0 <= target < n_qubits):
        raise ShapeError("control and target must be distinct valid qubits")
    idx = np.arange(2**n_qubits)
    control_bit = (idx >> (n_qubits - 1 - control)) & 1
    return np.where(control_bit == 1, idx ^ (1 << (n_qubits - 1 - target)), idx)


def apply_g(state: StateVector, qubit: int, theta: float, phi: float, lam: float) -> StateVector:
    """Apply the universal one-qubit gate to one qubit."""
    if not 0 <= qubit < state.n_qubits:
        raise ShapeError(f"qubit {qubit} out of range")
    amps = state.amplitudes[None, :].copy()
    _apply_g_batch(amps, state.n_qubits, qubit, theta, phi, lam)
    return StateVector(amps[0], state.n_qubits)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Flip the target qubit on basis states where the control is 1."""
    perm = _cnot_permutation(state.n_qubits, control, target)
    return StateVector(state.amplitudes[perm], state.n_qubits)


def _check_features(x: np.ndarray, circuit: EncodingCircuit, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != circuit.n_features:
        raise ShapeError(f"{name} must have {circuit.n_features} features per row")
    if not (np.all(x >= 0.0) and np.all(x <= 1.0)):
        raise RangeError(f"{name} features must lie in [0, 1]")
    return x


def _encode_batch(x: np.ndarray, circuit: EncodingCircuit) -> np.ndarray:
    states = np.zeros((x.shape[0], 2**circuit.n_qubits), dtype=np.complex128)
    states[:, 0] = 1.0
    for op in circuit.operations():
        if op[0] == "g":
            _, q, ti, pi_ = op
            _apply_g_batch(states, circuit.n_qubits, q,
                           circuit.angle_scale * x[:, ti],
                           circuit.angle_scale * x[:, pi_], 0.0)
        else:
            states = states[:, _cnot_permutation(circuit.n_qubits, op[1], op[2])]
    return states


def encode_state(features, circuit: EncodingCircuit = EncodingCircuit()) -> StateVector:
    """Encode one feature vector into its circuit state."""
    x = _check_features(features, circuit, "features")
    if x.shape[0] != 1:
        raise ShapeError("encode_state takes a single feature vector")
    return StateVector(_encode_batch(x, circuit)[0], circuit.n_qubits)


def kernel_value(x1, x2, circuit: EncodingCircuit = EncodingCircuit()) -> float:
    """Squared overlap |<phi(x1)|phi(x2)>|^2 of two encoded states."""
    s1 = encode_state(x1, circuit)
    s2 = encode_state(x2, circuit)
    return float(np.abs(np.vdot(s1.amplitudes, s2.amplitudes)) ** 2)


def compound_zero_probability(x1, x2, circuit: EncodingCircuit = EncodingCircuit()) -> float:
    """Probability of the all-zeros outcome after U(x2)^dag U(x1) |0...0>.

    The inverse circuit applies the gate list reversed, with each
    G(theta, phi, lam) replaced by G(-theta, -lam, -phi); CNOT is its own
    inverse. Equals kernel_value(x1, x2) up to simulator round-off.
    """
    a1 = _check_features(x1, circuit, "x1")
    a2 = _check_features(x2, circuit, "x2")
    if a1.shape[0] != 1 or a2.shape[0] != 1:
        raise ShapeError("compound_zero_probability takes single feature vectors")
    states = _encode_batch(a1, circuit)
    scale = circuit.angle_scale
    for op in reversed(circuit.operations()):
        if op[0] == "g":
            _, q, ti, pi_ = op
            _apply_g_batch(states, circuit.n_qubits, q,
                           -scale * a2[:, ti], 0.0, -scale * a2[:, pi_])
        else:
            states = states[:, _cnot_permutation(circuit.n_qubits, op[1], op[2])]
    return float(np.abs(states[0, 0]) ** 2)


@dataclass
class KernelMatrix:
    values: np.ndarray
    provenance: str  # "exact" or "shots:R"


def kernel_matrix(a, b=None, circuit: EncodingCircuit = EncodingCircuit(),
                  shots: int = 0, seed: int = 0) -> KernelMatrix:
    """Gram matrix of kernel values between the rows of a and b.

    With b omitted the matrix is the symmetric Gram of a. shots=0 computes
    exact overlaps; shots=R replaces each entry with the frequency of the
    all-zeros outcome in R draws from the compound-circuit distribution,
    using a per-entry child generator seeded from (seed, i, j) so results do
    not depend on evaluation order. Symmetric shot matrices sample each
    unordered pair once and mirror it.
    """
    symmetric = b is None
    a = _check_features(a, circuit, "a")
    b = a if symmetric else _check_features(b, circuit, "b")
    sa = _encode_batch(a, circuit)
    sb = sa if symmetric else _encode_batch(b, circuit)
    gram = np.abs(sa.conj() @ sb.T) ** 2
    if shots == 0:
        return KernelMatrix(gram, "exact")
    if shots < 0:
        raise RangeError("shots must be non-negative")

    sampled = np.empty_like(gram)
    for i in range(gram.shape[0]):
        j_start = i if symmetric else 0
        for j in range(j_start, gram.shape[1]):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, j]))
            p = min(max(gram[i, j], 0.0), 1.0)
            sampled[i, j] = rng.binomial(shots, p) / shots
            if symmetric:
                sampled[j, i] = sampled[i, j]
    return KernelMatrix(sampled, f"shots:{shots}")
