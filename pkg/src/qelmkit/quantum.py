"""Dense state-vector simulation of small qubit registers.

Conventions used throughout:

- Qubit 0 is the least-significant bit of the amplitude index, so the basis
  state |q_{D-1} ... q_1 q_0> lives at index sum_b q_b * 2^b.
- Rotation gates use the half-angle convention,
  RX(t) = [[cos(t/2), -i sin(t/2)], [-i sin(t/2), cos(t/2)]],
  RY(t) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]],
  RZ(t) = diag(exp(-i t/2), exp(+i t/2)).
- Global phase is never normalized away; compare expectations or moduli.

All gate kernels operate on the last axis of an array, so a batch of states
with shape (batch, 2^D) goes through the same code path as a single state.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin

import numpy as np

from .errors import ConfigurationError, ShapeError, ValidationError

MAX_STATE_QUBITS = 16    # 2^16 amplitudes ~ 1 MB
MAX_DENSE_QUBITS = 12    # 2^12-dim dense matrix ~ 256 MB is the ceiling

ROTATION_KINDS = ("RX", "RY", "RZ")
PAULI_KINDS = ("X", "Y", "Z")
CONTROLLED_KINDS = ("CNOT", "CZ")
GATE_KINDS = ROTATION_KINDS + PAULI_KINDS + CONTROLLED_KINDS

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = {"X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def rotation_matrix(axis: str, angle: float) -> np.ndarray:
    """2x2 unitary for a rotation of `angle` radians around a Pauli axis."""
    c, s = cos(angle / 2.0), sin(angle / 2.0)
    if axis == "X":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if axis == "Y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "Z":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise ConfigurationError(f"unknown rotation axis {axis!r}")


@dataclass(frozen=True)
class GateOp:
    """One gate: a rotation, a Pauli, or a controlled two-qubit gate."""

    kind: str
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        needs_angle = self.kind in ROTATION_KINDS
        if needs_angle != (self.angle is not None):
            raise ConfigurationError(
                f"{self.kind} gate {'requires' if needs_angle else 'takes no'} angle"
            )
        needs_control = self.kind in CONTROLLED_KINDS
        if needs_control != (self.control is not None):
            raise ConfigurationError(
                f"{self.kind} gate {'requires' if needs_control else 'takes no'} control"
            )
        if self.control is not None and self.control == self.target:
            raise ConfigurationError("control and target must differ")


@dataclass
class StateVector:
    """Pure state of `num_qubits` qubits as 2^D complex amplitudes."""

    num_qubits: int
    amplitudes: np.ndarray

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class DenseUnitary:
    """Explicit dim x dim complex matrix; dim must be a power of two."""

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        if self.dim < 1 or (self.dim & (self.dim - 1)) != 0:
            raise ConfigurationError(f"dim {self.dim} is not a power of two")
        if self.entries.shape != (self.dim, self.dim):
            raise ShapeError(
                f"entries shape {self.entries.shape} does not match dim {self.dim}"
            )


def unitarity_defect(entries: np.ndarray) -> float:
    """max |U^dag U - I|, zero (to precision) for a unitary matrix."""
    dim = entries.shape[0]
    return float(np.max(np.abs(entries.conj().T @ entries - np.eye(dim))))


def dump_unitary_csv(path, u: "DenseUnitary | np.ndarray") -> None:
    """Debug dump: one row per matrix row, each entry as re,im column pair."""
    entries = u.entries if isinstance(u, DenseUnitary) else np.asarray(u)
    with open(path, "w") as fh:
        for row in entries:
            fh.write(",".join(f"{float(c.real)!r},{float(c.imag)!r}"
                              for c in row) + "\n")


@dataclass
class IsingParams:
    """Couplings J (symmetric, zero diagonal), transverse fields a, step dt
    for the Hamiltonian H = sum_{k<j} J[k,j] Z_k Z_j + sum_j a[j] X_j."""

    num_qubits: int
    couplings: np.ndarray
    fields: np.ndarray
    time_step: float = 1.0

    def __post_init__(self):
        d = self.num_qubits
        self.couplings = np.asarray(self.couplings, dtype=float)
        self.fields = np.asarray(self.fields, dtype=float)
        if self.couplings.shape != (d, d):
            raise ShapeError(f"couplings must be {d}x{d}")
        if self.fields.shape != (d,):
            raise ShapeError(f"fields must have length {d}")
        if not np.all(np.isfinite(self.couplings)) or not np.all(np.isfinite(self.fields)):
            raise ValidationError("Ising parameters must be finite")
        if not np.allclose(self.couplings, self.couplings.T, atol=1e-12):
            raise ValidationError("couplings matrix must be symmetric")
        if np.any(np.abs(np.diagonal(self.couplings)) > 1e-12):
            raise ValidationError("couplings diagonal must be zero")
        if not self.time_step > 0:
            raise ValidationError("time_step must be positive")


# ---------------------------------------------------------------------------
# state construction and gate application
# ---------------------------------------------------------------------------

def new_state(num_qubits: int) -> StateVector:
    """The all-zeros computational basis state |0...0>."""
    if not 1 <= num_qubits <= MAX_STATE_QUBITS:
        raise ConfigurationError(
            f"num_qubits must be in [1, {MAX_STATE_QUBITS}], got {num_qubits}"
        )
    amplitudes = np.zeros(1 << num_qubits, dtype=complex)
    amplitudes[0] = 1.0
    return StateVector(num_qubits, amplitudes)


def apply_single_qubit(amps: np.ndarray, num_qubits: int, qubit: int,
                       u: np.ndarray) -> np.ndarray:
    """Apply a 2x2 matrix to one qubit of a (..., 2^D) amplitude array."""
    dim = 1 << num_qubits
    lead = amps.shape[:-1]
    arr = amps.reshape(-1, dim >> (qubit + 1), 2, 1 << qubit)
    out = np.einsum("ab,ihbl->ihal", u, arr)
    return out.reshape(*lead, dim)


def apply_cz(amps: np.ndarray, num_qubits: int, q_a: int, q_b: int) -> np.ndarray:
    """Sign flip on amplitudes where both qubits are 1 (symmetric in q_a, q_b)."""
    idx = np.arange(1 << num_qubits)
    mask = ((idx >> q_a) & (idx >> q_b) & 1).astype(bool)
    out = amps.copy()
    out[..., mask] *= -1.0
    return out


def apply_cnot(amps: np.ndarray, num_qubits: int, control: int, target: int) -> np.ndarray:
    """Swap target-bit amplitude pairs wherever the control bit is 1."""
    idx = np.arange(1 << num_qubits)
    src = np.where((idx >> control) & 1 == 1, idx ^ (1 << target), idx)
    return amps[..., src]


def apply_gate_kernel(amps: np.ndarray, num_qubits: int, gate: GateOp) -> np.ndarray:
    """Dispatch one GateOp over the last axis of an amplitude array."""
    for q in (gate.target, gate.control):
        if q is not None and not 0 <= q < num_qubits:
            raise IndexError(f"qubit {q} out of range for {num_qubits}-qubit state")
    if gate.kind in ROTATION_KINDS:
        return apply_single_qubit(amps, num_qubits, gate.target,
                                  rotation_matrix(gate.kind[1], gate.angle))
    if gate.kind in PAULI_KINDS:
        return apply_single_qubit(amps, num_qubits, gate.target, _PAULI[gate.kind])
    if gate.kind == "CZ":
        return apply_cz(amps, num_qubits, gate.control, gate.target)
    return apply_cnot(amps, num_qubits, gate.control, gate.target)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Apply one gate, returning a new state."""
    return StateVector(state.num_qubits,
                       apply_gate_kernel(state.amplitudes, state.num_qubits, gate))


def apply_dense_unitary(state: StateVector, u: DenseUnitary | np.ndarray) -> StateVector:
    """Apply an explicit matrix to the full register."""
    entries = u.entries if isinstance(u, DenseUnitary) else np.asarray(u)
    if entries.shape != (state.dim, state.dim):
        raise ShapeError(
            f"unitary shape {entries.shape} does not match state dim {state.dim}"
        )
    return StateVector(state.num_qubits, entries @ state.amplitudes)


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------

def pauli_expectations(amps: np.ndarray, num_qubits: int, qubit: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """<X>, <Y>, <Z> of one qubit for a (batch, 2^D) amplitude array.

    Works on the two half-slices along the qubit axis: with c = sum conj(a0)*a1,
    <X> = 2 Re c, <Y> = 2 Im c, <Z> = sum |a0|^2 - |a1|^2. Never materializes
    a 2^D x 2^D operator.
    """
    dim = 1 << num_qubits
    arr = amps.reshape(-1, dim >> (qubit + 1), 2, 1 << qubit)
    a0, a1 = arr[:, :, 0, :], arr[:, :, 1, :]
    cross = np.sum(np.conj(a0) * a1, axis=(1, 2))
    z = np.sum(np.abs(a0) ** 2 - np.abs(a1) ** 2, axis=(1, 2))
    return 2.0 * cross.real, 2.0 * cross.imag, z


def expectation_pauli(state: StateVector, qubit: int, axis: str) -> float:
    """<psi| P_qubit |psi> for P in {X, Y, Z}; always within [-1, 1]."""
    if not 0 <= qubit < state.num_qubits:
        raise IndexError(f"qubit {qubit} out of range")
    if axis not in PAULI_KINDS:
        raise ConfigurationError(f"axis must be one of {PAULI_KINDS}, got {axis!r}")
    x, y, z = pauli_expectations(state.amplitudes[None, :], state.num_qubits, qubit)
    value = {"X": x, "Y": y, "Z": z}[axis][0]
    return float(np.clip(value, -1.0, 1.0))


# ---------------------------------------------------------------------------
# random unitary construction
# ---------------------------------------------------------------------------

def haar_unitary(dim: int, seed: int) -> DenseUnitary:
    """Haar-distributed random unitary via QR of a complex Ginibre matrix.

    The QR phases are fixed by rescaling Q's columns with R_ii / |R_ii|,
    which makes the distribution exactly Haar rather than QR-convention
    dependent. Deterministic for a fixed seed.
    """
    if dim < 1 or (dim & (dim - 1)) != 0:
        raise ConfigurationError(f"dim must be a power of two, got {dim}")
    if dim > (1 << MAX_DENSE_QUBITS):
        raise ConfigurationError(f"dim {dim} exceeds dense cap 2^{MAX_DENSE_QUBITS}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    phases = diag / np.abs(diag)
    return DenseUnitary(dim, q * phases[None, :])


def ising_hamiltonian(params: IsingParams) -> np.ndarray:
    """Dense 2^D x 2^D matrix of H = sum_{k<j} J[k,j] Z_k Z_j + sum_j a[j] X_j.

    ZZ terms are diagonal (products of the +-1 bit signs); each X_j adds 1s
    on the bit-j flip off-diagonals.
    """
    d = params.num_qubits
    dim = 1 << d
    idx = np.arange(dim)
    signs = 1.0 - 2.0 * ((idx[:, None] >> np.arange(d)[None, :]) & 1)
    diag = np.zeros(dim)
    for k in range(d):
        for j in range(k + 1, d):
            diag += params.couplings[k, j] * signs[:, k] * signs[:, j]
    h = np.diag(diag).astype(complex)
    for j in range(d):
        h[idx ^ (1 << j), idx] += params.fields[j]
    return h


def ising_unitary(params: IsingParams) -> DenseUnitary:
    """exp(-i H dt) via Hermitian eigendecomposition (exact, no Trotter error)."""
    if params.num_qubits > MAX_DENSE_QUBITS:
        raise ConfigurationError(
            f"dense exponential capped at {MAX_DENSE_QUBITS} qubits"
        )
    h = ising_hamiltonian(params)
    if not np.allclose(h, h.conj().T, atol=1e-12):
        raise ValidationError("Hamiltonian is not Hermitian")
    eigvals, eigvecs = np.linalg.eigh(h)
    phases = np.exp(-1j * eigvals * params.time_step)
    return DenseUnitary(1 << params.num_qubits,
                        (eigvecs * phases[None, :]) @ eigvecs.conj().T)


def sample_ising_params(num_qubits: int, seed: int, time_step: float = 1.0) -> IsingParams:
    """Couplings and fields drawn i.i.d. uniform on [-1, 1], J symmetrized."""
    if num_qubits < 1:
        raise ConfigurationError("num_qubits must be >= 1")
    rng = np.random.default_rng(seed)
    couplings = np.zeros((num_qubits, num_qubits))
    upper = np.triu_indices(num_qubits, k=1)
    couplings[upper] = rng.uniform(-1.0, 1.0, size=len(upper[0]))
    couplings = couplings + couplings.T
    fields = rng.uniform(-1.0, 1.0, size=num_qubits)
    return IsingParams(num_qubits, couplings, fields, time_step)
