"""Dense qubit linear algebra: kets, density matrices, tensor products,
partial traces and Bloch-direction measurements.

Qubits are numbered from 1 and ordered big-endian: qubit 1 is the most
significant bit of a basis-state index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 12

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_FLOOR = -1e-10

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([I2, SIGMA_X, SIGMA_Y, SIGMA_Z])


class CapacityError(ValueError):
    """Raised when a request exceeds the dense-simulation capacity."""


def _n_qubits_for_dim(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two >= 2")
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
    return n


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state on ``n_qubits`` qubits."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = _frozen(np.ravel(self.amplitudes))
        _n_qubits_for_dim(amps.size)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state vector not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> StateVector:
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        return cls(amps / np.linalg.norm(amps))

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for_dim(self.amplitudes.size)

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def inner(self, other: StateVector) -> complex:
        """Return ``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def allclose(self, other: StateVector, atol: float = 1e-12) -> bool:
        return np.allclose(self.amplitudes, other.amplitudes, atol=atol, rtol=0)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator on qubits."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        rho = _frozen(self.entries)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {rho.shape}")
        _n_qubits_for_dim(rho.shape[0])
        herm_err = np.max(np.abs(rho - rho.conj().T))
        if herm_err > HERMITIAN_TOL:
            raise ValueError(f"density matrix not Hermitian (max deviation {herm_err:.3e})")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lowest = np.linalg.eigvalsh(rho)[0]
        if lowest < POSITIVITY_FLOOR:
            raise ValueError(f"density matrix has negative eigenvalue {lowest:.3e}")
        object.__setattr__(self, "entries", rho)

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for_dim(self.entries.shape[0])

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in descending order."""
        return np.linalg.eigvalsh(self.entries)[::-1]

    def rank(self, tol: float = 1e-10) -> int:
        return int(np.sum(self.eigenvalues() > tol))

    def allclose(self, other: DensityMatrix | np.ndarray, atol: float = 1e-12) -> bool:
        other_entries = other.entries if isinstance(other, DensityMatrix) else np.asarray(other)
        return np.allclose(self.entries, other_entries, atol=atol, rtol=0)


def ket(bits: str) -> StateVector:
    """Computational basis state, e.g. ``ket("010")``."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"invalid bit string {bits!r}")
    amps = np.zeros(1 << len(bits), dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps)


def maximally_mixed(n_qubits: int) -> DensityMatrix:
    dim = 1 << n_qubits
    return DensityMatrix(np.eye(dim, dtype=complex) / dim)


def tensor(a, b):
    """Kronecker product of two states of the same kind."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        if a.n_qubits + b.n_qubits > MAX_QUBITS:
            raise CapacityError(f"tensor product would have {a.n_qubits + b.n_qubits} qubits")
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        if a.n_qubits + b.n_qubits > MAX_QUBITS:
            raise CapacityError(f"tensor product would have {a.n_qubits + b.n_qubits} qubits")
        return DensityMatrix(np.kron(a.entries, b.entries))
    raise TypeError("tensor expects two StateVectors or two DensityMatrices")


def tensor_all(*items):
    out = items[0]
    for item in items[1:]:
        out = tensor(out, item)
    return out


def _as_tensor(rho: np.ndarray, n: int) -> np.ndarray:
    return rho.reshape((2,) * (2 * n))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduce ``rho`` to the qubits in ``keep`` (1-based), preserving their order."""
    n = rho.n_qubits
    kept = sorted(set(int(q) for q in keep))
    if not kept:
        raise ValueError("keep must name at least one qubit")
    if kept[0] < 1 or kept[-1] > n:
        raise ValueError(f"keep {kept} out of range for {n} qubits")
    traced = [q for q in range(1, n + 1) if q not in kept]
    t = _as_tensor(rho.entries, n)
    # einsum labels: row index of qubit q -> q-1, column -> n+q-1; traced qubits share a label
    row = list(range(n))
    col = [n + q for q in range(n)]
    for q in traced:
        col[q - 1] = row[q - 1]
    out = [row[q - 1] for q in kept] + [col[q - 1] for q in kept]
    reduced = np.einsum(t, row + col, out)
    d = 1 << len(kept)
    return DensityMatrix(reduced.reshape(d, d))


def permute_qubits(rho: DensityMatrix, order: Sequence[int]) -> DensityMatrix:
    """Reorder qubits so that new qubit ``i`` is old qubit ``order[i-1]``."""
    n = rho.n_qubits
    if sorted(order) != list(range(1, n + 1)):
        raise ValueError(f"order {list(order)} is not a permutation of 1..{n}")
    axes = [q - 1 for q in order]
    t = _as_tensor(rho.entries, n).transpose(axes + [n + a for a in axes])
    return DensityMatrix(t.reshape(rho.dim, rho.dim))


def _phase_fix(vec: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(vec) > 1e-12)
    if nz.size == 0:
        return vec
    lead = vec[nz[0]]
    return vec * (abs(lead) / lead)


def spectral_decomposition(rho: DensityMatrix) -> list[tuple[float, StateVector]]:
    """Eigenpairs of ``rho`` with eigenvalues descending.

    Each eigenvector is phase-fixed so that its first nonzero amplitude is
    real and positive. Degenerate eigenspaces come back in whatever
    orthonormal basis the Hermitian solver picks.
    """
    values, vectors = np.linalg.eigh(rho.entries)
    order = np.argsort(values, kind="stable")[::-1]
    pairs = []
    for i in order:
        vec = _phase_fix(vectors[:, i])
        pairs.append((float(values[i]), StateVector(vec / np.linalg.norm(vec))))
    return pairs


@dataclass(frozen=True)
class BlochDirection:
    """Unit vector (sin t cos p, sin t sin p, cos t).

    Any real ``theta`` is accepted and folded into [0, pi] with ``phi``
    shifted by pi when needed, so ``(-t, p)`` and ``(t, p + pi)`` compare
    equal. ``phi`` is reduced into [0, 2 pi).
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        theta = math.remainder(float(self.theta), 2 * np.pi)  # exact, in [-pi, pi]
        phi = float(self.phi)
        if theta < 0:
            theta = -theta
            phi += np.pi
        phi %= 2 * np.pi
        if phi >= 2 * np.pi:
            phi = 0.0
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_vector(cls, vec) -> BlochDirection:
        x, y, z = np.asarray(vec, dtype=float) / np.linalg.norm(vec)
        return cls(float(np.arccos(np.clip(z, -1.0, 1.0))), float(np.arctan2(y, x)))

    @property
    def vector(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    def plus(self) -> StateVector:
        """The +1 eigenstate |+n>."""
        return StateVector(
            [np.cos(self.theta / 2), np.exp(1j * self.phi) * np.sin(self.theta / 2)]
        )

    def minus(self) -> StateVector:
        """The -1 eigenstate |-n>."""
        return StateVector(
            [np.sin(self.theta / 2), -np.exp(1j * self.phi) * np.cos(self.theta / 2)]
        )


Z_AXIS = BlochDirection(0.0, 0.0)
X_AXIS = BlochDirection(np.pi / 2, 0.0)
Y_AXIS = BlochDirection(np.pi / 2, np.pi / 2)


def pauli_observable(direction: BlochDirection) -> np.ndarray:
    """The dichotomic observable n . sigma."""
    x, y, z = direction.vector
    return x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z


@dataclass(frozen=True)
class ProjectorPair:
    """Orthogonal projective measurement along a Bloch direction.

    Outcome 0 is the +1 eigenvalue of ``n . sigma``, outcome 1 the -1 eigenvalue.
    """

    direction: BlochDirection

    @property
    def p0(self) -> np.ndarray:
        return (I2 + pauli_observable(self.direction)) / 2

    @property
    def p1(self) -> np.ndarray:
        return (I2 - pauli_observable(self.direction)) / 2

    def projector(self, outcome: int) -> np.ndarray:
        if outcome not in (0, 1):
            raise ValueError(f"outcome must be 0 or 1, got {outcome}")
        return self.p0 if outcome == 0 else self.p1


def embed_operator(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Lift a single-qubit operator to act on ``qubit`` of an n-qubit register."""
    if not 1 <= qubit <= n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {n_qubits} qubits")
    left = np.eye(1 << (qubit - 1))
    right = np.eye(1 << (n_qubits - qubit))
    return np.kron(np.kron(left, op), right)


def local_expectation(rho: DensityMatrix, ops: Sequence[np.ndarray | None]) -> complex:
    """Return tr(rho . (O_1 x O_2 x ... x O_n)); ``None`` stands for the identity."""
    n = rho.n_qubits
    if len(ops) != n:
        raise ValueError(f"need {n} local operators, got {len(ops)}")
    if n <= 6:
        full = np.ones((1, 1), dtype=complex)
        for op in ops:
            full = np.kron(full, I2 if op is None else op)
        return complex(np.sum(rho.entries * full.T))
    t = _as_tensor(rho.entries, n)
    row = list(range(n))
    col = list(range(n, 2 * n))
    operands: list = [t, row + col]
    for q, op in enumerate(ops):
        if op is None:
            col[q] = row[q]
        else:
            operands += [np.asarray(op), [col[q], row[q]]]
    operands[1] = row + col
    return complex(np.einsum(*operands, [], optimize=True))


def partial_transpose(rho: DensityMatrix, qubits: Iterable[int]) -> np.ndarray:
    """Partial transpose over the given qubits (returned as a raw matrix)."""
    n = rho.n_qubits
    t = _as_tensor(rho.entries, n)
    axes = list(range(2 * n))
    for q in qubits:
        axes[q - 1], axes[n + q - 1] = axes[n + q - 1], axes[q - 1]
    return t.transpose(axes).reshape(rho.dim, rho.dim)


def negativity(rho: DensityMatrix, qubits: Iterable[int]) -> float:
    """Sum of |negative eigenvalues| of the partial transpose."""
    eig = np.linalg.eigvalsh(partial_transpose(rho, qubits))
    return float(-np.sum(eig[eig < 0]))


def pauli_tensor(rho: DensityMatrix) -> np.ndarray:
    """Real correlation tensor T[m1..mn] = tr(rho sigma_m1 x ... x sigma_mn), m in {0,x,y,z}."""
    n = rho.n_qubits
    # interleave row/column indices per qubit, then contract each 4-index with the Pauli basis
    t = _as_tensor(rho.entries, n)
    t = t.transpose([a for q in range(n) for a in (q, n + q)]).reshape((4,) * n)
    basis = PAULIS.transpose(0, 2, 1).reshape(4, 4)  # basis[m, r*2+c] = sigma_m[c, r]
    for axis in range(n):
        t = np.moveaxis(np.tensordot(basis, t, axes=([1], [axis])), 0, axis)
    return t.real.copy()
