"""Rank-2 mixed-state families with mutual steering, and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .qcore import DensityMatrix, MAX_QUBITS, StateVector, ket, negativity, tensor


@dataclass(frozen=True)
class TwoQubitFamilyParams:
    nu1: float
    zeta: float
    tau: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.nu1 <= 1.0:
            raise ValueError(f"nu1 must lie in [0, 1], got {self.nu1}")

    @property
    def nu2(self) -> float:
        return 1.0 - self.nu1

    @property
    def visibility(self) -> float:
        """V = nu1 - nu2."""
        return 2.0 * self.nu1 - 1.0


@dataclass(frozen=True, eq=False)
class NQubitFamilyParams:
    n_qubits: int
    nu1: float
    zeta: float
    chi1: StateVector
    chi2: StateVector
    tau: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.nu1 <= 1.0:
            raise ValueError(f"nu1 must lie in [0, 1], got {self.nu1}")
        if not 3 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must lie in [3, {MAX_QUBITS}], got {self.n_qubits}")
        for name in ("chi1", "chi2"):
            chi = getattr(self, name)
            if chi.n_qubits != self.n_qubits - 2:
                raise ValueError(
                    f"{name} has {chi.n_qubits} qubits, expected {self.n_qubits - 2}"
                )

    @property
    def nu2(self) -> float:
        return 1.0 - self.nu1

    @property
    def visibility(self) -> float:
        return 2.0 * self.nu1 - 1.0


def tail_params(nu1: float, zeta: float, phi: float, tau: float = 0.0) -> NQubitFamilyParams:
    """Three-qubit family with chi1 = |0>, chi2 = cos(phi)|0> + sin(phi)|1>."""
    return NQubitFamilyParams(
        3, nu1, zeta, ket("0"), StateVector([np.cos(phi), np.sin(phi)]), tau
    )


def product_tail_params(
    nu1: float, zeta: float, f: Sequence[float], tau: float = 0.0
) -> NQubitFamilyParams:
    """N-qubit family with chi1 = |0...0> and chi2 = prod_i (f_i|0> + g_i|1>).

    ``g_i = sqrt(1 - f_i**2)`` so every tail factor is real and normalized.
    """
    f = [float(x) for x in f]
    if not f:
        raise ValueError("need at least one tail coefficient")
    if any(not 0.0 <= x <= 1.0 for x in f):
        raise ValueError("tail coefficients f_i must lie in [0, 1]")
    chi2 = StateVector([f[0], np.sqrt(1 - f[0] ** 2)])
    for x in f[1:]:
        chi2 = tensor(chi2, StateVector([x, np.sqrt(1 - x**2)]))
    return NQubitFamilyParams(len(f) + 2, nu1, zeta, ket("0" * len(f)), chi2, tau)


def make_psi_pair(params: TwoQubitFamilyParams) -> tuple[StateVector, StateVector]:
    """The two orthogonal eigenvectors of the two-qubit family."""
    c, s = np.cos(params.zeta / 2), np.sin(params.zeta / 2)
    phase = np.exp(1j * params.tau)
    psi1 = np.array([c, 0, 0, s * phase])
    psi2 = np.array([s, 0, 0, -c * phase])
    return StateVector(psi1), StateVector(psi2)


def _mix(nu1: float, psi1: np.ndarray, psi2: np.ndarray) -> DensityMatrix:
    rho = nu1 * np.outer(psi1, psi1.conj()) + (1 - nu1) * np.outer(psi2, psi2.conj())
    return DensityMatrix(rho)


def make_rho2(params: TwoQubitFamilyParams) -> DensityMatrix:
    psi1, psi2 = make_psi_pair(params)
    return _mix(params.nu1, psi1.amplitudes, psi2.amplitudes)


def make_psi_pair_n(params: NQubitFamilyParams) -> tuple[StateVector, StateVector]:
    c, s = np.cos(params.zeta / 2), np.sin(params.zeta / 2)
    phase = np.exp(1j * params.tau)
    head0 = np.kron(ket("00").amplitudes, params.chi1.amplitudes)
    head1 = np.kron(ket("11").amplitudes, params.chi2.amplitudes)
    return (
        StateVector(c * head0 + s * phase * head1),
        StateVector(s * head0 - c * phase * head1),
    )


def make_rhoN(params: NQubitFamilyParams) -> DensityMatrix:
    psi1, psi2 = make_psi_pair_n(params)
    return _mix(params.nu1, psi1.amplitudes, psi2.amplitudes)


def make_rho2_general(
    nu1: float, zeta: float, beta: float, tau1: float = 0.0, tau2: float = 0.0
) -> DensityMatrix:
    """Two-qubit rank-2 state that only Alice is guaranteed to steer.

    Alice's z-measurement leaves Bob in |0> or in
    cos(beta) e^{i tau1}|0> + sin(beta) e^{i tau2}|1>. The symmetric family
    is recovered at beta = pi/2 (with tau = tau2).
    """
    c, s = np.cos(zeta / 2), np.sin(zeta / 2)
    w = np.array([np.cos(beta) * np.exp(1j * tau1), np.sin(beta) * np.exp(1j * tau2)])
    tail = np.kron([0, 1], w)
    psi1 = c * ket("00").amplitudes + s * tail
    psi2 = s * ket("00").amplitudes - c * tail
    return _mix(nu1, psi1, psi2)


def concurrence_family(params: TwoQubitFamilyParams | NQubitFamilyParams) -> float:
    """C = |V sin(zeta)|."""
    return abs(params.visibility * np.sin(params.zeta))


def is_entangled_ppt(rho: DensityMatrix, tol: float = 1e-12) -> bool:
    """Peres-Horodecki test across qubit 1 | rest (exact for two qubits)."""
    return negativity(rho, [1]) > tol


# -- JSON -------------------------------------------------------------------


def _complex_list(vec: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.ravel(vec)]


def _from_complex_list(items) -> np.ndarray:
    return np.array([complex(re, im) for re, im in items])


def params_to_dict(params: TwoQubitFamilyParams | NQubitFamilyParams) -> dict:
    if isinstance(params, TwoQubitFamilyParams):
        return {"n_qubits": 2, "nu1": params.nu1, "zeta": params.zeta, "tau": params.tau}
    return {
        "n_qubits": params.n_qubits,
        "nu1": params.nu1,
        "zeta": params.zeta,
        "tau": params.tau,
        "chi1": _complex_list(params.chi1.amplitudes),
        "chi2": _complex_list(params.chi2.amplitudes),
    }


def params_from_dict(data: dict) -> TwoQubitFamilyParams | NQubitFamilyParams:
    n = int(data.get("n_qubits", 2))
    nu1, zeta, tau = float(data["nu1"]), float(data["zeta"]), float(data.get("tau", 0.0))
    if n == 2:
        return TwoQubitFamilyParams(nu1, zeta, tau)
    chi1 = StateVector(_from_complex_list(data["chi1"]))
    chi2 = StateVector(_from_complex_list(data["chi2"]))
    return NQubitFamilyParams(n, nu1, zeta, chi1, chi2, tau)


def density_to_dict(rho: DensityMatrix) -> dict:
    return {
        "n_qubits": rho.n_qubits,
        "density_matrix": [_complex_list(row) for row in rho.entries],
    }


def state_from_dict(data: dict) -> DensityMatrix:
    """Build a density matrix from either family parameters or explicit entries."""
    if "density_matrix" in data:
        rows = [_from_complex_list(row) for row in data["density_matrix"]]
        rho = DensityMatrix(np.array(rows))
        if "n_qubits" in data and int(data["n_qubits"]) != rho.n_qubits:
            raise ValueError("n_qubits disagrees with density_matrix size")
        return rho
    params = params_from_dict(data)
    if isinstance(params, TwoQubitFamilyParams):
        return make_rho2(params)
    return make_rhoN(params)


def load_state(path: str | Path) -> DensityMatrix:
    with open(path) as fh:
        return state_from_dict(json.load(fh))
