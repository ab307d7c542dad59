from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_density
from steerlab.qcore import (
    BlochDirection,
    CapacityError,
    DensityMatrix,
    MAX_QUBITS,
    PAULIS,
    ProjectorPair,
    SIGMA_X,
    SIGMA_Z,
    StateVector,
    X_AXIS,
    Z_AXIS,
    embed_operator,
    ket,
    local_expectation,
    maximally_mixed,
    negativity,
    partial_trace,
    partial_transpose,
    pauli_observable,
    pauli_tensor,
    permute_qubits,
    spectral_decomposition,
    tensor,
    tensor_all,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _partial_trace_loops(rho: np.ndarray, n: int, keep: list[int]) -> np.ndarray:
    """Reference partial trace by explicit index sums."""
    kept = sorted(keep)
    traced = [q for q in range(1, n + 1) if q not in kept]
    dk = 1 << len(kept)
    out = np.zeros((dk, dk), dtype=complex)
    for i, j in itertools.product(range(dk), repeat=2):
        bi = format(i, f"0{len(kept)}b")
        bj = format(j, f"0{len(kept)}b")
        for t in range(1 << len(traced)):
            bt = format(t, f"0{len(traced)}b") if traced else ""
            row, col = ["0"] * n, ["0"] * n
            for q, b in zip(kept, bi):
                row[q - 1] = b
            for q, b in zip(kept, bj):
                col[q - 1] = b
            for q, b in zip(traced, bt):
                row[q - 1] = col[q - 1] = b
            out[i, j] += rho[int("".join(row), 2), int("".join(col), 2)]
    return out


def test_ket_is_big_endian():
    assert ket("10").amplitudes[2] == 1
    assert ket("001").amplitudes[1] == 1


def test_state_vector_rejects_unnormalized():
    with pytest.raises(ValueError):
        StateVector([1.0, 1.0])
    assert StateVector.normalized([1.0, 1.0]).allclose(StateVector([2**-0.5, 2**-0.5]))


def test_density_matrix_validation():
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValueError):
        DensityMatrix(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(3) / 3)


def test_density_matrix_is_read_only():
    rho = maximally_mixed(1)
    with pytest.raises(ValueError):
        rho.entries[0, 0] = 1.0


def test_capacity_cap():
    big = ket("0" * MAX_QUBITS)
    with pytest.raises(CapacityError):
        tensor(big, ket("0"))


def test_partial_trace_of_product():
    a = ket("0").density_matrix()
    b = StateVector.normalized([1, 1j]).density_matrix()
    ab = tensor(a, b)
    assert partial_trace(ab, [1]).allclose(a)
    assert partial_trace(ab, [2]).allclose(b)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(2, 4))
def test_partial_trace_matches_loops(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, n)
    keep = sorted(rng.choice(np.arange(1, n + 1), size=rng.integers(1, n), replace=False).tolist())
    got = partial_trace(rho, keep).entries
    np.testing.assert_allclose(got, _partial_trace_loops(rho.entries, n, keep), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=seeds)
def test_permute_then_trace(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 3)
    swapped = permute_qubits(rho, [3, 1, 2])
    assert partial_trace(swapped, [1]).allclose(partial_trace(rho, [3]), atol=1e-12)
    assert partial_trace(swapped, [2, 3]).allclose(partial_trace(rho, [1, 2]), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(1, 3))
def test_spectral_reassembly(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, n, rank=int(rng.integers(1, (1 << n) + 1)))
    pairs = spectral_decomposition(rho)
    values = [v for v, _ in pairs]
    assert values == sorted(values, reverse=True)
    rebuilt = sum(v * np.outer(s.amplitudes, s.amplitudes.conj()) for v, s in pairs)
    np.testing.assert_allclose(rebuilt, rho.entries, atol=1e-12)
    for _, s in pairs:
        lead = s.amplitudes[np.flatnonzero(np.abs(s.amplitudes) > 1e-12)[0]]
        assert abs(lead.imag) < 1e-12 and lead.real > 0


def test_bloch_direction_canonical_form():
    assert BlochDirection(-0.3, 0.2) == BlochDirection(0.3, 0.2 + np.pi)
    d = BlochDirection(0.4, 7.0)
    assert 0 <= d.phi < 2 * np.pi
    np.testing.assert_allclose(BlochDirection.from_vector(d.vector).vector, d.vector, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(theta=st.floats(-10, 10), phi=st.floats(-10, 10))
def test_eigenstates_of_direction(theta, phi):
    d = BlochDirection(theta, phi)
    obs = pauli_observable(d)
    plus, minus = d.plus().amplitudes, d.minus().amplitudes
    np.testing.assert_allclose(obs @ plus, plus, atol=1e-12)
    np.testing.assert_allclose(obs @ minus, -minus, atol=1e-12)
    pair = ProjectorPair(d)
    np.testing.assert_allclose(pair.p0 + pair.p1, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(pair.p0 @ pair.p1, 0, atol=1e-12)


def test_projector_outcome_zero_is_plus_one():
    assert np.allclose(ProjectorPair(Z_AXIS).p0, np.diag([1, 0]))
    assert np.allclose(ProjectorPair(X_AXIS).p1, np.array([[1, -1], [-1, 1]]) / 2)
    with pytest.raises(ValueError):
        ProjectorPair(Z_AXIS).projector(2)


def test_embed_operator_positions():
    op = embed_operator(SIGMA_X, 2, 3)
    np.testing.assert_array_equal(op, np.kron(np.kron(np.eye(2), SIGMA_X), np.eye(2)))


@pytest.mark.parametrize("n", [2, 3, 7])
def test_local_expectation_matches_kron(n):
    rng = np.random.default_rng(n)
    rho = random_density(rng, n)
    ops = [None if k % 3 == 0 else pauli_observable(BlochDirection(*rng.uniform(0, 3, 2)))
           for k in range(n)]
    full = np.ones((1, 1))
    for op in ops:
        full = np.kron(full, np.eye(2) if op is None else op)
    expected = np.trace(rho.entries @ full)
    assert abs(local_expectation(rho, ops) - expected) < 1e-12


def test_partial_transpose_and_negativity():
    bell = StateVector.normalized([1, 0, 0, 1]).density_matrix()
    assert abs(negativity(bell, [1]) - 0.5) < 1e-12
    assert negativity(maximally_mixed(2), [2]) < 1e-15
    pt = partial_transpose(bell, [2])
    np.testing.assert_allclose(pt, partial_transpose(bell, [1]).T, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(seed=seeds)
def test_pauli_tensor_matches_traces(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, 2)
    t = pauli_tensor(rho)
    for i, j in itertools.product(range(4), repeat=2):
        ref = np.trace(rho.entries @ np.kron(PAULIS[i], PAULIS[j])).real
        assert abs(t[i, j] - ref) < 1e-12


def test_tensor_all_and_zz_parity():
    psi = tensor_all(ket("0"), ket("1"), ket("1"))
    rho = psi.density_matrix()
    assert abs(local_expectation(rho, [SIGMA_Z, SIGMA_Z, None]) + 1) < 1e-15
