"""Steered ensembles and the mutual pure-state steering test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .qcore import (
    BlochDirection,
    DensityMatrix,
    ProjectorPair,
    embed_operator,
    negativity,
    partial_trace,
)

DEGENERATE_PROB = 1e-12
PURITY_TOL = 1e-9
DISTINCTNESS_TOL = 1e-9
ENTANGLEMENT_TOL = 1e-10
GRID_THETA = 64
GRID_PHI = 64


@dataclass(frozen=True)
class Branch:
    probability: float
    state: DensityMatrix | None  # None when the branch is degenerate

    @property
    def degenerate(self) -> bool:
        return self.state is None


@dataclass(frozen=True)
class SteeredEnsemble:
    party: int
    direction: BlochDirection
    branches: tuple[Branch, Branch]

    @property
    def degenerate(self) -> bool:
        return any(b.degenerate for b in self.branches)

    def average_state(self) -> np.ndarray:
        """Sum_k p_k rho_k over non-degenerate branches."""
        total = None
        for b in self.branches:
            if b.state is None:
                continue
            term = b.probability * b.state.entries
            total = term if total is None else total + term
        return total


def _check_party(rho: DensityMatrix, party: int) -> None:
    if rho.n_qubits < 2:
        raise ValueError("steering needs at least two qubits")
    if not 1 <= party <= rho.n_qubits:
        raise ValueError(f"party {party} out of range for {rho.n_qubits} qubits")


def steer(rho: DensityMatrix, party: int, direction: BlochDirection) -> SteeredEnsemble:
    """Measure ``party`` along ``direction`` and return the conditional states
    of the remaining qubits."""
    _check_party(rho, party)
    n = rho.n_qubits
    rest = [q for q in range(1, n + 1) if q != party]
    pair = ProjectorPair(direction)
    branches = []
    for outcome in (0, 1):
        proj = embed_operator(pair.projector(outcome), party, n)
        projected = proj @ rho.entries @ proj
        p = float(np.trace(projected).real)
        if p < DEGENERATE_PROB:
            branches.append(Branch(max(p, 0.0), None))
            continue
        cond = projected / p
        cond = (cond + cond.conj().T) / 2
        branches.append(Branch(p, partial_trace(DensityMatrix(cond), rest)))
    return SteeredEnsemble(party, direction, tuple(branches))


def branch_determinant(
    rho2: DensityMatrix, party: int, a: float, gamma: float, normalized: bool = False
) -> tuple[float, float]:
    """Determinants of the other qubit's steered states when ``party`` projects
    onto |xi> = a|0> + b|1> and |xi'> = b*|0> - a|1>, with b = sqrt(1-a^2) e^{i gamma}.

    By default the determinants of the unnormalized conditional operators
    are returned; ``normalized=True`` divides each by the squared branch
    probability (a degenerate branch then reports 0).
    """
    if rho2.n_qubits != 2:
        raise ValueError("branch_determinant expects a two-qubit state")
    _check_party(rho2, party)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"a must lie in [0, 1], got {a}")
    b = np.sqrt(1.0 - a * a) * np.exp(1j * gamma)
    xi = np.array([a, b])
    xi_perp = np.array([np.conj(b), -a])
    t = rho2.entries.reshape(2, 2, 2, 2)
    if party == 1:
        t = t.transpose(1, 0, 3, 2)
    dets = []
    for v in (xi, xi_perp):
        # <v| on the measured qubit, |v> on its column index
        m = np.einsum("b,ibjd,d->ij", v.conj(), t, v)
        det = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]).real
        if normalized:
            p = (m[0, 0] + m[1, 1]).real
            det = det / p**2 if p > DEGENERATE_PROB else 0.0
        dets.append(float(det))
    return dets[0], dets[1]


@dataclass(frozen=True)
class SteeringVerdict:
    steerable_to_pure: bool
    witness_direction: BlochDirection | None
    branch_purities: tuple[float, float]
    branch_fidelity_between: float
    cut_negativity: float


def _direction_kets(theta: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    e = np.exp(1j * phi)
    plus = np.stack([c + 0j, e * s], axis=-1)
    minus = np.stack([s + 0j, -e * c], axis=-1)
    return plus, minus


def _branch_stats(blocks: np.ndarray, theta: np.ndarray, phi: np.ndarray):
    """Probabilities, purities and overlap for a batch of directions.

    ``blocks`` is rho reshaped to (2, D, 2, D) with the measured qubit first.
    """
    plus, minus = _direction_kets(theta, phi)
    out = []
    for v in (plus, minus):
        m = np.einsum("gi,iajb,gj->gab", v.conj(), blocks, v, optimize=True)
        p = np.einsum("gaa->g", m).real
        out.append((m, p))
    (m0, p0), (m1, p1) = out
    safe0 = np.where(p0 > DEGENERATE_PROB, p0, 1.0)
    safe1 = np.where(p1 > DEGENERATE_PROB, p1, 1.0)
    pur0 = np.sum(np.abs(m0) ** 2, axis=(1, 2)) / safe0**2
    pur1 = np.sum(np.abs(m1) ** 2, axis=(1, 2)) / safe1**2
    overlap = np.sum(m0 * m1.conj(), axis=(1, 2)).real / (safe0 * safe1)
    degenerate = (p0 <= DEGENERATE_PROB) | (p1 <= DEGENERATE_PROB)
    return pur0, pur1, overlap, degenerate


def _objective(pur0, pur1, overlap, degenerate, distinctness_tol):
    score = np.maximum(1.0 - pur0, 1.0 - pur1)
    # a measurement that cannot produce two distinct branches is never a witness
    bad = degenerate | (overlap > 1.0 - distinctness_tol)
    return np.where(bad, 2.0, score)


def _party_blocks(rho: DensityMatrix, party: int) -> np.ndarray:
    n = rho.n_qubits
    t = rho.entries.reshape((2,) * (2 * n))
    order = [party - 1] + [q for q in range(n) if q != party - 1]
    t = t.transpose(order + [n + q for q in order])
    d = 1 << (n - 1)
    return t.reshape(2, d, 2, d)


def _search_party(rho, party, purity_tol, distinctness_tol) -> SteeringVerdict:
    blocks = _party_blocks(rho, party)
    thetas = np.linspace(0.0, np.pi, GRID_THETA)
    phis = np.linspace(0.0, 2 * np.pi, GRID_PHI, endpoint=False)
    tg, pg = np.meshgrid(thetas, phis, indexing="ij")
    tg, pg = tg.ravel(), pg.ravel()

    d = blocks.shape[1]
    chunk = max(1, (1 << 20) // (d * d))
    scores = []
    for start in range(0, tg.size, chunk):
        sl = slice(start, start + chunk)
        scores.append(_objective(*_branch_stats(blocks, tg[sl], pg[sl]), distinctness_tol))
    scores = np.concatenate(scores)
    # anything within purity_tol counts as a tie; lowest grid index wins
    within = np.flatnonzero(scores <= purity_tol)
    best = int(within[0]) if within.size else int(np.argmin(scores))
    theta, phi = float(tg[best]), float(pg[best])

    if scores[best] > purity_tol:

        def f(x):
            stats = _branch_stats(blocks, np.array([x[0]]), np.array([x[1]]))
            return float(_objective(*stats, distinctness_tol)[0])

        res = minimize(
            f, [theta, phi], method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000},
        )
        if res.fun < scores[best]:
            theta, phi = float(res.x[0]), float(res.x[1])

    pur0, pur1, overlap, degenerate = (
        x[0] for x in _branch_stats(blocks, np.array([theta]), np.array([phi]))
    )
    cut_neg = negativity(rho, [party])
    pure = (1.0 - pur0 <= purity_tol) and (1.0 - pur1 <= purity_tol)
    distinct = (not degenerate) and overlap <= 1.0 - distinctness_tol
    ok = bool(pure and distinct and cut_neg > ENTANGLEMENT_TOL)
    return SteeringVerdict(
        steerable_to_pure=ok,
        witness_direction=BlochDirection(theta, phi) if ok else None,
        branch_purities=(float(pur0), float(pur1)),
        branch_fidelity_between=float(overlap),
        cut_negativity=cut_neg,
    )


def mutual_steering_check(
    rho: DensityMatrix,
    purity_tol: float = PURITY_TOL,
    distinctness_tol: float = DISTINCTNESS_TOL,
) -> dict[int, SteeringVerdict]:
    """For every party, look for a projective measurement that steers the
    remaining qubits into two distinct pure states.

    A party only counts as steering if its qubit is also entangled with the
    rest (nonzero partial-transpose negativity across that cut); separable
    classically correlated states can yield distinct pure branches without
    any steering.
    """
    if rho.n_qubits < 2:
        raise ValueError("need at least two qubits")
    return {
        party: _search_party(rho, party, purity_tol, distinctness_tol)
        for party in range(1, rho.n_qubits + 1)
    }


def theorem_premise(verdicts: dict[int, SteeringVerdict]) -> bool:
    """True when at least two parties can steer the rest into distinct pure states."""
    return sum(v.steerable_to_pure for v in verdicts.values()) >= 2
