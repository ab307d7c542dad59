"""Exact classical bounds by enumerating deterministic local strategies."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .bell import BellFunctional
from .qcore import CapacityError

MAX_STRATEGY_BITS = 24
BOUND_TOL = 1e-12
_CHUNK = 1 << 16


@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed outcomes for every (party, label) pair a functional references.

    ``encoded`` is the integer whose bits, most significant first, list the
    outcomes in parties-major, labels-minor order.
    """

    outcomes: tuple[tuple[tuple[int, int], int], ...]
    encoded: int

    def outcome(self, party: int, label: int) -> int:
        for key, o in self.outcomes:
            if key == (party, label):
                return o
        raise KeyError(f"strategy assigns nothing to party {party}, label {label}")

    def sign(self, party: int, label: int) -> int:
        return 1 - 2 * self.outcome(party, label)

    def value(self, functional: BellFunctional) -> float:
        total = 0.0
        for t in functional.terms:
            if t.outcomes is None:
                v = 1
                for k, lab in enumerate(t.labels, start=1):
                    if lab:
                        v *= self.sign(k, lab)
            else:
                v = all(
                    self.outcome(k, lab) == o
                    for k, (lab, o) in enumerate(zip(t.labels, t.outcomes), start=1)
                    if lab
                )
            total += t.coefficient * v
        return total

    def to_dict(self) -> dict:
        return {
            "encoded": self.encoded,
            "outcomes": [
                {"party": p, "label": lab, "outcome": o} for (p, lab), o in self.outcomes
            ],
        }


def _factor_tables(functional: BellFunctional) -> np.ndarray:
    """(terms, parties, 4) table of each term's local factor as a function of
    the party's local strategy index 2*o1 + o2."""
    n = functional.n_parties
    o1 = np.array([0, 0, 1, 1])
    o2 = np.array([0, 1, 0, 1])
    table = np.ones((len(functional.terms), n, 4))
    for i, t in enumerate(functional.terms):
        for k, lab in enumerate(t.labels):
            if not lab:
                continue
            o = o1 if lab == 1 else o2
            if t.outcomes is None:
                table[i, k] = 1 - 2 * o
            else:
                table[i, k] = o == t.outcomes[k]
    return table


def classical_bound(functional: BellFunctional) -> tuple[float, DeterministicStrategy]:
    """Maximum of ``functional`` over deterministic strategies.

    Ties go to the strategy with the smallest encoding.
    """
    pairs = functional.used_settings()
    m = len(pairs)
    if m > MAX_STRATEGY_BITS:
        raise CapacityError(
            f"{m} referenced settings give 2^{m} strategies, above the 2^{MAX_STRATEGY_BITS} cap"
        )
    n = functional.n_parties
    table = _factor_tables(functional)
    coeffs = np.array([t.coefficient for t in functional.terms])
    # shift of each party's (label 1, label 2) bit within the encoding; -1 = unused
    shifts = np.full((n, 2), -1)
    for j, (p, lab) in enumerate(pairs):
        shifts[p - 1, lab - 1] = m - 1 - j

    best_value, best_code = -np.inf, 0
    total = 1 << m
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        prod = np.ones((len(coeffs), codes.size))
        for k in range(n):
            local = np.zeros(codes.size, dtype=np.int64)
            for li in range(2):
                if shifts[k, li] >= 0:
                    local |= ((codes >> shifts[k, li]) & 1) << (1 - li)
            prod *= table[:, k, local]
        values = coeffs @ prod if len(coeffs) else np.zeros(codes.size)
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value, best_code = float(values[i]), int(codes[i])

    outcomes = tuple(((p, lab), (best_code >> (m - 1 - j)) & 1) for j, (p, lab) in enumerate(pairs))
    return best_value, DeterministicStrategy(outcomes, best_code)


def verify_bound(functional: BellFunctional) -> bool:
    value, _ = classical_bound(functional)
    return abs(value - functional.classical_bound) <= BOUND_TOL


def y_argument_check(n: int, normalization: float | None = None) -> bool:
    """Enumerate all sign assignments X_k1, X_k2 and confirm that
    Y = c * prod_k (X_k1 + X_k2) only takes values -2, 0, 2, with Y = +-2
    forcing Q_22..2 = +-1. The default normalization is c = 1 / 2^(n-1).
    """
    if n < 2 or n % 2 or n > 8:
        raise ValueError(f"n must be even and in [2, 8], got {n}")
    c = 1.0 / 2 ** (n - 1) if normalization is None else normalization
    signs = np.array(list(itertools.product((1, -1), repeat=2 * n))).reshape(-1, n, 2)
    y = c * np.prod(signs.sum(axis=2), axis=1)
    q22 = np.prod(signs[:, :, 1], axis=1)
    if not np.all(np.isin(y, (-2.0, 0.0, 2.0))):
        return False
    if np.any(q22[y == 2.0] != 1) or np.any(q22[y == -2.0] != -1):
        return False
    # the full sum of correlators is exactly Y, so I^N = Y - Q_22..2 <= 1
    return bool(np.all(y - q22 <= 1))
