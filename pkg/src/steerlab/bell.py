"""Bell functionals over correlators and joint probabilities.

Parties and setting labels are 1-based. Label 0 means the party is not
measured: the identity enters correlators and the party is marginalized
out of probabilities. Outcome 0 is the +1 eigenvalue of the measured
observable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .qcore import (
    BlochDirection,
    DensityMatrix,
    ProjectorPair,
    X_AXIS,
    Z_AXIS,
    local_expectation,
    pauli_observable,
    pauli_tensor,
    permute_qubits,
)
from .states import (
    NQubitFamilyParams,
    TwoQubitFamilyParams,
    make_rho2,
    make_rhoN,
    product_tail_params,
)

VIOLATION_TOL = 1e-10
KINDS = ("chsh", "hardy3", "i3", "hardyN", "composite", "evenN", "oddN")


class DomainError(ValueError):
    """A closed-form expression is undefined for the given parameters."""


# -- settings -----------------------------------------------------------------


@dataclass(frozen=True)
class SettingsTable:
    """Measurement directions per party; ``directions[k][l-1]`` is label ``l`` of party ``k+1``."""

    directions: tuple[tuple[BlochDirection, ...], ...]

    def __post_init__(self) -> None:
        dirs = tuple(tuple(p) for p in self.directions)
        for k, party in enumerate(dirs, start=1):
            if not 1 <= len(party) <= 2:
                raise ValueError(f"party {k} needs one or two settings, got {len(party)}")
        object.__setattr__(self, "directions", dirs)

    @property
    def n_parties(self) -> int:
        return len(self.directions)

    def direction(self, party: int, label: int) -> BlochDirection:
        if not 1 <= party <= self.n_parties:
            raise ValueError(f"no party {party} in settings table")
        row = self.directions[party - 1]
        if not 1 <= label <= len(row):
            raise ValueError(f"party {party} has no setting labelled {label}")
        return row[label - 1]

    def to_dict(self) -> dict:
        return {
            "parties": [
                [{"theta": d.theta, "phi": d.phi} for d in party] for party in self.directions
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> SettingsTable:
        return cls(
            tuple(
                tuple(BlochDirection(float(d["theta"]), float(d.get("phi", 0.0))) for d in party)
                for party in data["parties"]
            )
        )

    @classmethod
    def from_angles(cls, angles: Sequence[Sequence[tuple[float, float]]]) -> SettingsTable:
        return cls(tuple(tuple(BlochDirection(t, p) for t, p in party) for party in angles))


# -- functionals ----------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    """``coefficient * Q_labels`` or, when ``outcomes`` is set, ``coefficient * p(outcomes|labels)``."""

    coefficient: float
    labels: tuple[int, ...]
    outcomes: tuple[int, ...] | None = None

    @property
    def kind(self) -> str:
        return "correlator" if self.outcomes is None else "probability"


@dataclass(frozen=True)
class BellFunctional:
    name: str
    n_parties: int
    terms: tuple[Term, ...]
    classical_bound: float
    bound_sense: str = "<="

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.labels) != self.n_parties:
                raise ValueError(f"term {t} does not address {self.n_parties} parties")
            if any(lab not in (0, 1, 2) for lab in t.labels):
                raise ValueError(f"setting labels must be 0, 1 or 2: {t.labels}")
            if t.outcomes is not None:
                if len(t.outcomes) != self.n_parties or any(o not in (0, 1) for o in t.outcomes):
                    raise ValueError(f"bad outcomes in {t}")
            if not math.isfinite(t.coefficient):
                raise ValueError(f"non-finite coefficient in {t}")

    def used_settings(self) -> list[tuple[int, int]]:
        """Sorted (party, label) pairs that some term measures."""
        used = {
            (k, lab) for t in self.terms for k, lab in enumerate(t.labels, start=1) if lab
        }
        return sorted(used)

    def violated_by(self, value: float) -> bool:
        return value > self.classical_bound + VIOLATION_TOL

    def to_dict(self) -> dict:
        terms = []
        for t in self.terms:
            item = {"coefficient": t.coefficient, "kind": t.kind, "labels": list(t.labels)}
            if t.outcomes is not None:
                item["outcomes"] = list(t.outcomes)
            terms.append(item)
        return {
            "name": self.name,
            "n_parties": self.n_parties,
            "classical_bound": self.classical_bound,
            "bound_sense": self.bound_sense,
            "terms": terms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> BellFunctional:
        terms = []
        for item in data["terms"]:
            outcomes = item.get("outcomes")
            if item.get("kind", "correlator") == "probability" and outcomes is None:
                raise ValueError("probability term without outcomes")
            terms.append(
                Term(
                    float(item["coefficient"]),
                    tuple(int(x) for x in item["labels"]),
                    None if outcomes is None else tuple(int(x) for x in outcomes),
                )
            )
        return cls(
            data["name"],
            int(data["n_parties"]),
            tuple(terms),
            float(data["classical_bound"]),
            data.get("bound_sense", "<="),
        )


def _merge(terms: list[Term]) -> tuple[Term, ...]:
    acc: dict[tuple, float] = {}
    for t in terms:
        key = (t.labels, t.outcomes)
        acc[key] = acc.get(key, 0.0) + t.coefficient
    return tuple(Term(c, labels, outcomes) for (labels, outcomes), c in acc.items() if c != 0.0)


def _hardy_terms(n: int, r: int) -> list[Term]:
    """Hardy functional on parties r+1..n, each term conditioned on parties 1..r
    giving outcome 0 for setting 1."""
    m = n - r
    ones = (1,) * n
    zeros = (0,) * n
    terms = [
        Term(1.0, ones, zeros),
        Term(-1.0, (1,) * r + (2,) * m, (0,) * r + (1,) * m),
    ]
    for j in range(r, n):
        labels = tuple(2 if k == j else 1 for k in range(n))
        terms.append(Term(-1.0, labels, zeros))
    return terms


def build_functional(kind: str, n: int | None = None, r: int | None = None) -> BellFunctional:
    """Construct one of the inequality families.

    ``kind`` is one of chsh, hardy3, i3, hardyN, composite, evenN, oddN;
    ``r`` is the number of conditioning parties of a composite functional.
    """
    if kind == "chsh":
        if n not in (None, 2):
            raise ValueError("chsh is a two-party functional")
        terms = [Term(0.5, (1, 1)), Term(0.5, (1, 2)), Term(0.5, (2, 1)), Term(-0.5, (2, 2))]
        return BellFunctional("chsh", 2, tuple(terms), 1.0)
    if kind == "hardy3":
        if n not in (None, 3):
            raise ValueError("hardy3 is a three-party functional")
        return BellFunctional("hardy3", 3, tuple(_hardy_terms(3, 0)), 0.0)
    if kind == "i3":
        if n not in (None, 3):
            raise ValueError("i3 is a three-party functional")
        f = build_functional("oddN", 3)
        return BellFunctional("i3", 3, f.terms, 1.0)
    if n is None:
        raise ValueError(f"{kind} needs the number of parties n")
    if kind == "hardyN":
        if n < 2:
            raise ValueError("hardyN needs n >= 2")
        return BellFunctional(f"hardy{n}", n, tuple(_hardy_terms(n, 0)), 0.0)
    if kind == "composite":
        if r is None:
            raise ValueError("composite needs r")
        if not (n >= 2 and 0 <= r <= n - 2):
            raise ValueError(f"composite needs 0 <= r <= n-2, got n={n}, r={r}")
        return BellFunctional(f"composite{n}_r{r}", n, tuple(_hardy_terms(n, r)), 0.0)
    if kind == "evenN":
        if n < 2 or n % 2:
            raise ValueError(f"evenN needs an even n >= 2, got {n}")
        scale = 1.0 / 2 ** (n - 1)
        terms = [Term(scale, labels) for labels in itertools.product((1, 2), repeat=n)]
        terms.append(Term(-1.0, (2,) * n))
        return BellFunctional(f"even{n}", n, _merge(terms), 1.0)
    if kind == "oddN":
        if n < 3 or n % 2 == 0:
            raise ValueError(f"oddN needs an odd n >= 3, got {n}")
        scale = 1.0 / 2 ** (n - 1)
        terms = [
            Term(scale, head + (last,))
            for head in itertools.product((1, 2), repeat=n - 1)
            for last in (0, 1)
        ]
        terms.append(Term(-1.0, (2,) * (n - 1) + (0,)))
        return BellFunctional(f"odd{n}", n, _merge(terms), 1.0)
    raise ValueError(f"unknown functional kind {kind!r}; expected one of {KINDS}")


# -- quantum values via trace formulas ------------------------------------------------------


def _check_labels(settings: SettingsTable, labels: Sequence[int], n: int) -> None:
    if len(labels) != n or settings.n_parties != n:
        raise ValueError(f"need {n} labels and a {n}-party settings table")


def correlator(rho: DensityMatrix, settings: SettingsTable, labels: Sequence[int]) -> float:
    """tr(rho . prod_k n_k.sigma), with the identity for label 0."""
    n = rho.n_qubits
    _check_labels(settings, labels, n)
    ops = [
        None if lab == 0 else pauli_observable(settings.direction(k, lab))
        for k, lab in enumerate(labels, start=1)
    ]
    return float(local_expectation(rho, ops).real)


def joint_probability(
    rho: DensityMatrix,
    settings: SettingsTable,
    outcomes: Sequence[int],
    labels: Sequence[int],
) -> float:
    """p(outcomes | labels); parties with label 0 are marginalized."""
    n = rho.n_qubits
    _check_labels(settings, labels, n)
    if len(outcomes) != n:
        raise ValueError(f"need {n} outcomes")
    ops = [
        None if lab == 0 else ProjectorPair(settings.direction(k, lab)).projector(o)
        for k, (lab, o) in enumerate(zip(labels, outcomes), start=1)
    ]
    return float(local_expectation(rho, ops).real)


def evaluate(functional: BellFunctional, rho: DensityMatrix, settings: SettingsTable) -> float:
    if rho.n_qubits != functional.n_parties:
        raise ValueError(
            f"{functional.name} has {functional.n_parties} parties, state has {rho.n_qubits} qubits"
        )
    total = 0.0
    for t in functional.terms:
        if t.outcomes is None:
            total += t.coefficient * correlator(rho, settings, t.labels)
        else:
            total += t.coefficient * joint_probability(rho, settings, t.outcomes, t.labels)
    return total


# -- settings used in the analytic constructions ----------------------------------------


def chsh_paper_settings(theta_b1: float, tau: float = 0.0) -> SettingsTable:
    """A1 = z, A2 = (pi/2, tau); B1 = (theta_b1, 0), B2 = (-theta_b1, 0)."""
    return SettingsTable(
        (
            (Z_AXIS, BlochDirection(np.pi / 2, tau)),
            (BlochDirection(theta_b1, 0.0), BlochDirection(-theta_b1, 0.0)),
        )
    )


def hardy_paper_settings(n: int, r: int, vartheta: float) -> SettingsTable:
    """Settings for the (composite) Hardy functional.

    Parties r+1 and r+2 use z and (vartheta, pi/2); later parties use z and -z.
    The r conditioning parties measure x for their only setting.
    """
    parties = []
    for j in range(1, n + 1):
        if j <= r:
            parties.append((X_AXIS, Z_AXIS))
        elif j <= r + 2:
            parties.append((Z_AXIS, BlochDirection(vartheta, np.pi / 2)))
        else:
            parties.append((Z_AXIS, BlochDirection(np.pi, 0.0)))
    return SettingsTable(tuple(parties))


def odd_paper_settings(n: int, theta11: float) -> SettingsTable:
    """Party 1: (theta11, 0) and z; others: x and -z. Covers i3 at n = 3."""
    first = (BlochDirection(theta11, 0.0), Z_AXIS)
    rest = (X_AXIS, BlochDirection(np.pi, 0.0))
    return SettingsTable((first,) + (rest,) * (n - 1))


def even_paper_settings(n: int, theta11: float) -> SettingsTable:
    """Party 1: theta11 and theta12 = pi; others: pi - theta11 and pi - theta12, all phi = 0."""
    first = (BlochDirection(theta11, 0.0), BlochDirection(np.pi, 0.0))
    rest = (BlochDirection(np.pi - theta11, 0.0), Z_AXIS)
    return SettingsTable((first,) + (rest,) * (n - 1))


def ghz_family_state(n: int, nu1: float, zeta: float, tau: float = 0.0) -> DensityMatrix:
    """Family member with chi1 = |0..0>, chi2 = |1..1> (all tail f_i = 0)."""
    if n == 2:
        return make_rho2(TwoQubitFamilyParams(nu1, zeta, tau))
    return make_rhoN(product_tail_params(nu1, zeta, [0.0] * (n - 2), tau))


def composite_hardy_state(params: NQubitFamilyParams) -> tuple[DensityMatrix, int, float]:
    """Reorder a product-tail state for the composite Hardy test.

    Tail qubits whose chi2 factor is |1> (f_i = 0) move to the front, followed by
    the two steering qubits and the remaining tail. Returns the reordered
    state, the number r of moved qubits, and F = prod of the remaining f_i.
    """
    n = params.n_qubits
    f = _tail_coefficients(params)
    zero = [i + 3 for i, x in enumerate(f) if abs(x) < 1e-15]
    other = [i + 3 for i, x in enumerate(f) if abs(x) >= 1e-15]
    order = zero + [1, 2] + other
    rho = permute_qubits(make_rhoN(params), order)
    big_f = float(np.prod([x for x in f if abs(x) >= 1e-15])) if other else 1.0
    assert len(order) == n
    return rho, len(zero), big_f


def _tail_coefficients(params: NQubitFamilyParams) -> list[float]:
    """Recover f_i from a product-tail parameter set (chi1 = |0..0>, real chi2 factors)."""
    m = params.n_qubits - 2
    chi1 = params.chi1.amplitudes
    if abs(chi1[0] - 1) > 1e-12:
        raise ValueError("expected chi1 = |0...0>")
    amps = params.chi2.amplitudes.reshape((2,) * m)
    f = []
    for q in range(m):
        marg = np.moveaxis(amps, q, 0).reshape(2, -1)
        p0 = float(np.sum(np.abs(marg[0]) ** 2))
        f.append(math.sqrt(max(p0, 0.0)))
    rebuilt = product_tail_params(params.nu1, params.zeta, f).chi2.amplitudes
    if not np.allclose(rebuilt, params.chi2.amplitudes, atol=1e-10):
        raise ValueError("chi2 is not a product of real nonnegative f|0> + g|1> factors")
    return f


# -- closed forms ----------------------------------------------------------------------------


def chsh_max_closed_form(params: TwoQubitFamilyParams) -> tuple[float, SettingsTable]:
    """sqrt(1 + C^2) together with settings that attain it.

    Only theta_B1 is free in the construction; it is found by a bounded
    scalar maximization of the correlator expression built from the Pauli
    correlation tensor.
    """
    t3 = pauli_tensor(make_rho2(params))[1:, 1:]
    a1 = Z_AXIS.vector
    a2 = BlochDirection(np.pi / 2, params.tau).vector

    def neg(theta):
        b1 = BlochDirection(theta, 0.0).vector
        b2 = BlochDirection(-theta, 0.0).vector
        return -0.5 * (a1 @ t3 @ (b1 + b2) + a2 @ t3 @ (b1 - b2))

    res = minimize_scalar(
        neg, bounds=(-np.pi / 2, np.pi / 2), method="bounded", options={"xatol": 1e-12}
    )
    c = params.visibility * np.sin(params.zeta)
    return math.sqrt(1.0 + c * c), chsh_paper_settings(float(res.x), params.tau)


def hardy_closed_form(nu1: float, zeta: float, big_f: float, r: int, vartheta: float) -> float:
    """Quantum Hardy value for the product-tail family with r conditioning parties."""
    v = 2 * nu1 - 1
    c2, s2 = math.cos(vartheta / 2) ** 2, math.sin(vartheta / 2) ** 2
    bracket = 1 + big_f**2 + (1 - big_f**2) * v * math.cos(zeta)
    return (2 * v * math.sin(zeta) * big_f * c2 * s2 - c2 * c2 * bracket) / 2 ** (r + 1)


def hardy_paper_angle(nu1: float, zeta: float, big_f: float) -> float:
    """vartheta with tan^2(vartheta/2) = bracket / (V sin(zeta) F)."""
    v = 2 * nu1 - 1
    x = v * math.sin(zeta) * big_f
    if x <= 0:
        raise DomainError(f"V sin(zeta) F = {x:.3g} must be positive for this angle choice")
    bracket = 1 + big_f**2 + (1 - big_f**2) * v * math.cos(zeta)
    return 2 * math.atan(math.sqrt(bracket / x))


def _n3_tail_f(params: NQubitFamilyParams) -> float:
    if params.n_qubits != 3:
        raise ValueError("expected a three-qubit family")
    return _tail_coefficients(params)[0]


def hardy3_closed_form(params: NQubitFamilyParams, theta_A2: float | None = None) -> float:
    """Three-qubit Hardy value; with ``theta_A2=None`` the paper's angle choice is used."""
    f = _n3_tail_f(params)
    if theta_A2 is None:
        theta_A2 = hardy_paper_angle(params.nu1, params.zeta, f)
    return hardy_closed_form(params.nu1, params.zeta, f, 0, theta_A2)


def hardy3_paper_angle(params: NQubitFamilyParams) -> float:
    return hardy_paper_angle(params.nu1, params.zeta, _n3_tail_f(params))


def odd_closed_form(n: int, nu1: float, zeta: float, theta11: float) -> float:
    """1 + cos^2(theta11/2) / 2^(n-2) * (V sin(zeta) tan(theta11/2) - 1); n = 3 is I3."""
    vs = (2 * nu1 - 1) * math.sin(zeta)
    c, s = math.cos(theta11 / 2), math.sin(theta11 / 2)
    return 1 + (vs * s * c - c * c) / 2 ** (n - 2)


def i3_closed_form(nu1: float, zeta: float, theta_A1: float) -> float:
    return odd_closed_form(3, nu1, zeta, theta_A1)


def even_closed_form(n: int, nu1: float, zeta: float, theta11: float) -> float:
    vs = (2 * nu1 - 1) * math.sin(zeta)
    half = 2 ** (n - 1)
    return (half + vs * math.sin(theta11) ** n - (1 - math.cos(theta11)) ** n) / half


def even_violation_threshold(n: int, vs: float) -> float:
    """Even n: violation iff tan(theta11/2) < (V sin zeta)^(1/n)."""
    return vs ** (1.0 / n)


def odd_violation_threshold(vs: float) -> float:
    """Odd n: violation iff tan(theta11/2) > 1 / (V sin zeta)."""
    return 1.0 / vs


def best_free_angle(closed_form, lo: float = 0.0, hi: float = math.pi) -> float:
    res = minimize_scalar(lambda t: -closed_form(t), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


# -- numerical optimization -----------------------------------------------------------------

_CORR, _P0, _P1 = 0, 1, 2


def _local_index(label: int, outcome: int | None) -> int:
    if label == 0:
        return 0
    base = 1 + 3 * (label - 1)
    if outcome is None:
        return base + _CORR
    return base + (_P0 if outcome == 0 else _P1)


def _local_vectors(n1: np.ndarray, n2: np.ndarray) -> np.ndarray:
    """Per-restart 7x4 table of Pauli-basis vectors for one party.

    Rows: identity; then for each label the observable and both projectors.
    """
    r = n1.shape[0]
    out = np.zeros((r, 7, 4))
    out[:, 0, 0] = 1.0
    for base, vec in ((1, n1), (4, n2)):
        out[:, base, 1:] = vec
        out[:, base + 1, 0] = 0.5
        out[:, base + 1, 1:] = 0.5 * vec
        out[:, base + 2, 0] = 0.5
        out[:, base + 2, 1:] = -0.5 * vec
    return out


class _Compiled:
    """A functional contracted against the Pauli tensor of a fixed state.

    The functional is multilinear in the parties' Bloch vectors, so for one
    party with everything else fixed it equals const + b1.n1 + b2.n2 and the
    exact block maximizer is n_l = b_l / |b_l|.
    """

    def __init__(self, functional: BellFunctional, rho: DensityMatrix):
        self.n = functional.n_parties
        self.T = pauli_tensor(rho)
        self.coeffs = np.array([t.coefficient for t in functional.terms])
        self.loc = np.array(
            [
                [_local_index(lab, None if t.outcomes is None else t.outcomes[k])
                 for k, lab in enumerate(t.labels)]
                for t in functional.terms
            ],
            dtype=np.int64,
        ).reshape(len(functional.terms), self.n)
        n = self.n
        self.full_index = self.loc @ (7 ** np.arange(n - 1, -1, -1))
        self.open_index = []
        self.open_stride = []
        self.weights = []
        for k in range(n):
            sizes = [7] * n
            sizes[k] = 4
            strides = np.array([math.prod(sizes[j + 1:]) for j in range(n)])
            base = self.loc.copy()
            base[:, k] = 0
            self.open_index.append(base @ strides)
            self.open_stride.append(int(strides[k]))
            w = np.zeros((2, len(self.coeffs)))
            for li, lbase in enumerate((1, 4)):
                w[li] = np.select(
                    [self.loc[:, k] == lbase, self.loc[:, k] == lbase + 1,
                     self.loc[:, k] == lbase + 2],
                    [1.0, 0.5, -0.5], 0.0,
                ) * self.coeffs
            self.weights.append(w)

    def _contract(self, tables: list[np.ndarray]) -> np.ndarray:
        # m is (batch, contracted parties, remaining Pauli indices)
        m = self.T.reshape(1, 1, -1)
        for table in tables:
            rest = m.shape[2] // 4
            m = m.reshape(m.shape[0], m.shape[1], 4, rest)
            m = np.matmul(table[:, None], m)
            m = m.reshape(m.shape[0], -1, rest)
        return m.reshape(m.shape[0], -1)

    def values(self, vecs: np.ndarray) -> np.ndarray:
        """vecs: (R, n, 2, 3) unit vectors -> (R,) functional values."""
        tables = [_local_vectors(vecs[:, k, 0], vecs[:, k, 1]) for k in range(self.n)]
        return self._contract(tables)[:, self.full_index] @ self.coeffs

    def sweep(self, vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One pass of exact per-party maximization; returns (vecs, values)."""
        vecs = vecs.copy()
        eye = np.eye(4)[None]
        tables = [_local_vectors(vecs[:, j, 0], vecs[:, j, 1]) for j in range(self.n)]
        for k in range(self.n):
            g = self._contract(tables[:k] + [eye] + tables[k + 1:])
            idx = self.open_index[k][:, None] + self.open_stride[k] * np.arange(4)[None]
            gathered = g[:, idx]  # (R, terms, 4)
            for li in range(2):
                b = np.einsum("t,rtm->rm", self.weights[k][li], gathered[:, :, 1:])
                norm = np.linalg.norm(b, axis=1)
                ok = norm > 1e-14
                vecs[ok, k, li] = b[ok] / norm[ok, None]
            tables[k] = _local_vectors(vecs[:, k, 0], vecs[:, k, 1])
        rows = tables[-1][:, self.loc[:, -1], :]  # (R, terms, 4)
        values = np.einsum("rtm,rtm->rt", rows, gathered) @ self.coeffs
        return vecs, values


class OptimizeResult(NamedTuple):
    value: float
    settings: SettingsTable
    converged: bool
    sweeps: int


def _random_unit(rng: np.random.Generator, shape) -> np.ndarray:
    v = rng.normal(size=tuple(shape) + (3,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _settings_to_vecs(settings: SettingsTable, n: int) -> np.ndarray:
    out = np.empty((n, 2, 3))
    for k in range(n):
        row = settings.directions[k]
        out[k, 0] = row[0].vector
        out[k, 1] = row[1].vector if len(row) > 1 else Z_AXIS.vector
    return out


def _vecs_to_settings(vecs: np.ndarray) -> SettingsTable:
    return SettingsTable(
        tuple(tuple(BlochDirection.from_vector(v) for v in party) for party in vecs)
    )


def optimize_settings(
    functional: BellFunctional,
    rho: DensityMatrix,
    initial: SettingsTable | None = None,
    restarts: int = 16,
    seed: int = 0,
    max_sweeps: int = 2000,
    tol: float = 1e-12,
) -> OptimizeResult:
    """Locally maximize the quantum value over all measurement directions.

    Derivative-free block coordinate ascent: each party's directions are in
    turn replaced by their exact maximizer with the other parties fixed.
    ``initial`` (if given) is used as the first start; the rest are uniform
    random on the sphere, seeded by ``seed``. The best start wins; ties go to
    the lexicographically smallest angle list.
    """
    n = functional.n_parties
    if rho.n_qubits != n:
        raise ValueError(f"{functional.name} has {n} parties, state has {rho.n_qubits} qubits")
    rng = np.random.default_rng(seed)
    vecs = _random_unit(rng, (max(restarts, 1), n, 2))
    if initial is not None:
        vecs[0] = _settings_to_vecs(initial, n)

    compiled = _Compiled(functional, rho)
    value = compiled.values(vecs)
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        vecs, new = compiled.sweep(vecs)
        sweeps += 1
        if np.max(new - value) <= tol * max(1.0, float(np.max(np.abs(new)))):
            value = new
            converged = True
            break
        value = new

    best = float(np.max(value))
    candidates = np.flatnonzero(value >= best - 1e-12)
    tables = [_vecs_to_settings(vecs[i]) for i in candidates]
    keys = [
        tuple(a for party in t.directions for d in party for a in (d.theta, d.phi))
        for t in tables
    ]
    pick = min(range(len(tables)), key=lambda i: keys[i])
    return OptimizeResult(float(value[candidates[pick]]), tables[pick], converged, sweeps)
