"""Monte-Carlo simulation of the Third Man key distribution and the quantum
certificate authorization (QCA) protocol.

Randomness comes from one Philox stream per role (state label, each party's
basis choice, outcomes, Eve, inspection). The stream key is
``(role << 64) | seed`` and run ``i`` consumes the ``i``-th 64-bit output of
every stream, so any block of runs can be reproduced independently by
advancing the streams.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import bisect
from scipy.stats import binomtest

from .bell import SettingsTable, correlator
from .qcore import (
    BlochDirection,
    DensityMatrix,
    ProjectorPair,
    X_AXIS,
    Y_AXIS,
    Z_AXIS,
    embed_operator,
    local_expectation,
)
from .states import (
    NQubitFamilyParams,
    TwoQubitFamilyParams,
    make_psi_pair,
    make_psi_pair_n,
    make_rho2,
    make_rhoN,
    tail_params,
)

QCA_ALPHA = 1e-6
_ROLES = {"label": 0, "alice": 1, "bob": 2, "charlie": 3, "outcome": 4, "eve": 5, "inspect": 6}


def _stream(seed: int, role: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(_ROLES[role] << 64) | seed))


def _uniforms(seed: int, role: str, runs: int) -> np.ndarray:
    return _stream(seed, role).random(runs)


def _check_seed(seed: int) -> None:
    if not 0 <= seed < 1 << 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def joint_distribution(rho: DensityMatrix, directions: Sequence[BlochDirection]) -> np.ndarray:
    """Probabilities of all outcome strings, big-endian, when qubit k is
    measured along ``directions[k-1]``."""
    pairs = [ProjectorPair(d) for d in directions]
    probs = np.array(
        [
            local_expectation(rho, [pair.projector(o) for pair, o in zip(pairs, outs)]).real
            for outs in itertools.product((0, 1), repeat=len(pairs))
        ]
    )
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _sample(cdf: np.ndarray, keys: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Outcome index for each run from its distribution row ``keys`` and uniform ``u``."""
    rows = cdf[keys]
    return np.minimum((u[:, None] >= rows).sum(axis=1), cdf.shape[1] - 1)


def _bits(index: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1)
    return ((index[:, None] >> shifts) & 1).astype(np.int8)


# -- transcripts --------------------------------------------------------------


@dataclass
class ProtocolTranscript:
    protocol: str
    basis_names: tuple[str, ...]  # lookup for the integer basis codes
    labels: np.ndarray  # (runs,) hidden state label, 1 or 2
    bases: np.ndarray  # (runs, parties) basis codes
    outcomes: np.ndarray  # (runs, parties) outcomes, 0 or 1
    broadcast: np.ndarray  # (runs,) bool
    summary: dict = field(default_factory=dict)

    @property
    def runs(self) -> int:
        return int(self.labels.size)

    def iter_records(self):
        names = self.basis_names
        for i in range(self.runs):
            yield {
                "run": i,
                "label": int(self.labels[i]),
                "bases": [names[b] for b in self.bases[i]],
                "outcomes": [int(o) for o in self.outcomes[i]],
                "broadcast": bool(self.broadcast[i]),
            }

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.iter_records())

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    def summary_json(self) -> str:
        return json.dumps({"protocol": self.protocol, "runs": self.runs, **self.summary}, indent=2)


# -- Third Man ----------------------------------------------------------------


@dataclass(frozen=True)
class ThirdManConfig:
    """Charlie sends |Psi1> or |Psi2> (zeta = pi/2) with probabilities nu1, nu2.

    Alice and Bob each pick uniformly among x, y, z and the auxiliary
    xy-plane angles; auxiliary bases are only used for testing and never
    enter a key.
    """

    nu1: float
    runs: int
    seed: int = 0
    aux_angles: tuple[float, ...] = ()
    tau: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.nu1 <= 1.0:
            raise ValueError(f"nu1 must lie in [0, 1], got {self.nu1}")
        if self.runs < 1:
            raise ValueError("runs must be positive")
        _check_seed(self.seed)
        object.__setattr__(self, "aux_angles", tuple(float(a) for a in self.aux_angles))

    @property
    def basis_names(self) -> tuple[str, ...]:
        return ("x", "y", "z") + tuple(f"xy:{a:.6g}" for a in self.aux_angles)

    def directions(self) -> list[BlochDirection]:
        return [X_AXIS, Y_AXIS, Z_AXIS] + [BlochDirection(np.pi / 2, a) for a in self.aux_angles]


def _uniform_choice(u: np.ndarray, k: int) -> np.ndarray:
    return np.minimum((u * k).astype(np.int64), k - 1)


def run_third_man(config: ThirdManConfig) -> ProtocolTranscript:
    n, seed = config.runs, config.seed
    dirs = config.directions()
    nb = len(dirs)
    psis = make_psi_pair(TwoQubitFamilyParams(1.0, np.pi / 2, config.tau))
    # cdf[label, basis_a, basis_b] over outcome strings 00, 01, 10, 11
    cdf = np.empty((2, nb, nb, 4))
    for s, psi in enumerate(psis):
        rho = psi.density_matrix()
        for a, b in itertools.product(range(nb), repeat=2):
            cdf[s, a, b] = np.cumsum(joint_distribution(rho, [dirs[a], dirs[b]]))
    cdf = cdf.reshape(-1, 4)

    labels = np.where(_uniforms(seed, "label", n) < config.nu1, 1, 2).astype(np.int8)
    ba = _uniform_choice(_uniforms(seed, "alice", n), nb)
    bb = _uniform_choice(_uniforms(seed, "bob", n), nb)
    keys = ((labels - 1) * nb + ba) * nb + bb
    idx = _sample(cdf, keys, _uniforms(seed, "outcome", n))
    outcomes = _bits(idx, 2)

    t = ProtocolTranscript(
        "thirdman",
        config.basis_names,
        labels,
        np.stack([ba, bb], axis=1).astype(np.int8),
        outcomes,
        np.zeros(n, dtype=bool),
    )
    t.summary = _third_man_summary(t)
    return t


def _third_man_summary(t: ProtocolTranscript) -> dict:
    a, b = t.outcomes[:, 0], t.outcomes[:, 1]
    ba, bb = t.bases[:, 0], t.bases[:, 1]
    same = ba == bb
    xx, yy, zz = (same & (ba == k) for k in range(3))
    differ = a != b
    # with labels: Psi2 flips the x correlation, Psi1 anti-correlates y
    flip = (xx & (t.labels == 2)) | (yy & (t.labels == 1))
    keyed = xx | yy | zz
    errors_with = int(np.sum(keyed & (differ != flip)))
    n_keyed, n_xx, n_zz = int(keyed.sum()), int(xx.sum()), int(zz.sum())
    qber_without = float(np.sum(xx & differ) / n_xx) if n_xx else float("nan")
    return {
        "sifted_key_length_with_labels": n_keyed,
        "with_labels_qber": errors_with / n_keyed if n_keyed else float("nan"),
        "without_labels_x_runs": n_xx,
        "without_labels_x_qber": qber_without,
        "z_runs": n_zz,
        "z_agreement": float(np.sum(zz & ~differ) / n_zz) if n_zz else float("nan"),
        "key_rate_estimate": max(0.0, 1.0 - 2.0 * binary_entropy(qber_without))
        if n_xx
        else float("nan"),
    }


def horodecki_xy_value(params: TwoQubitFamilyParams) -> float:
    """Sum over i, j in {x, y} of Q_ij^2."""
    rho = make_rho2(params)
    settings = SettingsTable(((X_AXIS, Y_AXIS), (X_AXIS, Y_AXIS)))
    return float(
        sum(correlator(rho, settings, (i, j)) ** 2 for i in (1, 2) for j in (1, 2))
    )


def horodecki_threshold(zeta: float = np.pi / 2, tau: float = 0.0, xtol: float = 1e-13) -> float:
    """Visibility |V| at which the xy correlation sum crosses 1, by bisection."""

    def g(v):
        return horodecki_xy_value(TwoQubitFamilyParams((1 + v) / 2, zeta, tau)) - 1.0

    if g(1.0) <= 0:
        raise ValueError("the xy correlation sum never exceeds 1 for this zeta")
    return float(bisect(g, 0.0, 1.0, xtol=xtol))


# -- QCA ----------------------------------------------------------------------


@dataclass(frozen=True)
class QcaConfig:
    """Charlie keeps the chi qubit of the three-qubit family with
    chi1 = |0>, chi2 = cos(phi)|0> + sin(phi)|1>, and inspects m of N runs."""

    nu1: float
    zeta: float
    phi: float
    runs: int
    inspection_size: int
    seed: int = 0
    eve_model: str = "none"
    allow_orthogonal: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.nu1 <= 1.0:
            raise ValueError(f"nu1 must lie in [0, 1], got {self.nu1}")
        if self.runs < 1:
            raise ValueError("runs must be positive")
        if not 1 <= self.inspection_size <= self.runs:
            raise ValueError(
                f"inspection size m={self.inspection_size} must lie in [1, N={self.runs}]"
            )
        if self.eve_model not in ("none", "intercept-resend"):
            raise ValueError(f"unknown eve model {self.eve_model!r}")
        if not self.allow_orthogonal and abs(math.cos(self.phi)) < 1e-12:
            raise ValueError("chi1 and chi2 are orthogonal; the entanglement check needs overlap")
        _check_seed(self.seed)

    @property
    def params(self) -> NQubitFamilyParams:
        return tail_params(self.nu1, self.zeta, self.phi)


QCA_BASES = ("z", "x", "chi1", "chi2")


def _dephase(rho: np.ndarray, qubit: int, direction: BlochDirection, n: int) -> np.ndarray:
    """Measure ``qubit`` along ``direction`` and resend the eigenstate found."""
    pair = ProjectorPair(direction)
    out = np.zeros_like(rho)
    for o in (0, 1):
        p = embed_operator(pair.projector(o), qubit, n)
        out += p @ rho @ p
    return out


@lru_cache(maxsize=64)
def _qca_cdf(nu1: float, zeta: float, phi: float) -> np.ndarray:
    """cdf[label, eve, basis_a, basis_b, charlie] over the 8 outcome strings.

    ``eve`` is 0 for no interception, 1 for z and 2 for x.
    """
    params = tail_params(nu1, zeta, phi)
    chi_dirs = [
        BlochDirection.from_vector(_bloch(params.chi1.amplitudes)),
        BlochDirection.from_vector(_bloch(params.chi2.amplitudes)),
    ]
    ab_dirs = [Z_AXIS, X_AXIS]
    cdf = np.empty((2, 3, 2, 2, 2, 8))
    for s, psi in enumerate(make_psi_pair_n(params)):
        base = psi.density_matrix().entries
        for e, eve_dir in enumerate((None, Z_AXIS, X_AXIS)):
            rho = base if eve_dir is None else _dephase(base, 2, eve_dir, 3)
            rho = DensityMatrix(rho)
            for a, b, c in itertools.product(range(2), repeat=3):
                dist = joint_distribution(rho, [ab_dirs[a], ab_dirs[b], chi_dirs[c]])
                cdf[s, e, a, b, c] = np.cumsum(dist)
    cdf = cdf.reshape(-1, 8)
    cdf.flags.writeable = False
    return cdf


def _bloch(amplitudes: np.ndarray) -> np.ndarray:
    rho = np.outer(amplitudes, amplitudes.conj())
    return np.array(
        [2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real]
    )


def run_qca(config: QcaConfig) -> ProtocolTranscript:
    n, seed, m = config.runs, config.seed, config.inspection_size
    labels = np.where(_uniforms(seed, "label", n) < config.nu1, 1, 2).astype(np.int8)
    ba = _uniform_choice(_uniforms(seed, "alice", n), 2)
    bb = _uniform_choice(_uniforms(seed, "bob", n), 2)
    bc = _uniform_choice(_uniforms(seed, "charlie", n), 2)
    if config.eve_model == "intercept-resend":
        eve = 1 + _uniform_choice(_uniforms(seed, "eve", n), 2)
    else:
        eve = np.zeros(n, dtype=np.int64)
    keys = ((((labels - 1) * 3 + eve) * 2 + ba) * 2 + bb) * 2 + bc
    idx = _sample(_qca_cdf(config.nu1, config.zeta, config.phi), keys, _uniforms(seed, "outcome", n))
    outcomes = _bits(idx, 3)

    # the m runs with the smallest inspection keys are broadcast
    order = np.argsort(_uniforms(seed, "inspect", n), kind="stable")
    broadcast = np.zeros(n, dtype=bool)
    broadcast[order[:m]] = True

    bases = np.stack([ba, bb, 2 + bc], axis=1).astype(np.int8)
    t = ProtocolTranscript("qca", QCA_BASES, labels, bases, outcomes, broadcast)
    t.summary = _qca_summary(t, config)
    return t


def _qca_summary(t: ProtocolTranscript, config: QcaConfig) -> dict:
    a, b, c = t.outcomes[:, 0], t.outcomes[:, 1], t.outcomes[:, 2]
    ba, bb, bc = t.bases[:, 0], t.bases[:, 1], t.bases[:, 2] - 2
    zz = (ba == 0) & (bb == 0)
    xx = (ba == 1) & (bb == 1)
    insp = t.broadcast

    # (a): inspected zz runs must be correlated, and Charlie's matching chi
    # projection must succeed whenever he picked the state Alice steered to
    zz_i = insp & zz
    mismatch = zz_i & (a != b)
    kept = zz_i & (a == b) & (bc == a)
    failed = kept & (c != 0)
    verdict_a = not bool(mismatch.any() or failed.any())

    # (b): x coincidence among inspected runs differs from 1/2
    xx_i = insp & xx
    n_xx, k_xx = int(xx_i.sum()), int(np.sum(xx_i & (a == b)))
    p_value = binomtest(k_xx, n_xx, 0.5).pvalue if n_xx else 1.0
    verdict_b = bool(p_value < QCA_ALPHA)

    key = ~insp & zz
    n_key = int(key.sum())
    n_all_xx = int(xx.sum())
    return {
        "inspected_runs": int(insp.sum()),
        "verdict_a": verdict_a,
        "verdict_a_kept_runs": int(kept.sum()),
        "verdict_a_violations": int(mismatch.sum() + failed.sum()),
        "verdict_b": verdict_b,
        "inspected_x_runs": n_xx,
        "x_coincidence": k_xx / n_xx if n_xx else float("nan"),
        "p_value": float(p_value),
        "x_coincidence_all": float(np.sum(xx & (a == b)) / n_all_xx) if n_all_xx else float("nan"),
        "x_runs_all": n_all_xx,
        "accepted": bool(verdict_a and verdict_b),
        "sifted_key_length": n_key,
        "qber": float(np.sum(key & (a != b)) / n_key) if n_key else float("nan"),
        "eve_model": config.eve_model,
    }


def qca_coincidence_closed_form(params: NQubitFamilyParams) -> float:
    """1/2 (1 + V cos(phi) sin(zeta)) for chi1 = |0>, chi2 = cos(phi)|0> + sin(phi)|1>."""
    if params.n_qubits != 3:
        raise ValueError("expected the three-qubit family")
    chi1, chi2 = params.chi1.amplitudes, params.chi2.amplitudes
    if not np.allclose(chi1, [1, 0]) or abs(chi2[1].imag) > 1e-12 or abs(chi2[0].imag) > 1e-12:
        raise ValueError("chi1 must be |0> and chi2 real")
    cos_phi = float(chi2[0].real)
    return 0.5 * (1 + params.visibility * cos_phi * math.sin(params.zeta))


def qca_coincidence_exact(params: NQubitFamilyParams) -> float:
    """Probability of equal x outcomes for Alice and Bob, by trace."""
    dist = joint_distribution(make_rhoN(params), [X_AXIS, X_AXIS, Z_AXIS])
    # outcome strings abc; sum over c where a == b
    return float(dist[[0, 1, 6, 7]].sum())
