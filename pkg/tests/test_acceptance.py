"""Exit criteria, one test each. Every test prints a single PASS/FAIL line."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from conftest import FIXTURES, random_density, random_unit
from steerlab.bell import (
    build_functional,
    chsh_max_closed_form,
    composite_hardy_state,
    evaluate,
    even_closed_form,
    even_paper_settings,
    even_violation_threshold,
    ghz_family_state,
    hardy3_closed_form,
    hardy3_paper_angle,
    hardy_closed_form,
    hardy_paper_settings,
    i3_closed_form,
    odd_closed_form,
    odd_paper_settings,
    odd_violation_threshold,
    optimize_settings,
)
from steerlab.lhv import verify_bound, y_argument_check
from steerlab.protocols import (
    QcaConfig,
    ThirdManConfig,
    horodecki_threshold,
    qca_coincidence_closed_form,
    run_qca,
    run_third_man,
)
from steerlab.qcore import BlochDirection, partial_trace, spectral_decomposition
from steerlab.states import (
    TwoQubitFamilyParams,
    load_state,
    make_rho2,
    make_rho2_general,
    make_rhoN,
    product_tail_params,
    tail_params,
)
from steerlab.steering import branch_determinant, mutual_steering_check, steer

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def _report(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail

    return _report


def _sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


def test_criterion_1_chsh_maximum(report):
    start = time.perf_counter()
    chsh = build_functional("chsh")
    closed_err = opt_err = 0.0
    for nu1 in np.linspace(0.5, 1.0, 20):
        for zeta in np.linspace(0.0, np.pi, 20):
            params = TwoQubitFamilyParams(nu1, zeta)
            rho = make_rho2(params)
            target = math.sqrt(1 + (params.visibility * math.sin(zeta)) ** 2)
            value, settings = chsh_max_closed_form(params)
            closed_err = max(closed_err, abs(value - target),
                             abs(evaluate(chsh, rho, settings) - target))
            opt = optimize_settings(chsh, rho, seed=int(nu1 * 1e6) + int(zeta * 1e3))
            opt_err = max(opt_err, abs(opt.value - target))
    elapsed = time.perf_counter() - start
    ok = closed_err <= 1e-9 and opt_err <= 1e-6 and elapsed < 10
    report(1, ok, f"trace err {closed_err:.1e} (<=1e-9), optimizer err {opt_err:.1e} "
                  f"(<=1e-6), {elapsed:.2f} s (<10 s)")


def test_criterion_2_lhv_certification(report):
    start = time.perf_counter()
    functionals = (
        [build_functional("chsh"), build_functional("hardy3"), build_functional("i3")]
        + [build_functional("hardyN", n) for n in (4, 5, 6)]
        + [build_functional("composite", n, r) for n in (4, 5) for r in (0, 1, 2)]
        + [build_functional("evenN", n) for n in (2, 4, 6)]
        + [build_functional("oddN", n) for n in (3, 5)]
    )
    failed = [f.name for f in functionals if not verify_bound(f)]
    elapsed = time.perf_counter() - start
    ok = not failed and elapsed < 60
    report(2, ok, f"{len(functionals) - len(failed)}/{len(functionals)} bounds certified, "
                  f"{elapsed:.2f} s (<60 s)")


def test_criterion_3_dual_path(report):
    rng = np.random.default_rng(2024)
    points = 200
    errs = {}

    e = 0.0
    hardy3 = build_functional("hardy3")
    for _ in range(points):
        params = tail_params(rng.uniform(0.55, 1), rng.uniform(0.05, np.pi - 0.05),
                             rng.uniform(0, np.pi / 2 - 0.05))
        theta = rng.uniform(0, np.pi)
        value = evaluate(hardy3, make_rhoN(params), hardy_paper_settings(3, 0, theta))
        e = max(e, abs(value - hardy3_closed_form(params, theta)))
        e = max(e, abs(evaluate(hardy3, make_rhoN(params),
                                hardy_paper_settings(3, 0, hardy3_paper_angle(params)))
                       - hardy3_closed_form(params)))
    errs["hardy3"] = e

    e = 0.0
    i3 = build_functional("i3")
    for _ in range(points):
        nu1, zeta, theta = rng.uniform(0, 1), rng.uniform(0, np.pi), rng.uniform(0, np.pi)
        value = evaluate(i3, ghz_family_state(3, nu1, zeta), odd_paper_settings(3, theta))
        e = max(e, abs(value - i3_closed_form(nu1, zeta, theta)))
    errs["I3"] = e

    e = 0.0
    for _ in range(points):
        n = int(rng.integers(4, 7))
        f = [0.0 if rng.random() < 0.3 else rng.uniform(0.05, 1) for _ in range(n - 2)]
        params = product_tail_params(rng.uniform(0, 1), rng.uniform(0, np.pi), f)
        rho, r, big_f = composite_hardy_state(params)
        fn = build_functional("composite", n, r) if r else build_functional("hardyN", n)
        theta = rng.uniform(0, np.pi)
        value = evaluate(fn, rho, hardy_paper_settings(n, r, theta))
        e = max(e, abs(value - hardy_closed_form(params.nu1, params.zeta, big_f, r, theta)))
    errs["hardyN"] = e

    e = 0.0
    for _ in range(points):
        n = int(rng.choice([2, 4, 6]))
        nu1, zeta, theta = rng.uniform(0, 1), rng.uniform(0, np.pi), rng.uniform(0, np.pi)
        value = evaluate(build_functional("evenN", n), ghz_family_state(n, nu1, zeta),
                         even_paper_settings(n, theta))
        e = max(e, abs(value - even_closed_form(n, nu1, zeta, theta)))
    errs["evenN"] = e

    e = 0.0
    for _ in range(points):
        n = int(rng.choice([3, 5]))
        nu1, zeta, theta = rng.uniform(0, 1), rng.uniform(0, np.pi), rng.uniform(0, np.pi)
        value = evaluate(build_functional("oddN", n), ghz_family_state(n, nu1, zeta),
                         odd_paper_settings(n, theta))
        e = max(e, abs(value - odd_closed_form(n, nu1, zeta, theta)))
    errs["oddN"] = e

    worst = max(errs.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    report(3, worst <= 1e-9, f"max |closed - trace| per formula ({points} pts each): {detail}")


def test_criterion_4_violation_thresholds(report):
    rng = np.random.default_rng(4)
    margin = 1e-6
    wrong = checked = 0
    for n in (3, 4, 5, 6):
        fn = build_functional("evenN" if n % 2 == 0 else "oddN", n)
        for side in (-1, 1):
            for i in range(50):
                nu1 = rng.uniform(0.7, 1.0)
                zeta = rng.uniform(0.5, np.pi - 0.5)
                vs = (2 * nu1 - 1) * math.sin(zeta)
                if n % 2 == 0:
                    thr = even_violation_threshold(n, vs)
                    expect = side < 0  # below the threshold violates
                    make = even_paper_settings
                else:
                    thr = odd_violation_threshold(vs)
                    expect = side > 0  # above the threshold violates
                    make = odd_paper_settings
                gap = margin if i == 0 else margin + rng.uniform(0, 0.5) * thr
                t = thr + side * gap
                if t <= 0:
                    continue
                theta = 2 * math.atan(t)
                value = evaluate(fn, ghz_family_state(n, nu1, zeta), make(n, theta))
                wrong += fn.violated_by(value) != expect
                checked += 1
    report(4, wrong == 0, f"{wrong} misclassified of {checked} points at margin >= {margin}")


def test_criterion_5_steering_premise(report):
    grid_ok = True
    for nu1 in np.linspace(0.05, 0.95, 10):
        for zeta in np.linspace(0.1, np.pi - 0.1, 10):
            v = mutual_steering_check(make_rho2(TwoQubitFamilyParams(nu1, zeta)))
            grid_ok &= all(x.steerable_to_pure for x in v.values())
    ends_ok = True
    for nu1 in np.linspace(0.05, 0.95, 10):
        for zeta in (0.0, np.pi):
            v = mutual_steering_check(make_rho2(TwoQubitFamilyParams(nu1, zeta)))
            ends_ok &= not any(x.steerable_to_pure for x in v.values())
    v = mutual_steering_check(load_state(FIXTURES / "rank3.json"))
    rank3_ok = sum(x.steerable_to_pure for x in v.values()) < 2

    # branch determinants: both vanish iff Bob measures along z and cos(beta) = 0
    det_bad = points = 0
    for a in np.linspace(0.0, 1.0, 10):
        for beta in np.linspace(0.0, np.pi, 11)[:10]:
            for k, dtau in enumerate(np.linspace(0.0, 2 * np.pi, 10, endpoint=False)):
                gamma = 0.37 * k
                rho = make_rho2_general(0.35, 1.1, beta, dtau, 0.0)
                d = branch_determinant(rho, 2, a, gamma)
                zero = max(abs(d[0]), abs(d[1])) <= 1e-12
                expected = a in (0.0, 1.0) and abs(math.cos(beta)) <= 1e-10
                det_bad += zero != expected
                points += 1
    ok = grid_ok and ends_ok and rank3_ok and det_bad == 0
    report(5, ok, f"interior grid {grid_ok}, zeta in {{0, pi}} rejected {ends_ok}, "
                  f"rank-3 rejected {rank3_ok}, determinant mismatches {det_bad}/{points}")


def test_criterion_6_horodecki_threshold(report):
    v = horodecki_threshold(zeta=np.pi / 2)
    err = abs(v - 1 / math.sqrt(2))
    report(6, err <= 1e-9, f"crossing at |V| = {v:.12f}, error {err:.1e} (<=1e-9)")


def test_criterion_7_protocol_statistics(report):
    start = time.perf_counter()
    runs = 100_000
    tm = run_third_man(ThirdManConfig(0.9, runs, seed=7)).summary
    tm_ok = tm["with_labels_qber"] == 0.0 and abs(
        tm["without_labels_x_qber"] - 0.1
    ) <= 5 * _sigma(0.1, tm["without_labels_x_runs"])

    cfg = QcaConfig(0.7, np.pi / 2, np.pi / 3, runs, 10_000, seed=42)
    qca = run_qca(cfg).summary
    p = qca_coincidence_closed_form(cfg.params)
    qca_ok = qca["accepted"] and abs(qca["x_coincidence_all"] - p) <= 5 * _sigma(p, qca["x_runs_all"])

    v0 = run_qca(QcaConfig(0.5, np.pi / 2, np.pi / 3, runs, 10_000, seed=42)).summary
    reject_ok = not v0["accepted"]

    trials = 1000
    detected = sum(
        not run_qca(QcaConfig(0.7, np.pi / 2, np.pi / 3, 20_000, 10_000, seed=s,
                              eve_model="intercept-resend")).summary["accepted"]
        for s in range(trials)
    )
    rate = detected / trials
    elapsed = time.perf_counter() - start
    ok = tm_ok and qca_ok and reject_ok and rate > 0.999 and elapsed < 30
    report(7, ok, f"third man {tm_ok} (x QBER {tm['without_labels_x_qber']:.4f}), "
                  f"QCA coincidence {qca['x_coincidence_all']:.4f} vs {p:.4f}, "
                  f"V=0 rejected {reject_ok}, Eve detected {detected}/{trials}, {elapsed:.1f} s")


def test_criterion_8_property_suites(report):
    failures = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 4))
        rho = random_density(rng, n, rank=int(rng.integers(1, (1 << n) + 1)))

        party = int(rng.integers(1, n + 1))
        rest = [q for q in range(1, n + 1) if q != party]
        marginal = partial_trace(rho, rest).entries
        for _ in range(2):
            ens = steer(rho, party, BlochDirection.from_vector(random_unit(rng)))
            if not np.allclose(ens.average_state(), marginal, atol=1e-12):
                failures.append(("no-signaling", seed))

        for keep in ([1], list(range(2, n + 1))):
            red = partial_trace(rho, keep)
            if abs(np.trace(red.entries) - 1) > 1e-12 or red.eigenvalues()[-1] < -1e-12:
                failures.append(("invariants", seed))
        if not 0 < rho.purity() <= 1 + 1e-12:
            failures.append(("invariants", seed))

        rebuilt = sum(v * np.outer(s.amplitudes, s.amplitudes.conj())
                      for v, s in spectral_decomposition(rho))
        if not np.allclose(rebuilt, rho.entries, atol=1e-12):
            failures.append(("spectral", seed))

        if not y_argument_check(int(rng.choice([2, 4, 6]))):
            failures.append(("y-argument", seed))
    if y_argument_check(2, normalization=0.25):
        failures.append(("y-argument scaling", -1))
    report(8, not failures, f"100 seeds, failures: {failures[:5] if failures else 'none'}")
