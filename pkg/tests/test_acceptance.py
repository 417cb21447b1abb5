"""Exit criteria of the build, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line; the session summary repeats them.
"""
import time
import warnings

import numpy as np
import pytest

from povmkit import io
from povmkit.certify import (
    certify_eigenvalue1,
    certify_extremality,
    certify_informational_completeness,
    certify_norm1,
    certify_preprocessing_clean,
    certify_rank1,
    full_report,
    ic_pure_witness,
    restricted_ic,
)
from povmkit.cli import run
from povmkit.dilation import minimal_naimark, rank1_refinement, verify_dilation
from povmkit.generate import (
    Example71Config,
    gen_example71,
    gen_intro_examples,
    gen_random_povm,
    gen_random_pvm,
    gen_trine,
    random_channel_kraus,
    random_povm_corpus,
    random_state,
)
from povmkit.instrument import (
    instrument_from_channels,
    joint_to_sequential,
    luders_instrument,
    nuclear_instrument,
    sequential_joint,
    total_channel,
    unique_joint_for_extreme,
)
from povmkit.numerics import dyad, is_projection, ket, op_norm
from povmkit.observable import DiscretePovm, ZeroEffectWarning, is_regular, outcome_distribution, validate
from povmkit.process import extract_kernel, pvm_preprocessing_channel

from conftest import feasible_ranks

pytestmark = pytest.mark.acceptance

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def _verdict(name, failures):
    line = f"{'PASS' if not failures else 'FAIL'} {name}"
    if failures:
        line += ": " + "; ".join(failures[:5])
    print(line)
    assert not failures, line


def _random_pvm(rng, d):
    k = int(rng.integers(1, d + 1))
    cuts = sorted(rng.choice(np.arange(1, d), size=k - 1, replace=False)) if k > 1 else []
    edges = [0, *cuts, d]
    return gen_random_pvm(d, [int(b - a) for a, b in zip(edges[:-1], edges[1:])], rng)


def _random_instrument(rng, povm, d_out):
    chans = []
    for _ in povm.labels:
        s = int(rng.integers(1, 3)) + povm.dim // d_out
        chans.append(random_channel_kraus(povm.dim, d_out, s, rng))
    return instrument_from_channels(povm, chans)


def test_criterion_01_trine():
    t = gen_trine()
    rep = full_report(t, budget=4000)
    fails = []
    expected = {"rank1": True, "extreme": True, "regular": True, "norm1": False, "informationally_complete": False}
    for key, want in expected.items():
        if getattr(rep, key) != want:
            fails.append(f"{key}={getattr(rep, key)}")
    for e in t.effects:
        top = np.linalg.eigvalsh(e)[-1]
        if abs(top - 2 / 3) > 1e-9:
            fails.append(f"eigenvalue {top}")
    if not restricted_ic(t, [SX, SY]):
        fails.append("restricted_ic(sx, sy) false")
    if restricted_ic(t, [SZ]):
        fails.append("restricted_ic(sz) true")
    _verdict("1 trine suite", fails)


def test_criterion_02_example71():
    fails = []
    for d in (2, 3):
        m = gen_example71(d)
        if validate(m).sum_residual >= 1e-8:
            fails.append(f"d={d} sum residual")
        if verify_dilation(minimal_naimark(m), m) >= 1e-8:
            fails.append(f"d={d} dilation residual")
        if m.n_outcomes != d * d:
            fails.append(f"d={d} N={m.n_outcomes}")
        if not (certify_rank1(m) and certify_extremality(m) and certify_informational_completeness(m)):
            fails.append(f"d={d} certificates")
        diag = gen_example71(Example71Config(d, tuple((k, k) for k in range(1, d + 1))))
        if not all(is_projection(e) for e in diag.effects):
            fails.append(f"d={d} diagonal not a PVM")
        if max(op_norm(e @ e - e) for e in diag.effects) >= 1e-8:
            fails.append(f"d={d} diagonal projection residual")
    _verdict("2 example71 suite", fails)


def test_criterion_03_c3_norm1():
    c3 = gen_intro_examples()["c3_norm1"]
    fails = []
    if not certify_eigenvalue1(c3):
        fails.append("eigenvalue1 false")
    ok, dec = certify_preprocessing_clean(c3)
    e = [dyad(ket(i, 3)) for i in range(3)]
    if not ok:
        fails.append("no decomposition")
    else:
        for got, want in zip(dec.pvm_part_E, [e[1], e[2]]):
            if np.max(np.abs(got - want)) > 1e-10:
                fails.append("E part")
        for got, want in zip(dec.residual_part_F, [e[0] / 3, 2 * e[0] / 3]):
            if np.max(np.abs(got - want)) > 1e-10:
                fails.append("F part")
    ref = rank1_refinement(c3).refined
    norms = [op_norm(x) for x in ref.effects]
    if min(abs(n - 1 / 3) for n in norms) > 1e-10:
        fails.append(f"refinement norms {norms}")
    if certify_norm1(ref):
        fails.append("refinement is norm-1")
    _verdict("3 C^3 norm-1 example", fails)


def test_criterion_04_regular_not_norm1():
    m = gen_intro_examples()["regular_not_norm1"]
    fails = []
    if not is_regular(m):
        fails.append("not regular")
    if certify_norm1(m):
        fails.append("norm-1")
    _verdict("4 regular but not norm-1", fails)


def test_criterion_05_dilation_suite():
    rng = np.random.default_rng(5005)
    fails = []
    for k in range(500):
        d = int(rng.integers(1, 9))
        n = int(rng.integers(1, 11))
        povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
        res = verify_dilation(minimal_naimark(povm), povm)
        if res >= 1e-9:
            fails.append(f"#{k} dilation residual {res:.2e}")
        ref = rank1_refinement(povm)
        rho = random_state(d, seed=rng)
        p = outcome_distribution(povm, rho).probabilities
        p1 = outcome_distribution(ref.refined, rho).as_dict()
        summed = np.array([sum(p1[c] for c in ref.partition()[lab]) for lab in povm.labels])
        if np.max(np.abs(summed - p)) >= 1e-10:
            fails.append(f"#{k} refinement statistics")
        if certify_extremality(povm) and not certify_extremality(ref.refined):
            fails.append(f"#{k} refinement lost extremality")
        if certify_informational_completeness(povm) and not certify_informational_completeness(ref.refined):
            fails.append(f"#{k} refinement lost IC")
    _verdict("5 dilation property suite", fails)


def test_criterion_06_counting_laws():
    fails = []
    count = 0
    # mostly small dimensions so that every class of the laws actually occurs
    corpora = [random_povm_corpus(606, 700, max_dim=8, max_outcomes=10), random_povm_corpus(607, 400, max_dim=3, max_outcomes=12)]
    seen = {"ic": 0, "extreme_rank1": 0, "eig1": 0}
    for corpus in corpora:
        for povm in corpus:
            count += 1
            d, n = povm.dim, povm.n_outcomes
            ic = certify_informational_completeness(povm)
            ext = certify_extremality(povm)
            r1 = certify_rank1(povm)
            e1 = certify_eigenvalue1(povm)
            seen["ic"] += ic
            seen["extreme_rank1"] += ext and r1
            seen["eig1"] += e1
            if ic and n < d * d:
                fails.append(f"IC with N={n}, d={d}")
            if ext and r1 and n > d * d:
                fails.append(f"extreme rank-1 with N={n}, d={d}")
            if ext and ic and not (r1 and n == d * d):
                fails.append(f"extreme IC but rank1={r1}, N={n}, d={d}")
            if e1 and n > d:
                fails.append(f"eigenvalue-1 with N={n}, d={d}")
            if e1 and ic and d > 1:
                fails.append(f"eigenvalue-1 and IC, d={d}")
    print(f"corpus size {count}, occurrences {seen}")
    if count < 1000:
        fails.append(f"corpus of only {count}")
    _verdict("6 counting laws", fails)


def test_criterion_07_sequential_joint_round_trips():
    rng = np.random.default_rng(7007)
    fails = []
    for k in range(200):
        kind = k % 4
        d = int(rng.integers(1, 5))
        d_out = int(rng.integers(1, 4))
        n2 = int(rng.integers(1, 5))
        if kind in (1, 2):
            n = int(rng.integers(d, d * d + 1))
            m = gen_random_povm(d, n, 1, rng)
        else:
            n = int(rng.integers(1, 6))
            m = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
        if kind == 2:
            sigmas = [random_state(d_out, seed=rng) for _ in range(n)]
            inst = nuclear_instrument(m, sigmas)
        elif kind == 3:
            inst = luders_instrument(m)
            d_out = d
        else:
            inst = _random_instrument(rng, m, d_out)
        second = gen_random_povm(d_out, n2, feasible_ranks(rng, d_out, n2), rng)
        joint = sequential_joint(inst, second)

        first_err = max(op_norm(a - b) for a, b in zip(joint.first_margin_effects(), m.effects))
        phi = total_channel(inst)
        second_err = max(op_norm(a - phi(b)) for a, b in zip(joint.second_margin_effects(), second.effects))
        if max(first_err, second_err) >= 1e-9:
            fails.append(f"#{k} margins {first_err:.1e} {second_err:.1e}")

        inst2, basis = joint_to_sequential(m, joint)
        diff = joint.max_difference(sequential_joint(inst2, basis))
        if diff >= 1e-8:
            fails.append(f"#{k} round trip {diff:.1e}")

        if kind in (1, 2):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ZeroEffectWarning)
                margin = DiscretePovm.from_effects(joint.second_margin_effects(), second.labels, drop_zero_effects=True)
            if margin.n_outcomes != n2:
                continue
            fit = extract_kernel(m, margin)
            if fit.residual >= 1e-8:
                fails.append(f"#{k} kernel residual {fit.residual:.1e}")
            if kind == 2:
                want = np.array([[np.trace(s.matrix @ e).real for e in second.effects] for s in sigmas])
                err = np.max(np.abs(fit.kernel.entries - want))
                if err >= 1e-9:
                    fails.append(f"#{k} nuclear kernel {err:.1e}")
    _verdict("7 sequential/joint round trips", fails)


def test_criterion_08_pvm_commutation():
    rng = np.random.default_rng(8008)
    fails = []
    worst = 0.0
    for k in range(100):
        d = int(rng.integers(1, 6))
        pvm = _random_pvm(rng, d)
        d_out = int(rng.integers(1, 4))
        n2 = int(rng.integers(1, 5))
        second = gen_random_povm(d_out, n2, feasible_ranks(rng, d_out, n2), rng)
        joint = sequential_joint(_random_instrument(rng, pvm, d_out), second)
        for i, p in enumerate(pvm.effects):
            for j in range(n2):
                worst = max(worst, op_norm(p @ joint.grid[i, j] - joint.grid[i, j] @ p))
    if worst >= 1e-9:
        fails.append(f"max commutator {worst:.2e}")
    print(f"max commutator norm {worst:.2e}")
    _verdict("8 PVM commutation law", fails)


def test_criterion_09_extremality_uniqueness():
    rng = np.random.default_rng(9009)
    fails = []
    done = 0
    while done < 100:
        d = int(rng.integers(2, 5))
        if done % 3 == 0:
            m = _random_pvm(rng, d)
        else:
            n = int(rng.integers(d, d * d + 1))
            m = gen_random_povm(d, n, 1, rng)
        if not certify_extremality(m):
            continue
        d_out = int(rng.integers(1, 4))
        n2 = int(rng.integers(1, 4))
        second = gen_random_povm(d_out, n2, feasible_ranks(rng, d_out, n2), rng)
        joint = sequential_joint(_random_instrument(rng, m, d_out), second)
        margin = np.array(joint.second_margin_effects())
        if min(op_norm(x) for x in margin) < 1e-9:
            continue
        target = DiscretePovm.from_effects(margin)
        a = unique_joint_for_extreme(m, target)
        inst2, basis = joint_to_sequential(m, joint)
        b = sequential_joint(inst2, basis)
        err = max(a.max_difference(b), a.max_difference(joint))
        if err >= 1e-8:
            fails.append(f"#{done} reconstructions differ by {err:.1e}")
        done += 1
    _verdict("9 extremality uniqueness", fails)


def test_criterion_10_ic_pure_witnesses():
    rng = np.random.default_rng(1010)
    fails = []
    slowest = 0.0
    for k in range(50):
        d = int(rng.integers(2, 7))
        pvm = _random_pvm(rng, d)
        t0 = time.perf_counter()
        search = ic_pure_witness(pvm, seed=k)
        dt = time.perf_counter() - t0
        slowest = max(slowest, dt)
        if search.witness is None or search.best_residual >= 1e-8:
            fails.append(f"#{k} d={d} no witness ({search.best_residual:.1e})")
        if dt >= 1.0:
            fails.append(f"#{k} took {dt:.2f}s")
    for d in (2, 3):
        search = ic_pure_witness(gen_example71(d), budget=10_000)
        if search.witness is not None:
            fails.append(f"example71 d={d} has a witness")
    print(f"slowest PVM witness {slowest:.3f}s")
    _verdict("10 IC-pure witnesses", fails)


def test_criterion_11_simulation_statistics(tmp_path):
    rng = np.random.default_rng(1111)
    n_shots = 100_000
    fails = []

    def write(obj, name):
        path = tmp_path / name
        io.write(obj, path)
        return str(path)

    for k in range(20):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(1, 7))
        povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
        rho = random_state(d, seed=rng)
        code, doc = run(["simulate", write(povm, f"m{k}.json"), write(rho, f"s{k}.json"), "-n", str(n_shots), "--seed", str(k)])
        p = outcome_distribution(povm, rho).probabilities
        freq = np.array(doc["counts"]) / n_shots
        bound = 3 * np.sqrt(p * (1 - p) / n_shots)
        if code != 0 or np.any(np.abs(freq - p) > bound + 1e-15):
            fails.append(f"simulate #{k} z={np.max(np.abs(freq - p) / np.maximum(bound / 3, 1e-300)):.2f}")

        inst = _random_instrument(rng, povm, 2)
        second = gen_random_povm(2, 3, feasible_ranks(rng, 2, 3), rng)
        code, doc = run(
            [
                "sequential",
                write(inst, f"i{k}.json"),
                write(second, f"m2{k}.json"),
                f"{tmp_path}/s{k}.json",
                "-n",
                str(n_shots),
                "--seed",
                str(k),
            ]
        )
        grid = sequential_joint(inst, second).grid
        pij = np.einsum("ab,ijba->ij", rho.matrix, grid).real
        freq = np.array(doc["counts"]) / n_shots
        bound = 4 * np.sqrt(np.clip(pij * (1 - pij), 0, None) / n_shots)
        if code != 0 or np.any(np.abs(freq - pij) > bound + 1e-12):
            fails.append(f"sequential #{k}")
    _verdict("11 simulation statistics", fails)


def test_criterion_12_pvm_preprocessing():
    rng = np.random.default_rng(1212)
    fails = []
    worst = 0.0
    for k in range(100):
        d_p = int(rng.integers(1, 7))
        pvm = _random_pvm(rng, d_p)
        d_m = int(rng.integers(1, 7))
        n = pvm.n_outcomes
        target = gen_random_povm(d_m, n, feasible_ranks(rng, d_m, n), rng)
        ch = pvm_preprocessing_channel(pvm, target)
        worst = max(worst, max(op_norm(ch(p) - m) for p, m in zip(pvm.effects, target.effects)))
    if worst >= 1e-10:
        fails.append(f"max residual {worst:.2e}")
    print(f"max |Phi'(P_i) - M_i| {worst:.2e}")
    _verdict("12 PVM pre-processing channel", fails)
