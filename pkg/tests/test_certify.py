import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from povmkit.certify import (
    certify_eigenvalue1,
    certify_extremality,
    certify_informational_completeness,
    certify_norm1,
    certify_postprocessing_clean,
    certify_preprocessing_clean,
    certify_rank1,
    extremality_rank,
    full_report,
    ic_deficiency,
    ic_pure_witness,
    norm1_check,
    restricted_ic,
    zw_falsifier,
)
from povmkit.dilation import minimal_naimark, rank1_refinement
from povmkit.errors import BadBasis, CertificateInconsistency, NotRank1, SubsetBlowup
from povmkit.generate import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    gen_basis_pvm,
    gen_example71,
    gen_intro_examples,
    gen_random_povm,
    gen_random_pvm,
    gen_trine,
    random_unitary,
)
from povmkit.io import dumps
from povmkit.numerics import dyad, ket
from povmkit.observable import DiscretePovm

from conftest import feasible_ranks, seeds


def _real_span_dim(mats):
    # oracle: Hermitian matrices as real vectors (Re, Im parts), numpy's own rank rule
    rows = np.array([np.concatenate([m.real.ravel(), m.imag.ravel()]) for m in mats])
    return np.linalg.matrix_rank(rows)


def _extreme_oracle(povm):
    """Dimension of the perturbations D_i = V_i X_i V_i* (X_i Hermitian) with sum D_i = 0."""
    cols = []
    for e in povm.effects:
        w, u = np.linalg.eigh(e)
        v = u[:, w > 1e-12] * np.sqrt(w[w > 1e-12])
        m = v.shape[1]
        for a in range(m):
            for b in range(a, m):
                for c in (1.0, 1j) if a != b else (1.0,):
                    x = np.zeros((m, m), dtype=complex)
                    x[a, b] = c
                    x[b, a] = np.conj(c)
                    d = v @ x @ v.conj().T
                    cols.append(np.concatenate([d.real.ravel(), d.imag.ravel()]))
    a = np.array(cols).T
    return a.shape[1] - np.linalg.matrix_rank(a)


def _norm1_oracle(povm, tol=1e-7):
    d = povm.dim
    for r in range(1, povm.n_outcomes + 1):
        for subset in itertools.combinations(range(povm.n_outcomes), r):
            m = povm.effects[list(subset)].sum(axis=0)
            if np.linalg.norm(m, 2) < 1e-9 or np.linalg.norm(m - np.eye(d), 2) < 1e-9:
                continue
            if np.linalg.norm(m, 2) < 1 - tol:
                return False
    return True


# -- rank-1 ----------------------------------------------------------------


def test_rank1_examples():
    c3 = gen_intro_examples()["c3_norm1"]
    for f in (certify_rank1, certify_postprocessing_clean):
        assert f(gen_trine())
        assert not f(c3)
        assert f(rank1_refinement(c3).refined)


# -- informational completeness ----------------------------------------------


def test_ic_examples():
    assert not certify_informational_completeness(gen_trine())
    assert ic_deficiency(gen_trine()) == 1
    assert certify_informational_completeness(gen_example71(2))
    assert not certify_informational_completeness(gen_random_pvm(3, [1, 1, 1], seed=0))


@given(seeds, st.integers(1, 4), st.integers(1, 18))
def test_ic_matches_real_span_oracle(seed, d, n):
    rng = np.random.default_rng(seed)
    povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
    assert ic_deficiency(povm) == d * d - _real_span_dim(povm.effects)


def test_restricted_ic_examples():
    t = gen_trine()
    assert restricted_ic(t, [PAULI_X, PAULI_Y])
    assert not restricted_ic(t, [PAULI_Z])
    pvm = gen_random_pvm(2, [1, 1], seed=4)
    assert restricted_ic(pvm, [pvm.effects[0] - pvm.effects[1]])


def test_restricted_ic_bad_bases():
    t = gen_trine()
    with pytest.raises(BadBasis):
        restricted_ic(t, [])
    with pytest.raises(BadBasis):
        restricted_ic(t, [np.eye(2)])
    with pytest.raises(BadBasis):
        restricted_ic(t, [np.array([[0, 1], [0, 0]])])
    with pytest.raises(BadBasis):
        restricted_ic(t, [PAULI_X, 2 * PAULI_X])
    with pytest.raises(BadBasis):
        restricted_ic(t, [np.zeros((3, 3))])


# -- extremality -------------------------------------------------------------


def test_extremality_examples():
    assert certify_extremality(gen_random_pvm(4, [2, 1, 1], seed=2))
    assert certify_extremality(gen_example71(2))
    assert certify_extremality(gen_trine())
    assert not certify_extremality(DiscretePovm.from_effects([np.eye(2) / 2, np.eye(2) / 2]))
    assert not certify_extremality(gen_intro_examples()["c3_norm1"])


@given(seeds, st.integers(1, 4), st.integers(1, 8))
def test_extremality_matches_perturbation_oracle(seed, d, n):
    rng = np.random.default_rng(seed)
    povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
    assert certify_extremality(povm) == (_extreme_oracle(povm) == 0)


def test_extremality_rank1_equals_linear_independence():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 4))
        n = int(rng.integers(d, d * d + 3))
        povm = gen_random_povm(d, n, 1, rng)
        independent = np.linalg.matrix_rank(povm.effects.reshape(n, -1)) == n
        assert certify_extremality(povm) == independent


@given(seeds, st.integers(2, 4))
def test_extremality_invariant_under_block_unitaries(seed, d):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
    dil = minimal_naimark(povm)
    rotated = [v @ random_unitary(v.shape[1], rng) for v in dil.vectors]
    assert extremality_rank(rotated) == extremality_rank(dil.vectors)


# -- norm-1 ------------------------------------------------------------------


def test_norm1_examples():
    c3 = gen_intro_examples()["c3_norm1"]
    assert certify_norm1(c3) and certify_eigenvalue1(c3)
    assert not certify_norm1(rank1_refinement(c3).refined)
    assert not certify_norm1(gen_trine())
    assert not certify_norm1(gen_intro_examples()["regular_not_norm1"])
    res = norm1_check(gen_trine())
    assert res.worst_value == pytest.approx(2 / 3)


def test_norm1_trivial_povm():
    assert certify_norm1(DiscretePovm.from_effects([np.eye(3)]))
    assert certify_norm1(DiscretePovm.from_effects([np.eye(3)]), exhaustive=True)


@given(seeds, st.integers(1, 4), st.integers(1, 7), st.booleans())
def test_norm1_singletons_agree_with_exhaustive(seed, d, n, mix_pvm):
    rng = np.random.default_rng(seed)
    if mix_pvm and d >= 3:
        povm = _clean_povm(rng, d + 2, int(rng.integers(1, 3)))
    else:
        povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
    fast = certify_norm1(povm)
    assert fast == certify_norm1(povm, exhaustive=True) == _norm1_oracle(povm)


def test_norm1_subset_blowup_and_sampling():
    povm = gen_random_povm(2, 21, 1, seed=0)
    with pytest.raises(SubsetBlowup):
        norm1_check(povm, exhaustive=True)
    with pytest.warns(RuntimeWarning):
        res = norm1_check(povm, exhaustive=True, sample=50)
    assert not res.exhaustive and not res.holds
    # the singleton test needs no enumeration
    assert not certify_norm1(povm)


# -- pre-processing cleanness ------------------------------------------------


def test_clean_decomposition_c3():
    c3 = gen_intro_examples()["c3_norm1"]
    ok, dec = certify_preprocessing_clean(c3)
    assert ok
    assert_allclose(dec.pvm_part_E[0], dyad(ket(1, 3)), atol=1e-10)
    assert_allclose(dec.pvm_part_E[1], dyad(ket(2, 3)), atol=1e-10)
    assert_allclose(dec.residual_part_F[0], dyad(ket(0, 3)) / 3, atol=1e-10)
    assert_allclose(dec.residual_part_F[1], 2 * dyad(ket(0, 3)) / 3, atol=1e-10)
    assert dec.support_dim == 2


def test_clean_decomposition_pvm_and_trine():
    pvm = gen_random_pvm(3, [2, 1], seed=5)
    ok, dec = certify_preprocessing_clean(pvm)
    assert ok
    assert_allclose(dec.projection_R, np.eye(3), atol=1e-12)
    assert all(np.linalg.norm(f) < 1e-12 for f in dec.residual_part_F)
    assert certify_preprocessing_clean(gen_trine()) == (False, None)


def _clean_povm(rng, d, n_pvm):
    # PVM on the first k basis vectors, an arbitrary POVM with n_pvm outcomes on the rest
    k = int(rng.integers(n_pvm, d))
    rest = d - k
    u = random_unitary(d, rng)
    mult = [1] * (n_pvm - 1) + [k - n_pvm + 1]
    sub = gen_random_povm(rest, n_pvm, feasible_ranks(rng, rest, n_pvm), rng)
    effects = []
    start = 0
    for i, m in enumerate(mult):
        e = np.zeros((d, d), dtype=complex)
        e[start : start + m, start : start + m] = np.eye(m)
        e[k:, k:] = sub.effects[i]
        effects.append(u @ e @ u.conj().T)
        start += m
    return DiscretePovm.from_effects(effects)


@given(seeds, st.integers(3, 6))
def test_clean_decomposition_invariants(seed, d):
    rng = np.random.default_rng(seed)
    povm = _clean_povm(rng, d, int(rng.integers(1, 3)))
    ok, dec = certify_preprocessing_clean(povm)
    assert ok
    r = dec.projection_R
    assert_allclose(r @ r, r, atol=1e-9)
    for q1, q2 in itertools.combinations(dec.pvm_part_E, 2):
        assert np.linalg.norm(q1 @ q2) < 1e-9
    for e, q, f in zip(povm.effects, dec.pvm_part_E, dec.residual_part_F):
        assert_allclose(r @ e, e @ r, atol=1e-8)
        rmr = r @ e @ r
        assert_allclose(rmr @ rmr, rmr, atol=1e-8)
        assert_allclose(q + f, e, atol=1e-8)
        assert np.linalg.norm(q, 2) > 0.5


# -- IC within pure states ---------------------------------------------------


def test_ic_pure_witness_pvm():
    search = ic_pure_witness(gen_basis_pvm(3))
    assert search.status == "proven_false"
    w = search.witness
    resid = max(abs(w.psi.conj() @ e @ w.phi) for e in gen_basis_pvm(3).effects)
    assert resid <= 1e-10


def test_ic_pure_witness_for_disjoint_localizing_vectors():
    # eigenvalue-1 POVM: |1> is localised on outcome 1, |2> on outcome 2
    povm = gen_intro_examples()["c3_norm1"]
    search = ic_pure_witness(povm)
    assert search.witness is not None
    for e in povm.effects:
        assert abs(search.witness.psi.conj() @ e @ search.witness.phi) <= 1e-10


def test_ic_pure_witness_none_for_ic():
    search = ic_pure_witness(gen_example71(2), budget=10_000)
    assert search.witness is None and search.status == "unknown"
    assert search.best_residual > 1e-3


def test_ic_pure_witness_parallel_matches_serial():
    povm = gen_random_povm(3, 5, 1, seed=9)
    a = ic_pure_witness(povm, budget=4000, seed=3)
    b = ic_pure_witness(povm, budget=4000, seed=3, parallel=True)
    # serial stops at the first success; a failed search runs every start in both modes
    if a.witness is None:
        assert b.witness is None
        assert a.best_residual == b.best_residual


def test_ic_pure_witness_needs_dimension_two():
    with pytest.raises(ValueError):
        ic_pure_witness(DiscretePovm.from_effects([np.eye(1)]))


def test_zw_falsifier_examples():
    pvm = gen_basis_pvm(2)
    search = zw_falsifier(pvm)
    assert search.status == "proven_false"
    w, phi = search.witness.phases, search.witness.phi
    z = sum(wi * e for wi, e in zip(w, pvm.effects))
    assert np.linalg.norm(z @ phi) == pytest.approx(1.0, abs=1e-9)
    assert abs(phi[0]) > 1e-6 and abs(phi[1]) > 1e-6  # not aligned
    # the hand-built witness: w = (1, -1) on (|1> + |2>)/sqrt(2)
    psi = np.array([1, 1]) / np.sqrt(2)
    assert np.linalg.norm((pvm.effects[0] - pvm.effects[1]) @ psi) == pytest.approx(1.0)

    assert zw_falsifier(DiscretePovm.from_effects([np.eye(1)])).status == "unknown"
    assert zw_falsifier(gen_example71(2), budget=10_000).status == "unknown"
    with pytest.raises(NotRank1):
        zw_falsifier(gen_intro_examples()["c3_norm1"])


# -- full report ---------------------------------------------------------------


def test_full_report_trine():
    r = full_report(gen_trine())
    assert (r.rank1, r.extreme, r.informationally_complete, r.norm1, r.preprocessing_clean, r.regular) == (
        True,
        True,
        False,
        False,
        False,
        True,
    )


def test_full_report_example71_and_pvm():
    r = full_report(gen_example71(2))
    assert r.rank1 and r.extreme and r.informationally_complete and r.n_outcomes == 4
    assert r.ic_pure == "implied_true"
    r = full_report(gen_random_pvm(3, [1, 2], seed=1))
    assert r.extreme and r.norm1 and r.eigenvalue1 and r.preprocessing_clean
    assert not r.informationally_complete
    assert r.ic_pure == "proven_false"


def test_full_report_serializes_with_seed_and_tolerances():
    doc = full_report(gen_intro_examples()["c3_norm1"], seed=7).as_dict()
    text = dumps(doc)
    back = json.loads(text)
    assert back["seed"] == 7
    assert back["tolerances"]["eigval1_tol"] == 1e-7
    assert back["preprocessing_clean"] is True
    assert set(back["decomposition"]) >= {"projection_R", "pvm_part_E", "residual_part_F"}


def test_consistency_check_rejects_contradictions():
    r = full_report(gen_trine())
    r.postprocessing_clean = False
    with pytest.raises(CertificateInconsistency):
        r.check_consistency()
    r = full_report(gen_trine())
    r.eigenvalue1 = r.norm1 = r.preprocessing_clean = True
    r.n_outcomes = 3
    with pytest.raises(CertificateInconsistency):
        r.check_consistency()


@given(seeds, st.integers(2, 3), st.integers(2, 6))
def test_certificates_invariant_under_relabeling(seed, d, n):
    rng = np.random.default_rng(seed)
    povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
    perm = rng.permutation(n)
    shuffled = povm.permute(perm)
    for f in (certify_rank1, certify_informational_completeness, certify_extremality, certify_norm1):
        assert f(povm) == f(shuffled)
    assert certify_preprocessing_clean(povm)[0] == certify_preprocessing_clean(shuffled)[0]


def test_regular_ic_impossible_for_generated_inputs():
    # a regular effect has lambda_max > 1/2, so tr M_i > 1/2 and N < 2d <= d^2 for d >= 2
    hits = 0
    for seed in range(300):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 4))
        n = int(rng.integers(2, d * d + 2))
        povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
        r = full_report(povm, search_witness=False)
        if r.regular:
            hits += 1
            assert n < 2 * d
            assert not r.informationally_complete
    assert hits > 0
