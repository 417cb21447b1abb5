"""Optimality certificates for discrete POVMs.

Decidable properties (rank-1, informational completeness, extremality,
norm-1 / eigenvalue-1, pre-processing cleanness) are answered exactly up to
the configured tolerances.  Informational completeness within pure states is
only semi-decidable here: the witness searches can prove it false, and
informational completeness implies it, otherwise the answer is ``unknown``.
"""
from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dilation import minimal_naimark
from .errors import BadBasis, CertificateInconsistency, DecompositionResidual, NotRank1, SubsetBlowup
from .numerics import DEFAULT_TOL, Tolerances, eig_hermitian, hermitian_residual, is_projection, numerical_rank, op_norm
from .observable import (
    MAX_EXHAUSTIVE_OUTCOMES,
    DiscretePovm,
    is_commutative,
    is_regular,
    regularity_margin,
    subset_sums,
)

__all__ = [
    "CertificateReport",
    "CleanDecomposition",
    "IcPureWitness",
    "WitnessSearch",
    "ZwWitness",
    "ZwSearch",
    "NormOneResult",
    "certify_rank1",
    "certify_postprocessing_clean",
    "certify_informational_completeness",
    "ic_deficiency",
    "restricted_ic",
    "certify_extremality",
    "extremality_rank",
    "norm1_check",
    "certify_norm1",
    "certify_eigenvalue1",
    "certify_preprocessing_clean",
    "ic_pure_witness",
    "zw_falsifier",
    "full_report",
]

DEFAULT_SEED = 20240917
DEFAULT_STARTS = 64
DEFAULT_ITERATIONS = 500


def _vectorized(effects: np.ndarray) -> np.ndarray:
    n = effects.shape[0]
    return effects.reshape(n, -1)


# -- rank-1 / post-processing ----------------------------------------------


def certify_rank1(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> bool:
    return all(numerical_rank(e, tol) == 1 for e in povm.effects)


def certify_postprocessing_clean(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Post-processing cleanness; for discrete outcomes this is exactly the rank-1 property."""
    return certify_rank1(povm, tol)


# -- informational completeness --------------------------------------------


def ic_deficiency(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> int:
    """``d^2`` minus the dimension of the span of the effects."""
    return povm.dim**2 - numerical_rank(_vectorized(povm.effects), tol)


def certify_informational_completeness(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> bool:
    return ic_deficiency(povm, tol) == 0


def restricted_ic(povm: DiscretePovm, subspace_basis: Sequence[np.ndarray], tol: Tolerances = DEFAULT_TOL) -> bool:
    """Whether ``Delta -> (tr[Delta M_i])_i`` is injective on the real span of ``subspace_basis``.

    The basis elements must be Hermitian, traceless and linearly independent;
    they describe the allowed differences of two states.
    """
    basis = [np.asarray(b, dtype=complex) for b in subspace_basis]
    if not basis:
        raise BadBasis("empty basis")
    d = povm.dim
    for b in basis:
        if b.shape != (d, d):
            raise BadBasis(f"basis element of shape {b.shape}, expected {(d, d)}")
        scale = 1.0 + op_norm(b)
        if hermitian_residual(b) > tol.herm_tol * scale:
            raise BadBasis("basis element is not Hermitian")
        if abs(np.trace(b)) > tol.id_tol * scale:
            raise BadBasis("basis element is not traceless")
    # Hermitian matrices form a real vector space: use real and imaginary parts.
    real_coords = np.array([np.concatenate([b.real.ravel(), b.imag.ravel()]) for b in basis])
    if numerical_rank(real_coords, tol) < len(basis):
        raise BadBasis("basis elements are linearly dependent")
    # tr[Delta M] = sum_ab Delta_ab M_ba, real for Hermitian arguments
    t = np.einsum("kab,nba->nk", np.stack(basis), povm.effects).real
    return numerical_rank(t, tol) == len(basis)


# -- extremality -----------------------------------------------------------


def _dyad_matrix(vectors: Sequence[np.ndarray]) -> np.ndarray:
    rows = []
    for v in vectors:
        m = v.shape[1]
        for k in range(m):
            for l in range(m):
                rows.append(np.outer(v[:, k], v[:, l].conj()).ravel())
    d = vectors[0].shape[0] if vectors else 0
    return np.array(rows) if rows else np.zeros((0, d * d), dtype=complex)


def extremality_rank(vectors: Sequence[np.ndarray], tol: Tolerances = DEFAULT_TOL) -> tuple[int, int]:
    """Rank and row count of the stacked dyads ``d_ik d_il*`` for per-outcome vector families."""
    stack = _dyad_matrix(vectors)
    return numerical_rank(stack, tol), stack.shape[0]


def certify_extremality(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Extreme iff the ``sum_i m_i^2`` dyads ``|d_ik><d_il|`` are linearly independent."""
    dil = minimal_naimark(povm, tol)
    rank, rows = extremality_rank(dil.vectors, tol)
    return rank == rows


# -- norm-1 / eigenvalue-1 -------------------------------------------------


@dataclass(frozen=True)
class NormOneResult:
    holds: bool
    worst_value: float
    worst_subset: tuple[str, ...]
    subsets_checked: int
    exhaustive: bool

    def as_dict(self) -> dict:
        return {
            "holds": self.holds,
            "worst_value": self.worst_value,
            "worst_subset": list(self.worst_subset),
            "subsets_checked": self.subsets_checked,
            "exhaustive": self.exhaustive,
        }


def norm1_check(
    povm: DiscretePovm,
    tol: Tolerances = DEFAULT_TOL,
    *,
    exhaustive: bool = False,
    sample: int = 0,
    seed=DEFAULT_SEED,
) -> NormOneResult:
    """Smallest ``lambda_max(M(X))`` over the nontrivial outcome sets ``X``.

    By default only single outcomes are inspected.  That is complete: every
    nontrivial ``M(X)`` dominates ``M_i`` for each ``i`` in ``X`` (effects are
    nonzero), so ``lambda_max(M(X)) >= lambda_max(M_i)``.  ``exhaustive=True``
    enumerates all ``2^N - 1`` subsets instead and refuses ``N > 20``
    unless ``sample`` requests that many random subsets in addition to the
    singletons and their complements.
    """
    n, d = povm.n_outcomes, povm.dim
    if not exhaustive:
        w = np.linalg.eigvalsh(povm.effects)[:, -1]
        i = int(np.argmin(w))
        # a single outcome with M_i = I is trivial; then N == 1
        if n == 1:
            return NormOneResult(True, float(w[0]), (), 0, True)
        return NormOneResult(bool(w[i] >= 1 - tol.eigval1_tol), float(w[i]), (povm.labels[i],), n, True)

    if n <= MAX_EXHAUSTIVE_OUTCOMES:
        batches = subset_sums(povm.effects)
        complete = True
    elif sample > 0:
        batches = iter([_sampled_subsets(povm.effects, sample, seed)])
        complete = False
        warnings.warn(
            f"norm-1 check over {n} outcomes uses sampled subsets; the result is incomplete",
            RuntimeWarning,
            stacklevel=2,
        )
    else:
        raise SubsetBlowup(f"{n} outcomes exceed the exhaustive limit of {MAX_EXHAUSTIVE_OUTCOMES}; pass sample>0")

    worst, worst_mask, checked = np.inf, None, 0
    for masks, sums in batches:
        w = np.linalg.eigvalsh(0.5 * (sums + sums.conj().transpose(0, 2, 1)))
        nonzero = w[:, -1] > tol.id_tol
        not_identity = np.abs(w - 1.0).max(axis=1) > tol.id_tol * np.sqrt(d)
        keep = nonzero & not_identity
        checked += int(keep.sum())
        if np.any(keep):
            vals = np.where(keep, w[:, -1], np.inf)
            j = int(np.argmin(vals))
            if vals[j] < worst:
                worst, worst_mask = float(vals[j]), masks[j]
    if worst_mask is None:
        return NormOneResult(True, 1.0, (), checked, complete)
    subset = tuple(lab for lab, bit in zip(povm.labels, worst_mask) if bit)
    return NormOneResult(bool(worst >= 1 - tol.eigval1_tol), worst, subset, checked, complete)


def _sampled_subsets(effects: np.ndarray, sample: int, seed) -> tuple[np.ndarray, np.ndarray]:
    n, d, _ = effects.shape
    rng = np.random.default_rng(seed)
    eye = np.eye(n, dtype=bool)
    masks = np.concatenate([eye, ~eye, rng.random((sample, n)) < 0.5])
    masks = masks[masks.any(axis=1)]
    return masks, (masks.astype(float) @ effects.reshape(n, -1)).reshape(-1, d, d)


def certify_norm1(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL, **kwargs) -> bool:
    """Every nontrivial ``M(X)`` has operator norm ``>= 1 - eigval1_tol``."""
    return norm1_check(povm, tol, **kwargs).holds


def certify_eigenvalue1(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL, **kwargs) -> bool:
    """Every nontrivial ``M(X)`` has an eigenvalue ``>= 1 - eigval1_tol``.

    For PSD matrices the operator norm is the largest eigenvalue, so in
    finite dimension this coincides with :func:`certify_norm1`.
    """
    return norm1_check(povm, tol, **kwargs).holds


# -- pre-processing cleanness ----------------------------------------------


@dataclass(frozen=True, eq=False)
class CleanDecomposition:
    """``M_i = Q_i + R^perp M_i R^perp`` with ``Q_i`` the eigenvalue-1 projections of ``M_i``."""

    labels: tuple[str, ...]
    projection_R: np.ndarray
    pvm_part_E: tuple[np.ndarray, ...]
    residual_part_F: tuple[np.ndarray, ...]
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def support_dim(self) -> int:
        return int(round(np.trace(self.projection_R).real))


def _build_clean_decomposition(povm: DiscretePovm, tol: Tolerances) -> CleanDecomposition:
    d = povm.dim
    qs = []
    for e in povm.effects:
        w, v = eig_hermitian(e, tol)
        top = v[:, w >= 1 - tol.eigval1_tol]
        qs.append(top @ top.conj().T)
    r = sum(qs)
    r_perp = np.eye(d) - r
    fs = [r_perp @ e @ r_perp for e in povm.effects]

    res = {
        "R_projection": op_norm(r @ r - r),
        "Q_orthogonality": max((op_norm(a @ b) for a, b in itertools.combinations(qs, 2)), default=0.0),
        "R_commutator": max(op_norm(r @ e - e @ r) for e in povm.effects),
        "reconstruction": max(op_norm(e - q - f) for e, q, f in zip(povm.effects, qs, fs)),
        "RMR_projection": max(op_norm((r @ e @ r) @ (r @ e @ r) - r @ e @ r) for e in povm.effects),
    }
    # The eigenvalue-1 threshold lets eigenvalues 1 - eigval1_tol count as 1;
    # the decomposition then only closes to that accuracy.
    limits = {
        "R_projection": tol.herm_tol * 2,
        "Q_orthogonality": tol.herm_tol * 2,
        "R_commutator": max(tol.herm_tol, tol.eigval1_tol) * 2,
        "reconstruction": max(tol.id_tol, tol.eigval1_tol) * np.sqrt(d),
        "RMR_projection": max(tol.herm_tol, tol.eigval1_tol) * 2,
    }
    failed = [k for k in res if res[k] > limits[k]]
    empty = [povm.labels[i] for i, q in enumerate(qs) if op_norm(q) < 0.5]
    if failed or empty:
        detail = ", ".join(f"{k}={res[k]:.3e}" for k in failed)
        if empty:
            detail += f" empty PVM part for outcomes {empty}"
        raise DecompositionResidual(f"clean decomposition does not close: {detail}")
    return CleanDecomposition(povm.labels, r, tuple(qs), tuple(fs), res)


def certify_preprocessing_clean(
    povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL
) -> tuple[bool, CleanDecomposition | None]:
    """Pre-processing cleanness, equivalent to the eigenvalue-1 property.

    On success also returns the decomposition into a PVM part on ``R C^d``
    and a remainder on its orthogonal complement.
    """
    if not certify_eigenvalue1(povm, tol):
        return False, None
    return True, _build_clean_decomposition(povm, tol)


# -- IC within pure states: witness searches --------------------------------


@dataclass(frozen=True, eq=False)
class IcPureWitness:
    """Nonzero ``phi, psi`` with ``<psi|M_i|phi> ~ 0`` for every outcome."""

    phi: np.ndarray
    psi: np.ndarray
    residual: float

    def as_dict(self) -> dict:
        return {"phi": _encode_vec(self.phi), "psi": _encode_vec(self.psi), "residual": self.residual}


@dataclass(frozen=True, eq=False)
class WitnessSearch:
    witness: IcPureWitness | None
    best_residual: float
    starts: int
    iterations: int
    seed: object
    witness_tol: float

    @property
    def status(self) -> str:
        return "proven_false" if self.witness is not None else "unknown"

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "witness": None if self.witness is None else self.witness.as_dict(),
            "best_residual": self.best_residual,
            "starts": self.starts,
            "iterations": self.iterations,
            "seed": _jsonable_seed(self.seed),
            "witness_tol": self.witness_tol,
        }


def _encode_vec(v: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in v]


def _jsonable_seed(seed):
    return seed if isinstance(seed, (int, type(None))) else repr(seed)


def _random_unit(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def _pure_witness_descent(effects: np.ndarray, phi: np.ndarray, iterations: int, target: float):
    """Alternating exact minimisation of ``sum_i |<psi|M_i|phi>|^2`` over unit ``phi`` and ``psi``.

    With ``phi`` fixed the optimal ``psi`` is the left singular vector of the
    smallest singular value of ``A = [M_1 phi ... M_N phi]``; with ``psi``
    fixed the optimal ``phi`` is the lowest eigenvector of
    ``sum_i M_i |psi><psi| M_i``.  Each half-step cannot increase the
    objective.
    """
    best = (np.inf, phi, phi)
    used = 0
    for used in range(1, iterations + 1):
        a = (effects @ phi).T  # d x N
        u, s, _ = np.linalg.svd(a, full_matrices=True)
        psi = u[:, -1]
        resid = float(np.max(np.abs(psi.conj() @ a)))
        if resid < best[0]:
            best = (resid, phi, psi)
        if resid <= target:
            break
        b = effects @ psi  # rows: M_i psi
        h = b.T @ b.conj()  # sum_i M_i psi psi* M_i
        w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
        phi = v[:, 0]
    return best[0], best[1], best[2], used


def ic_pure_witness(
    povm: DiscretePovm,
    budget: int = DEFAULT_STARTS * DEFAULT_ITERATIONS,
    *,
    seed=DEFAULT_SEED,
    starts: int = DEFAULT_STARTS,
    max_iter: int = DEFAULT_ITERATIONS,
    witness_tol: float = 1e-10,
    parallel: bool = False,
) -> WitnessSearch:
    """Search for ``phi, psi`` proving that ``povm`` is not IC within pure states.

    If ``<psi|M_i|phi> = 0`` for all ``i`` then ``phi + e^{it} psi`` give the
    same statistics for every ``t``, and ``psi`` is orthogonal to ``phi``
    because the effects sum to the identity.  ``budget`` caps the total
    number of descent iterations across all starts.  Starts use independent
    child streams of ``seed`` and the best start wins, ties going to the lower
    start index, so the outcome does not depend on ``parallel``.
    """
    d = povm.dim
    if d < 2:
        raise ValueError("pure-state witnesses need dimension >= 2")
    n_starts = max(1, min(starts, budget // max(1, max_iter)))
    per_start = max(1, min(max_iter, budget // n_starts))
    children = np.random.SeedSequence(seed if isinstance(seed, int) else None).spawn(n_starts)
    effects = np.ascontiguousarray(povm.effects)
    target = witness_tol

    def run(k: int):
        rng = np.random.default_rng(children[k])
        return _pure_witness_descent(effects, _random_unit(rng, d), per_start, target)

    results = []
    if parallel:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(run, range(n_starts)))
    else:
        for k in range(n_starts):
            results.append(run(k))
            if results[-1][0] <= target:
                break
    best_k = min(range(len(results)), key=lambda k: (results[k][0], k))
    resid, phi, psi, _ = results[best_k]
    total = sum(r[3] for r in results)
    witness = IcPureWitness(phi, psi, resid) if resid <= target else None
    return WitnessSearch(witness, resid, len(results), total, seed, witness_tol)


@dataclass(frozen=True, eq=False)
class ZwWitness:
    """Phases ``w`` and unit ``phi`` with ``||sum_i w_i M_i phi|| ~ 1`` and ``phi`` not phase-aligned."""

    phases: np.ndarray
    phi: np.ndarray
    norm: float

    def as_dict(self) -> dict:
        return {"phases": _encode_vec(self.phases), "phi": _encode_vec(self.phi), "norm": self.norm}


@dataclass(frozen=True, eq=False)
class ZwSearch:
    witness: ZwWitness | None
    candidates: int
    best_norm: float
    seed: object

    @property
    def status(self) -> str:
        return "proven_false" if self.witness is not None else "unknown"

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "witness": None if self.witness is None else self.witness.as_dict(),
            "candidates": self.candidates,
            "best_norm": self.best_norm,
            "seed": _jsonable_seed(self.seed),
        }


def _phase_aligned(phases: np.ndarray, coeffs: np.ndarray, tol: float) -> bool:
    support = np.abs(coeffs) > tol
    if support.sum() <= 1:
        return True
    w = phases[support]
    return bool(np.max(np.abs(w - w[0])) <= tol)


def _phase_candidates(n: int, budget: int, rng: np.random.Generator):
    # Sign patterns first (w_1 fixed to 1, global phase is irrelevant), then random phases.
    emitted = 0
    if n <= 16:
        for signs in itertools.product((1.0, -1.0), repeat=n - 1):
            if emitted >= budget:
                return
            if all(s == 1.0 for s in signs):
                continue
            yield np.array((1.0, *signs), dtype=complex)
            emitted += 1
    while emitted < budget:
        theta = rng.uniform(0, 2 * np.pi, n)
        theta[0] = 0.0
        yield np.exp(1j * theta)
        emitted += 1


def zw_falsifier(
    povm: DiscretePovm,
    samples: int = 16,
    budget: int = 10_000,
    *,
    seed=DEFAULT_SEED,
    tol: Tolerances = DEFAULT_TOL,
) -> ZwSearch:
    """Look for phases ``w`` making ``Z_w = sum_i w_i M_i`` norm-preserving on a non-aligned vector.

    Only for rank-1 POVMs.  A vector ``phi`` is aligned with ``w`` when
    ``w_i`` is the same for every outcome with ``<d_i|phi> != 0``; aligned
    vectors are excluded since they are fixed by ``Z_w`` up to a phase anyway.
    For each of at most ``budget`` phase vectors the right singular vectors
    of ``Z_w`` with singular value ``>= 1 - eigval1_tol`` are collected and
    ``samples`` random combinations of them tried, alongside the vectors
    themselves.  A hit proves the POVM is not IC within pure states.
    """
    if not certify_rank1(povm, tol):
        raise NotRank1("zw_falsifier needs a rank-1 POVM")
    n, d = povm.n_outcomes, povm.dim
    rng = np.random.default_rng(seed if isinstance(seed, int) else None)
    if n == 1:
        return ZwSearch(None, 0, 0.0, seed)
    dil = minimal_naimark(povm, tol)
    dvecs = np.stack([v[:, 0] for v in dil.vectors])  # (N, d)
    align_tol = 1e-6
    best = 0.0
    count = 0
    for w in _phase_candidates(n, budget, rng):
        count += 1
        z = np.einsum("n,nab->ab", w, povm.effects)
        _, s, vh = np.linalg.svd(z)
        best = max(best, float(s[0]))
        top = vh[s >= 1 - tol.eigval1_tol].conj()  # rows: right singular vectors
        if top.shape[0] == 0:
            continue
        trials = list(top)
        for _ in range(samples):
            c = rng.standard_normal(top.shape[0]) + 1j * rng.standard_normal(top.shape[0])
            trials.append(c @ top)
        for phi in trials:
            phi = phi / np.linalg.norm(phi)
            norm = float(np.linalg.norm(z @ phi))
            if norm < 1 - tol.eigval1_tol:
                continue
            coeffs = dvecs.conj() @ phi
            if not _phase_aligned(w, coeffs, align_tol):
                return ZwSearch(ZwWitness(w, phi, norm), count, best, seed)
    return ZwSearch(None, count, best, seed)


# -- aggregate report --------------------------------------------------------


@dataclass(eq=False)
class CertificateReport:
    labels: tuple[str, ...]
    dim: int
    n_outcomes: int
    rank1: bool
    postprocessing_clean: bool
    informationally_complete: bool
    ic_pure: str
    extreme: bool
    norm1: bool
    eigenvalue1: bool
    preprocessing_clean: bool
    regular: bool
    commutative: bool
    residuals: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    decomposition: CleanDecomposition | None = None
    tolerances: dict = field(default_factory=dict)
    seed: object = None

    def check_consistency(self) -> None:
        problems = []
        if self.postprocessing_clean != self.rank1:
            problems.append("post-processing cleanness differs from rank-1")
        if self.preprocessing_clean != self.eigenvalue1:
            problems.append("pre-processing cleanness differs from eigenvalue-1")
        if self.norm1 != self.eigenvalue1:
            problems.append("norm-1 differs from eigenvalue-1")
        d2 = self.dim**2
        if self.extreme and self.informationally_complete and not (self.rank1 and self.n_outcomes == d2):
            problems.append("extreme and IC but not rank-1 with N = d^2")
        if self.informationally_complete and self.n_outcomes < d2:
            problems.append("IC with fewer than d^2 outcomes")
        if self.extreme and self.rank1 and self.n_outcomes > d2:
            problems.append("extreme rank-1 with more than d^2 outcomes")
        if self.eigenvalue1 and self.n_outcomes > self.dim:
            problems.append("eigenvalue-1 with more than d outcomes")
        if self.eigenvalue1 and self.informationally_complete and self.dim > 1:
            problems.append("eigenvalue-1 and IC")
        if self.informationally_complete and self.ic_pure == "proven_false":
            problems.append("IC but a pure-state witness was found")
        if problems:
            raise CertificateInconsistency("; ".join(problems))

    def as_dict(self) -> dict:
        out = {
            "dim": self.dim,
            "n_outcomes": self.n_outcomes,
            "outcomes": list(self.labels),
            "rank1": self.rank1,
            "postprocessing_clean": self.postprocessing_clean,
            "informationally_complete": self.informationally_complete,
            "ic_pure_states": self.ic_pure,
            "extreme": self.extreme,
            "norm1": self.norm1,
            "eigenvalue1": self.eigenvalue1,
            "preprocessing_clean": self.preprocessing_clean,
            "regular": self.regular,
            "commutative": self.commutative,
            "residuals": self.residuals,
            "witnesses": self.witnesses,
            "tolerances": self.tolerances,
            "seed": _jsonable_seed(self.seed),
        }
        if self.decomposition is not None:
            from .io import encode_matrix

            dec = self.decomposition
            out["decomposition"] = {
                "projection_R": encode_matrix(dec.projection_R),
                "pvm_part_E": {lab: encode_matrix(q) for lab, q in zip(dec.labels, dec.pvm_part_E)},
                "residual_part_F": {lab: encode_matrix(f) for lab, f in zip(dec.labels, dec.residual_part_F)},
                "residuals": dec.residuals,
            }
        else:
            out["decomposition"] = None
        return out


def full_report(
    povm: DiscretePovm,
    tol: Tolerances = DEFAULT_TOL,
    *,
    budget: int = DEFAULT_STARTS * DEFAULT_ITERATIONS,
    seed=DEFAULT_SEED,
    parallel: bool = False,
    search_witness: bool = True,
) -> CertificateReport:
    """Run every certificate and check the cross-entry implications."""
    d, n = povm.dim, povm.n_outcomes
    ranks = [numerical_rank(e, tol) for e in povm.effects]
    rank1 = all(r == 1 for r in ranks)
    deficiency = ic_deficiency(povm, tol)
    ic = deficiency == 0
    dil = minimal_naimark(povm, tol)
    ext_rank, ext_rows = extremality_rank(dil.vectors, tol)
    extreme = ext_rank == ext_rows
    n1 = norm1_check(povm, tol)
    clean, decomposition = (True, _build_clean_decomposition(povm, tol)) if n1.holds else (False, None)
    regular = is_regular(povm, tol)
    commutative, comm_norm = is_commutative(povm, tol)

    witnesses: dict = {}
    if ic:
        ic_pure = "implied_true"
    elif d >= 2 and search_witness:
        search = ic_pure_witness(povm, budget, seed=seed, parallel=parallel)
        witnesses["ic_pure"] = search.as_dict()
        ic_pure = search.status
    else:
        ic_pure = "unknown"

    report = CertificateReport(
        labels=povm.labels,
        dim=d,
        n_outcomes=n,
        rank1=rank1,
        postprocessing_clean=rank1,
        informationally_complete=ic,
        ic_pure=ic_pure,
        extreme=extreme,
        norm1=n1.holds,
        eigenvalue1=n1.holds,
        preprocessing_clean=clean,
        regular=regular,
        commutative=commutative,
        residuals={
            "effect_ranks": ranks,
            "ic_deficiency": deficiency,
            "extremality_rank": ext_rank,
            "extremality_dyads": ext_rows,
            "norm1": n1.as_dict(),
            "regularity_margin": regularity_margin(povm, tol),
            "max_commutator": comm_norm,
            "multiplicities": list(dil.multiplicities),
        },
        witnesses=witnesses,
        decomposition=decomposition,
        tolerances=tol.as_dict(),
        seed=seed,
    )
    report.check_consistency()
    return report
