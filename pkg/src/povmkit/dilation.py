"""Minimal diagonal Naimark dilations and maximal rank-1 refinements.

For ``M_i = sum_k lambda_ik |phi_ik><phi_ik|`` with ``lambda_ik > 0`` put
``d_ik = sqrt(lambda_ik) phi_ik``.  The isometry ``J = sum_ik |e_ik><d_ik|``
maps ``C^d`` into ``C^D`` with ``D = sum_i m_i``; the coordinate projection
``P_i`` onto the block ``{e_ik}_k`` then satisfies ``J* P_i J = M_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .numerics import DEFAULT_TOL, Tolerances, eig_hermitian, op_norm, phase_fix
from .observable import DiscretePovm

__all__ = [
    "NaimarkDilation",
    "Refinement",
    "effect_vectors",
    "minimal_naimark",
    "verify_dilation",
    "rank1_refinement",
    "refined_label",
]


def effect_vectors(effect: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray, float]:
    """Columns ``d_k = sqrt(lambda_k) phi_k`` of a PSD matrix, descending in ``lambda_k``.

    Eigenvalues at or below ``rank_rel_tol * d * lambda_max`` are discarded.
    Returns ``(vectors (d, m), eigenvalues (m,), cutoff)``.
    """
    w, v = eig_hermitian(effect, tol)
    # stable, so degenerate eigenvectors keep the solver's order
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    d = len(w)
    lam_max = max(float(w[0]), 0.0)
    cutoff = tol.rank_rel_tol * d * lam_max
    keep = w > cutoff
    w, v = w[keep], v[:, keep]
    cols = [phase_fix(v[:, k]) * np.sqrt(w[k]) for k in range(len(w))]
    vecs = np.stack(cols, axis=1) if cols else np.zeros((d, 0), dtype=complex)
    return vecs, w, cutoff


@dataclass(frozen=True, eq=False)
class NaimarkDilation:
    """Minimal dilation ``(C^D, J, P)`` of a POVM.

    ``vectors[i]`` is the ``d x m_i`` matrix whose columns are the ``d_ik``;
    the rows of ``isometry`` belonging to outcome ``i`` are
    ``blocks[i] = slice(offset_i, offset_i + m_i)`` and equal ``vectors[i]^*``.
    """

    labels: tuple[str, ...]
    multiplicities: tuple[int, ...]
    isometry: np.ndarray
    vectors: tuple[np.ndarray, ...]
    eigenvalues: tuple[np.ndarray, ...]
    cutoffs: tuple[float, ...]

    @property
    def dim(self) -> int:
        return self.isometry.shape[1]

    @property
    def total_dim(self) -> int:
        return self.isometry.shape[0]

    @property
    def blocks(self) -> tuple[slice, ...]:
        offsets = np.concatenate([[0], np.cumsum(self.multiplicities)])
        return tuple(slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:]))

    @property
    def block_index(self) -> dict[tuple[int, int], int]:
        """Row of ``J`` holding ``d_ik*``, keyed by ``(i, k)``."""
        out = {}
        for i, blk in enumerate(self.blocks):
            for k in range(self.multiplicities[i]):
                out[(i, k)] = blk.start + k
        return out

    def block_projection(self, i: int) -> np.ndarray:
        p = np.zeros((self.total_dim, self.total_dim), dtype=complex)
        blk = self.blocks[i]
        p[blk, blk] = np.eye(self.multiplicities[i])
        return p

    def block_pvm(self) -> DiscretePovm:
        return DiscretePovm.from_effects([self.block_projection(i) for i in range(len(self.labels))], self.labels)

    def embed(self, i: int, block: np.ndarray) -> np.ndarray:
        """``D x D`` matrix carrying ``block`` (``m_i x m_i``) in the diagonal slot of outcome ``i``."""
        out = np.zeros((self.total_dim, self.total_dim), dtype=complex)
        blk = self.blocks[i]
        out[blk, blk] = block
        return out

    def compress(self, i: int, block: np.ndarray) -> np.ndarray:
        """``J* embed_i(block) J``, computed without forming the ``D x D`` matrix."""
        v = self.vectors[i]
        return v @ block @ v.conj().T


def minimal_naimark(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> NaimarkDilation:
    """Build the minimal diagonal Naimark dilation of ``povm``.

    Outcomes keep their label order; inside a block the vectors are sorted by
    descending eigenvalue and each carries the phase convention of
    :func:`povmkit.numerics.phase_fix`.
    """
    vecs, eigs, cutoffs = [], [], []
    for e in povm.effects:
        v, w, c = effect_vectors(e, tol)
        vecs.append(v)
        eigs.append(w)
        cutoffs.append(c)
    mult = tuple(v.shape[1] for v in vecs)
    j = np.concatenate([v.conj().T for v in vecs], axis=0)
    for v in vecs:
        v.setflags(write=False)
    j.setflags(write=False)
    return NaimarkDilation(povm.labels, mult, j, tuple(vecs), tuple(eigs), tuple(cutoffs))


def verify_dilation(dil: NaimarkDilation, povm: DiscretePovm) -> float:
    """Largest of ``||J* P_i J - M_i||`` over ``i`` and ``||J* J - I||``."""
    j = dil.isometry
    if j.shape[1] != povm.dim or len(dil.multiplicities) != povm.n_outcomes:
        raise DimensionMismatch(
            f"dilation of {len(dil.multiplicities)} outcomes on C^{j.shape[1]} "
            f"vs POVM of {povm.n_outcomes} outcomes on C^{povm.dim}"
        )
    if sum(dil.multiplicities) != j.shape[0]:
        raise DimensionMismatch("block multiplicities do not match the isometry")
    worst = op_norm(j.conj().T @ j - np.eye(povm.dim))
    for i, blk in enumerate(dil.blocks):
        ji = j[blk]
        worst = max(worst, op_norm(ji.conj().T @ ji - povm.effects[i]))
    return worst


def refined_label(label: str, k: int) -> str:
    return f"{label}.{k + 1}"


@dataclass(frozen=True, eq=False)
class Refinement:
    refined: DiscretePovm
    parent_map: dict[str, str]
    dilation: NaimarkDilation

    def partition(self) -> dict[str, list[str]]:
        cells: dict[str, list[str]] = {}
        for child, parent in self.parent_map.items():
            cells.setdefault(parent, []).append(child)
        return cells


def rank1_refinement(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> Refinement:
    """Split every effect into its eigen-dyads ``|d_ik><d_ik|``.

    The refined outcome ``(i, k)`` is labelled ``"<label_i>.<k+1>"``.
    """
    dil = minimal_naimark(povm, tol)
    effects, labels, parent = [], [], {}
    for i, lab in enumerate(povm.labels):
        v = dil.vectors[i]
        for k in range(v.shape[1]):
            effects.append(np.outer(v[:, k], v[:, k].conj()))
            child = refined_label(lab, k)
            labels.append(child)
            parent[child] = lab
    refined = DiscretePovm.from_effects(effects, labels, tol=tol)
    return Refinement(refined, parent, dil)
