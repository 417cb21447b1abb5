"""Instruments, sequential measurements and joint observables.

An instrument with outcomes ``i`` is stored as Kraus families ``A_is``
(each ``d_out x d_in``); its Heisenberg operations are
``J_i*(B) = sum_s A_is* B A_is`` and its Schrodinger operations
``J_i(rho) = sum_s A_is rho A_is*``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .certify import certify_extremality
from .dilation import NaimarkDilation, effect_vectors, minimal_naimark
from .errors import (
    BadStates,
    BlockResidual,
    DimensionMismatch,
    InvalidInstrument,
    InvalidPovm,
    InvalidState,
    MarginMismatch,
    NotExtreme,
    NotJointlyMeasurable,
)
from .numerics import DEFAULT_TOL, Tolerances, eig_hermitian, hermitize, op_norm, psd_sqrt
from .observable import DiscretePovm, State
from .process import KrausChannel

__all__ = [
    "Instrument",
    "JointObservable",
    "JointBlocks",
    "luders_instrument",
    "nuclear_instrument",
    "instrument_from_channels",
    "sequential_joint",
    "joint_to_blocks",
    "joint_to_sequential",
    "total_channel",
    "unique_joint_for_extreme",
    "BLOCK_RESIDUAL_TOL",
    "FEASIBILITY_TOL",
]

BLOCK_RESIDUAL_TOL = 1e-8
FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Instrument:
    labels: tuple[str, ...]
    kraus: tuple[np.ndarray, ...]  # per outcome: (S_i, d_out, d_in)

    @classmethod
    def from_kraus(
        cls, kraus: Sequence, labels: Sequence[str] | None = None, tol: Tolerances = DEFAULT_TOL
    ) -> "Instrument":
        ops = []
        for k in kraus:
            k = np.array(k, dtype=complex)
            if k.ndim == 2:
                k = k[None]
            if k.ndim != 3 or k.shape[0] == 0:
                raise InvalidInstrument(f"each outcome needs a nonempty (S, d_out, d_in) Kraus stack, got {k.shape}")
            k.setflags(write=False)
            ops.append(k)
        if not ops:
            raise InvalidInstrument("an instrument needs at least one outcome")
        shape = ops[0].shape[1:]
        if any(k.shape[1:] != shape for k in ops):
            raise DimensionMismatch("Kraus operators of different outcomes have different shapes")
        if labels is None:
            labels = [str(i + 1) for i in range(len(ops))]
        labels = tuple(str(x) for x in labels)
        if len(labels) != len(ops):
            raise DimensionMismatch(f"{len(labels)} labels for {len(ops)} outcomes")
        inst = cls(labels, tuple(ops))
        res = op_norm(sum(inst.effect(i) for i in range(len(ops))) - np.eye(inst.input_dim))
        if res > tol.id_tol * np.sqrt(inst.input_dim):
            raise InvalidInstrument(f"total channel is not unital (residual {res:.3e})")
        return inst

    @property
    def input_dim(self) -> int:
        return self.kraus[0].shape[2]

    @property
    def output_dim(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def n_outcomes(self) -> int:
        return len(self.kraus)

    def effect(self, i: int) -> np.ndarray:
        k = self.kraus[i]
        return np.einsum("sab,sac->bc", k.conj(), k)

    def induced_povm(self, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
        return DiscretePovm.from_effects([self.effect(i) for i in range(self.n_outcomes)], self.labels, tol=tol)

    def heisenberg(self, i: int, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        if b.shape != (self.output_dim, self.output_dim):
            raise DimensionMismatch(f"operator of shape {b.shape} on a {self.output_dim}-dim output")
        k = self.kraus[i]
        return np.einsum("sab,ac,scd->bd", k.conj(), b, k)

    def schrodinger(self, i: int, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.input_dim, self.input_dim):
            raise DimensionMismatch(f"state of shape {rho.shape} on a {self.input_dim}-dim input")
        k = self.kraus[i]
        return np.einsum("sab,bc,sdc->ad", k, rho, k.conj())


@dataclass(frozen=True, eq=False)
class JointObservable:
    """Effects ``N_ij`` on a product outcome grid; entries may vanish."""

    grid: np.ndarray  # (N, N', d, d)
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    @classmethod
    def from_grid(
        cls,
        grid,
        row_labels: Sequence[str] | None = None,
        col_labels: Sequence[str] | None = None,
        tol: Tolerances = DEFAULT_TOL,
    ) -> "JointObservable":
        g = np.array(grid, dtype=complex)
        if g.ndim != 4 or g.shape[2] != g.shape[3]:
            raise DimensionMismatch(f"joint grid must have shape (N, N', d, d), got {g.shape}")
        n, m, d, _ = g.shape
        row_labels = tuple(str(x) for x in (row_labels or [str(i + 1) for i in range(n)]))
        col_labels = tuple(str(x) for x in (col_labels or [str(j + 1) for j in range(m)]))
        if len(row_labels) != n or len(col_labels) != m:
            raise DimensionMismatch("label counts do not match the grid")
        flat = g.reshape(n * m, d, d)
        herm = max(op_norm(e - e.conj().T) for e in flat)
        if herm > tol.herm_tol * 2:
            raise InvalidPovm(f"joint effects are not Hermitian (residual {herm:.3e})")
        g = 0.5 * (g + g.conj().transpose(0, 1, 3, 2))
        mins = np.linalg.eigvalsh(g.reshape(n * m, d, d))[:, 0]
        if mins.min() < -tol.psd_tol * 2:
            raise InvalidPovm(f"joint effect with negative eigenvalue {mins.min():.3e}")
        total = op_norm(g.sum(axis=(0, 1)) - np.eye(d))
        if total > tol.id_tol * np.sqrt(d):
            raise InvalidPovm(f"joint effects do not sum to the identity (residual {total:.3e})")
        g.setflags(write=False)
        return cls(g, row_labels, col_labels)

    @property
    def dim(self) -> int:
        return self.grid.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape[:2]

    def first_margin_effects(self) -> np.ndarray:
        return self.grid.sum(axis=1)

    def second_margin_effects(self) -> np.ndarray:
        return self.grid.sum(axis=0)

    def first_margin(self, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
        return DiscretePovm.from_effects(self.first_margin_effects(), self.row_labels, drop_zero_effects=True, tol=tol)

    def second_margin(self, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
        return DiscretePovm.from_effects(self.second_margin_effects(), self.col_labels, drop_zero_effects=True, tol=tol)

    def flattened(self, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
        n, m, d, _ = self.grid.shape
        labels = [f"{a}|{b}" for a in self.row_labels for b in self.col_labels]
        return DiscretePovm.from_effects(self.grid.reshape(n * m, d, d), labels, drop_zero_effects=True, tol=tol)

    def max_difference(self, other: "JointObservable") -> float:
        if self.grid.shape != other.grid.shape:
            raise DimensionMismatch(f"grids of shape {self.grid.shape} and {other.grid.shape}")
        diff = self.grid - other.grid
        return max(op_norm(e) for e in diff.reshape(-1, self.dim, self.dim))


# -- construction of instruments --------------------------------------------


def luders_instrument(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """One Kraus operator ``sqrt(M_i)`` per outcome."""
    return Instrument.from_kraus([psd_sqrt(e, tol) for e in povm.effects], povm.labels, tol)


def nuclear_instrument(povm: DiscretePovm, posterior_states: Sequence, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Measure-and-prepare instrument ``J_i(rho) = tr[rho M_i] sigma_i``.

    Kraus operators are ``sqrt(mu_k) |u_k><d_il|`` from the spectral
    decompositions ``sigma_i = sum_k mu_k |u_k><u_k|`` and
    ``M_i = sum_l |d_il><d_il|``.
    """
    if len(posterior_states) != povm.n_outcomes:
        raise BadStates(f"{len(posterior_states)} posterior states for {povm.n_outcomes} outcomes")
    try:
        sigmas = [s if isinstance(s, State) else State.from_matrix(s, tol) for s in posterior_states]
    except InvalidState as exc:
        raise BadStates(str(exc)) from None
    d_out = sigmas[0].dim
    if any(s.dim != d_out for s in sigmas):
        raise BadStates("posterior states live on different dimensions")
    ops = []
    for e, sigma in zip(povm.effects, sigmas):
        vecs, _, _ = effect_vectors(e, tol)
        mu, u = eig_hermitian(sigma.matrix, tol)
        keep = mu > tol.rank_rel_tol * d_out * mu[-1]
        ks = [
            np.sqrt(mu[k]) * np.outer(u[:, k], vecs[:, l].conj())
            for k in np.flatnonzero(keep)
            for l in range(vecs.shape[1])
        ]
        ops.append(np.stack(ks))
    return Instrument.from_kraus(ops, povm.labels, tol)


def instrument_from_channels(povm: DiscretePovm, channels: Sequence, tol: Tolerances = DEFAULT_TOL) -> Instrument:
    """Instrument ``A_is = C_is sqrt(M_i)`` for Schrodinger channels with Kraus stacks ``C_i`` (``(S, d_out, d)``).

    Every instrument of ``povm`` arises this way for suitable channels.
    """
    if len(channels) != povm.n_outcomes:
        raise DimensionMismatch(f"{len(channels)} channels for {povm.n_outcomes} outcomes")
    ops = []
    for e, c in zip(povm.effects, channels):
        c = np.asarray(c, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        ops.append(c @ psd_sqrt(e, tol))
    return Instrument.from_kraus(ops, povm.labels, tol)


def total_channel(instrument: Instrument) -> KrausChannel:
    """Heisenberg channel ``sum_i J_i*``: observables on the output space to the input space."""
    return KrausChannel.from_kraus(np.concatenate(instrument.kraus, axis=0))


def sequential_joint(
    instrument: Instrument, second: DiscretePovm, tol: Tolerances = DEFAULT_TOL
) -> JointObservable:
    """Joint observable ``N_ij = J_i*(M'_j)`` of measuring the instrument and then ``second``."""
    if second.dim != instrument.output_dim:
        raise DimensionMismatch(f"second POVM on C^{second.dim}, instrument outputs C^{instrument.output_dim}")
    grid = np.stack(
        [np.stack([instrument.heisenberg(i, m) for m in second.effects]) for i in range(instrument.n_outcomes)]
    )
    return JointObservable.from_grid(grid, instrument.labels, second.labels, tol)


# -- joint <-> sequential ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointBlocks:
    """Blocks ``B_ij`` (``m_i x m_i``) with ``N_ij = J* embed_i(B_ij) J``."""

    dilation: NaimarkDilation
    blocks: tuple[tuple[np.ndarray, ...], ...]
    residuals: dict


def _check_first_margin(povm: DiscretePovm, joint: JointObservable, tol: Tolerances) -> None:
    if joint.dim != povm.dim or joint.shape[0] != povm.n_outcomes:
        raise MarginMismatch(
            f"joint of shape {joint.shape} on C^{joint.dim} vs POVM of {povm.n_outcomes} outcomes on C^{povm.dim}"
        )
    res = max(op_norm(a - b) for a, b in zip(joint.first_margin_effects(), povm.effects))
    if res > tol.id_tol * np.sqrt(povm.dim):
        raise MarginMismatch(f"first margin differs from the POVM by {res:.3e}")


def joint_to_blocks(
    povm: DiscretePovm,
    joint: JointObservable,
    tol: Tolerances = DEFAULT_TOL,
    *,
    residual_tol: float = BLOCK_RESIDUAL_TOL,
) -> JointBlocks:
    """Solve ``V_i B V_i* = N_ij`` for each block, ``V_i`` holding the ``d_ik`` as columns.

    ``V_i`` has independent columns (minimal dilation), so the least-squares
    solution ``B = V_i^+ N_ij (V_i^+)*`` is the unique candidate.  Each block
    is checked to be PSD, to reproduce ``N_ij`` and to sum to the identity
    over ``j``.
    """
    _check_first_margin(povm, joint, tol)
    dil = minimal_naimark(povm, tol)
    n, m = joint.shape
    blocks, recon, psd_worst, sum_worst = [], 0.0, 0.0, 0.0
    for i in range(n):
        v = dil.vectors[i]
        vp = np.linalg.pinv(v)
        row = []
        for j in range(m):
            b = hermitize(vp @ joint.grid[i, j] @ vp.conj().T)
            recon = max(recon, op_norm(v @ b @ v.conj().T - joint.grid[i, j]))
            psd_worst = min(psd_worst, float(np.linalg.eigvalsh(b)[0]))
            row.append(b)
        sum_worst = max(sum_worst, op_norm(sum(row) - np.eye(v.shape[1])))
        blocks.append(tuple(row))
    residuals = {"reconstruction": recon, "min_block_eigenvalue": psd_worst, "block_sum": sum_worst}
    if recon > residual_tol:
        raise BlockResidual(f"joint is not realisable on the dilation: reconstruction residual {recon:.3e}")
    if psd_worst < -tol.psd_tol * 2 or sum_worst > max(tol.id_tol, residual_tol):
        raise BlockResidual(f"blocks are not a normalised POVM: {residuals}")
    return JointBlocks(dil, tuple(blocks), residuals)


def joint_to_sequential(
    povm: DiscretePovm,
    joint: JointObservable,
    tol: Tolerances = DEFAULT_TOL,
    *,
    residual_tol: float = BLOCK_RESIDUAL_TOL,
) -> tuple[Instrument, DiscretePovm]:
    """Realise ``joint`` as an instrument of ``povm`` followed by the basis PVM on ``C^N'``.

    ``J_i*(B) = J* embed_i(sum_j <e_j|B|e_j> B_ij) J`` with Kraus operators
    ``|e_j><V_i b|`` for the eigen-vectors ``b`` of each block ``B_ij``.
    """
    jb = joint_to_blocks(povm, joint, tol, residual_tol=residual_tol)
    n, m = joint.shape
    dil = jb.dilation
    ops = []
    for i in range(n):
        v = dil.vectors[i]
        ks = []
        for j in range(m):
            bvecs, _, _ = effect_vectors(jb.blocks[i][j], tol)
            e_j = np.zeros(m, dtype=complex)
            e_j[j] = 1.0
            for col in (v @ bvecs).T:
                ks.append(np.outer(e_j, col.conj()))
        if not ks:
            ks.append(np.zeros((m, povm.dim), dtype=complex))
        ops.append(np.stack(ks))
    # normalisation is checked below against the block residual, not id_tol
    inst = Instrument(povm.labels, tuple(ops))
    for k in inst.kraus:
        k.setflags(write=False)
    basis = DiscretePovm.from_effects(np.eye(m, dtype=complex)[:, :, None] * np.eye(m)[:, None, :], joint.col_labels)
    worst = 0.0
    for i in range(n):
        worst = max(worst, op_norm(inst.effect(i) - povm.effects[i]))
        for j in range(m):
            worst = max(worst, op_norm(inst.heisenberg(i, basis.effects[j]) - joint.grid[i, j]))
    if worst > residual_tol:
        raise BlockResidual(f"sequential realisation misses the joint by {worst:.3e}")
    return inst, basis


def _herm_basis(m: int) -> list[np.ndarray]:
    out = []
    for k in range(m):
        e = np.zeros((m, m), dtype=complex)
        e[k, k] = 1.0
        out.append(e)
    for k in range(m):
        for l in range(k + 1, m):
            e = np.zeros((m, m), dtype=complex)
            e[k, l] = e[l, k] = 1.0
            out.append(e)
            e = np.zeros((m, m), dtype=complex)
            e[k, l], e[l, k] = -1j, 1j
            out.append(e)
    return out


def unique_joint_for_extreme(
    povm: DiscretePovm,
    second: DiscretePovm,
    tol: Tolerances = DEFAULT_TOL,
    *,
    feasibility_tol: float = FEASIBILITY_TOL,
) -> JointObservable:
    """The joint observable of an extreme ``povm`` and ``second``, from the margins alone.

    For extreme ``povm`` the map ``(B_i)_i -> sum_i J* embed_i(B_i) J`` on
    block-diagonal Hermitian matrices is injective, so each column ``j`` is
    fixed by ``second_j`` through a real least-squares solve.  The candidate
    is accepted if it reproduces ``second`` and the blocks are PSD and
    normalised within ``feasibility_tol``; otherwise the pair is not jointly
    measurable.
    """
    if not certify_extremality(povm, tol):
        raise NotExtreme("unique joint reconstruction needs an extreme first observable")
    if second.dim != povm.dim:
        raise DimensionMismatch(f"observables act on C^{povm.dim} and C^{second.dim}")
    dil = minimal_naimark(povm, tol)
    d = povm.dim
    columns, owners = [], []
    for i, v in enumerate(dil.vectors):
        for h in _herm_basis(v.shape[1]):
            img = v @ h @ v.conj().T
            columns.append(np.concatenate([img.real.ravel(), img.imag.ravel()]))
            owners.append((i, h))
    design = np.array(columns).T  # (2 d^2, unknowns)
    rhs = np.array([np.concatenate([e.real.ravel(), e.imag.ravel()]) for e in second.effects]).T
    coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)

    n, m = povm.n_outcomes, second.n_outcomes
    grid = np.zeros((n, m, d, d), dtype=complex)
    blocks = [[np.zeros((mi, mi), dtype=complex) for _ in range(m)] for mi in dil.multiplicities]
    for (i, h), row in zip(owners, coef):
        for j in range(m):
            blocks[i][j] = blocks[i][j] + row[j] * h
    min_eig, sum_res = 0.0, 0.0
    for i, v in enumerate(dil.vectors):
        for j in range(m):
            min_eig = min(min_eig, float(np.linalg.eigvalsh(blocks[i][j])[0]))
            grid[i, j] = v @ blocks[i][j] @ v.conj().T
        sum_res = max(sum_res, op_norm(sum(blocks[i]) - np.eye(v.shape[1])))
    margin_res = max(op_norm(a - b) for a, b in zip(grid.sum(axis=0), second.effects))
    if margin_res > feasibility_tol or min_eig < -feasibility_tol or sum_res > feasibility_tol:
        raise NotJointlyMeasurable(
            f"no joint observable: margin residual {margin_res:.3e}, "
            f"min block eigenvalue {min_eig:.3e}, block-sum residual {sum_res:.3e}"
        )
    return JointObservable.from_grid(grid, povm.labels, second.labels, tol)
