"""Classical post-processing and quantum pre-processing of POVMs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .certify import certify_rank1
from .dilation import effect_vectors
from .errors import (
    AbsoluteContinuityViolated,
    DimensionMismatch,
    InvalidKernel,
    NotPvm,
    NotRank1,
    NotUnital,
)
from .numerics import DEFAULT_TOL, Tolerances, eig_hermitian, is_projection, op_norm, phase_fix
from .observable import DiscretePovm, State

__all__ = [
    "MarkovMatrix",
    "KrausChannel",
    "ChannelReport",
    "KernelFit",
    "smear",
    "extract_kernel",
    "apply_channel",
    "pvm_preprocessing_channel",
    "validate_channel",
    "project_rows_to_simplex",
    "push_state",
    "SMEARING_THRESHOLD",
]

SMEARING_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class MarkovMatrix:
    """Row-stochastic matrix ``p[i, j]``: probability of reporting output ``j`` given input ``i``."""

    entries: np.ndarray
    output_labels: tuple[str, ...]

    @classmethod
    def from_array(
        cls, entries, output_labels: Sequence[str] | None = None, tol: Tolerances = DEFAULT_TOL
    ) -> "MarkovMatrix":
        p = np.array(entries, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise InvalidKernel(f"kernel must be a nonempty 2-d array, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise InvalidKernel("kernel has non-finite entries")
        if p.min() < -tol.id_tol:
            raise InvalidKernel(f"kernel has negative entry {p.min():.3e}")
        rows = np.abs(p.sum(axis=1) - 1.0)
        if rows.max() > tol.id_tol * p.shape[1]:
            raise InvalidKernel(f"kernel rows sum to 1 only within {rows.max():.3e}")
        if output_labels is None:
            output_labels = [str(j + 1) for j in range(p.shape[1])]
        output_labels = tuple(str(x) for x in output_labels)
        if len(output_labels) != p.shape[1]:
            raise DimensionMismatch(f"{len(output_labels)} labels for {p.shape[1]} kernel columns")
        p.setflags(write=False)
        return cls(p, output_labels)

    @classmethod
    def identity(cls, n: int, output_labels: Sequence[str] | None = None) -> "MarkovMatrix":
        return cls.from_array(np.eye(n), output_labels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __matmul__(self, other: "MarkovMatrix") -> "MarkovMatrix":
        return MarkovMatrix.from_array(self.entries @ other.entries, other.output_labels)


def smear(povm: DiscretePovm, kernel: MarkovMatrix | np.ndarray, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
    """``M'_j = sum_i p_ij M_i``; columns producing a zero effect are dropped with a warning."""
    if not isinstance(kernel, MarkovMatrix):
        kernel = MarkovMatrix.from_array(kernel, tol=tol)
    if kernel.shape[0] != povm.n_outcomes:
        raise DimensionMismatch(f"kernel has {kernel.shape[0]} rows for {povm.n_outcomes} outcomes")
    effects = np.einsum("ij,iab->jab", kernel.entries, povm.effects)
    return DiscretePovm.from_effects(effects, kernel.output_labels, drop_zero_effects=True, tol=tol)


class KernelFit(NamedTuple):
    kernel: MarkovMatrix
    residual: float
    is_smearing: bool
    iterations: int


def project_rows_to_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row onto the probability simplex (sort-based)."""
    n, m = x.shape
    u = -np.sort(-x, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, m + 1)
    cond = u - css / ind > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(x - theta[:, None], 0.0)


def _kernel_objective(p: np.ndarray, gram: np.ndarray, cross: np.ndarray) -> float:
    return float(np.sum(p * (gram @ p)) - 2.0 * np.sum(p * cross))


def extract_kernel(
    povm: DiscretePovm,
    second: DiscretePovm,
    tol: Tolerances = DEFAULT_TOL,
    *,
    max_iter: int = 10_000,
    step_tol: float = 1e-12,
    threshold: float = SMEARING_THRESHOLD,
) -> KernelFit:
    """Best row-stochastic ``p`` with ``second_j ~ sum_i p_ij M_i`` for a rank-1 ``povm``.

    Minimises ``sum_j ||second_j - sum_i p_ij M_i||_F^2`` over row-stochastic
    matrices by accelerated projected gradient, started from the projected
    unconstrained least-squares solution.  ``residual`` is the largest
    operator-norm mismatch over the columns; ``is_smearing`` compares it with
    ``threshold``.
    """
    if not certify_rank1(povm, tol):
        raise NotRank1("kernel extraction needs a rank-1 first observable")
    if second.dim != povm.dim:
        raise DimensionMismatch(f"observables act on C^{povm.dim} and C^{second.dim}")
    a = povm.effects.reshape(povm.n_outcomes, -1)
    b = second.effects.reshape(second.n_outcomes, -1)
    gram = (a.conj() @ a.T).real  # <M_i, M_k>
    cross = (a.conj() @ b.T).real  # <M_i, M''_j>

    p0, *_ = np.linalg.lstsq(gram, cross, rcond=None)
    p = project_rows_to_simplex(p0)
    lipschitz = 2.0 * float(np.linalg.eigvalsh(gram)[-1])
    y, t, p_prev = p.copy(), 1.0, p.copy()
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (gram @ y - cross)
        p_new = project_rows_to_simplex(y - grad / lipschitz)
        if np.max(np.abs(p_new - p_prev)) <= step_tol:
            p_prev = p_new
            break
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = p_new + ((t - 1.0) / t_new) * (p_new - p_prev)
        # restart momentum when the objective goes up
        if _kernel_objective(p_new, gram, cross) > _kernel_objective(p_prev, gram, cross):
            y, t_new = p_new.copy(), 1.0
        p_prev, t = p_new, t_new
    p = p_prev
    recon = np.einsum("ij,iab->jab", p, povm.effects)
    residual = max(op_norm(r) for r in recon - second.effects)
    kernel = MarkovMatrix.from_array(p, second.labels, tol)
    return KernelFit(kernel, float(residual), bool(residual <= threshold), it)


@dataclass(frozen=True, eq=False)
class ChannelReport:
    unital_residual: float
    threshold: float

    @property
    def unital(self) -> bool:
        return bool(self.unital_residual <= self.threshold)

    def as_dict(self) -> dict:
        return {"unital": self.unital, "unital_residual": self.unital_residual, "threshold": self.threshold}


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Heisenberg-picture channel ``B -> sum_s A_s* B A_s`` from ``d_in x d_in`` to ``d_out x d_out`` matrices.

    ``kraus`` has shape ``(S, d_in, d_out)``: each ``A_s`` maps ``C^d_out``
    (the system the resulting observable lives on) into ``C^d_in``.
    """

    kraus: np.ndarray

    @classmethod
    def from_kraus(cls, kraus) -> "KrausChannel":
        k = np.array(kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[0] == 0:
            raise DimensionMismatch(f"Kraus operators must be a nonempty (S, d_in, d_out) stack, got {k.shape}")
        if not np.all(np.isfinite(k)):
            raise DimensionMismatch("Kraus operators have non-finite entries")
        k.setflags(write=False)
        return cls(k)

    @property
    def input_dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def output_dim(self) -> int:
        return self.kraus.shape[2]

    def heisenberg(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        if b.shape != (self.input_dim, self.input_dim):
            raise DimensionMismatch(f"operator of shape {b.shape} for a channel on {self.input_dim}-dim input")
        return np.einsum("sab,ac,scd->bd", self.kraus.conj(), b, self.kraus)

    def schrodinger(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.output_dim, self.output_dim):
            raise DimensionMismatch(f"state of shape {rho.shape} for a channel with {self.output_dim}-dim domain")
        return np.einsum("sab,bc,sdc->ad", self.kraus, rho, self.kraus.conj())

    def __call__(self, b: np.ndarray) -> np.ndarray:
        return self.heisenberg(b)


def validate_channel(channel: KrausChannel, tol: Tolerances = DEFAULT_TOL) -> ChannelReport:
    """Unitality ``||sum A* A - I||``; complete positivity holds by the Kraus form."""
    total = np.einsum("sab,sac->bc", channel.kraus.conj(), channel.kraus)
    res = op_norm(total - np.eye(channel.output_dim))
    return ChannelReport(float(res), float(tol.id_tol * np.sqrt(channel.output_dim)))


def apply_channel(channel: KrausChannel, povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
    """Pre-process ``povm`` (on the channel's input space) into ``Phi(M'_i)`` on its output space."""
    if povm.dim != channel.input_dim:
        raise DimensionMismatch(f"POVM on C^{povm.dim}, channel expects C^{channel.input_dim}")
    report = validate_channel(channel, tol)
    if not report.unital:
        raise NotUnital(f"channel unitality residual {report.unital_residual:.3e}")
    effects = np.einsum("sab,nac,scd->nbd", channel.kraus.conj(), povm.effects, channel.kraus)
    return DiscretePovm.from_effects(effects, povm.labels, tol=tol)


def push_state(channel: KrausChannel, state: State, tol: Tolerances = DEFAULT_TOL) -> State:
    """Schrodinger image ``sum A rho A*`` of a state."""
    return State.from_matrix(channel.schrodinger(state.matrix), tol)


def pvm_preprocessing_channel(
    pvm: DiscretePovm, target: DiscretePovm, tol: Tolerances = DEFAULT_TOL
) -> KrausChannel:
    """Measure-and-prepare channel ``Phi'(B) = sum_i <e_i|B|e_i> M_i`` with ``Phi'(P_i) = M_i``.

    ``e_i`` is the first eigenvector of ``P_i`` at eigenvalue 1 (phase
    fixed); the Kraus operators are ``|e_i><d_ik|`` for the eigen-vectors
    ``d_ik`` of ``M_i``.  The outcome lists are matched by position.
    """
    if pvm.n_outcomes != target.n_outcomes:
        raise AbsoluteContinuityViolated(
            f"PVM has {pvm.n_outcomes} outcomes but target has {target.n_outcomes}; they must be index-aligned"
        )
    for lab, p in zip(pvm.labels, pvm.effects):
        if not is_projection(p, tol):
            raise NotPvm(f"effect {lab!r} is not a projection")
    kraus = []
    for i, (p, m) in enumerate(zip(pvm.effects, target.effects)):
        w, v = eig_hermitian(p, tol)
        if w[-1] < 0.5:
            if op_norm(m) > tol.id_tol:
                raise AbsoluteContinuityViolated(f"P_{i} = 0 but M_{i} != 0")
            continue
        e = phase_fix(v[:, -1])
        vecs, _, _ = effect_vectors(m, tol)
        for k in range(vecs.shape[1]):
            kraus.append(np.outer(e, vecs[:, k].conj()))
    channel = KrausChannel.from_kraus(kraus)
    worst = max(op_norm(channel.heisenberg(p) - m) for p, m in zip(pvm.effects, target.effects))
    if worst > tol.id_tol * np.sqrt(target.dim):
        raise AbsoluteContinuityViolated(f"channel reproduces the target only within {worst:.3e}")
    return channel
