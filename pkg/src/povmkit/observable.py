"""Discrete POVMs, states and outcome statistics."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BadPartition, DimensionMismatch, InvalidPovm, InvalidState, NotHermitian
from .numerics import DEFAULT_TOL, Tolerances, eig_hermitian, hermitian_residual, op_norm

__all__ = [
    "ZeroEffectWarning",
    "ValidationReport",
    "DiscretePovm",
    "State",
    "OutcomeDistribution",
    "validate",
    "outcome_distribution",
    "coarse_grain",
    "is_commutative",
    "is_regular",
    "regularity_margin",
    "subset_sums",
]

MAX_EXHAUSTIVE_OUTCOMES = 20


class ZeroEffectWarning(UserWarning):
    """Emitted when an operation drops effects that vanished numerically."""


@dataclass(frozen=True)
class ValidationReport:
    dim: int
    n_outcomes: int
    hermiticity_residual: float
    min_eigenvalues: tuple[float, ...]
    sum_residual: float
    zero_effects: tuple[int, ...]
    thresholds: dict[str, float] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return (
            self.hermiticity_residual <= self.thresholds["hermiticity"]
            and all(w >= -self.thresholds["psd"] for w in self.min_eigenvalues)
            and self.sum_residual <= self.thresholds["sum"]
            and not self.zero_effects
        )

    def problems(self) -> list[str]:
        out = []
        if self.hermiticity_residual > self.thresholds["hermiticity"]:
            out.append(f"effects not Hermitian (residual {self.hermiticity_residual:.3e})")
        bad = [i for i, w in enumerate(self.min_eigenvalues) if w < -self.thresholds["psd"]]
        if bad:
            out.append(f"effects {bad} not positive semidefinite")
        if self.sum_residual > self.thresholds["sum"]:
            out.append(f"effects do not sum to the identity (residual {self.sum_residual:.3e})")
        if self.zero_effects:
            out.append(f"effects {list(self.zero_effects)} are zero")
        return out

    def as_dict(self) -> dict:
        return {
            "valid": self.valid,
            "dim": self.dim,
            "n_outcomes": self.n_outcomes,
            "hermiticity_residual": self.hermiticity_residual,
            "min_eigenvalues": list(self.min_eigenvalues),
            "sum_residual": self.sum_residual,
            "zero_effects": list(self.zero_effects),
            "thresholds": dict(self.thresholds),
        }


def _stack_effects(effects) -> np.ndarray:
    arrs = [np.asarray(e, dtype=complex) for e in effects]
    if not arrs:
        raise DimensionMismatch("a POVM needs at least one effect")
    shape = arrs[0].shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionMismatch(f"effects must be square matrices, got shape {shape}")
    for a in arrs:
        if a.shape != shape:
            raise DimensionMismatch(f"effect shapes differ: {shape} vs {a.shape}")
    return np.stack(arrs)


def validate(effects, tol: Tolerances = DEFAULT_TOL) -> ValidationReport:
    """Per-invariant residuals for a family of effects (a POVM or raw matrices)."""
    if isinstance(effects, DiscretePovm):
        effects = effects.effects
    stack = _stack_effects(effects)
    n, d, _ = stack.shape
    norms = [op_norm(e) for e in stack]
    herm = max(hermitian_residual(e) / (1.0 + nrm) for e, nrm in zip(stack, norms))
    herm_stack = 0.5 * (stack + stack.conj().transpose(0, 2, 1))
    min_eigs = tuple(float(w[0]) / (1.0 + nrm) for w, nrm in zip(np.linalg.eigvalsh(herm_stack), norms))
    sum_res = op_norm(stack.sum(axis=0) - np.eye(d))
    zeros = tuple(i for i, nrm in enumerate(norms) if nrm <= tol.id_tol)
    thresholds = {"hermiticity": tol.herm_tol, "psd": tol.psd_tol, "sum": tol.id_tol * np.sqrt(d)}
    return ValidationReport(d, n, float(herm), min_eigs, float(sum_res), zeros, thresholds)


@dataclass(frozen=True, eq=False)
class DiscretePovm:
    """A finite-outcome POVM on ``C^dim``.

    Build instances with :meth:`from_effects`, which validates; the raw
    constructor trusts its arguments.
    """

    effects: np.ndarray  # (N, d, d) complex
    labels: tuple[str, ...]

    @classmethod
    def from_effects(
        cls,
        effects,
        labels: Sequence[str] | None = None,
        *,
        drop_zero_effects: bool = False,
        tol: Tolerances = DEFAULT_TOL,
    ) -> "DiscretePovm":
        stack = _stack_effects(effects)
        if labels is None:
            labels = [str(i + 1) for i in range(len(stack))]
        labels = tuple(str(x) for x in labels)
        if len(labels) != len(stack):
            raise DimensionMismatch(f"{len(labels)} labels for {len(stack)} effects")
        if len(set(labels)) != len(labels):
            raise InvalidPovm(f"duplicate outcome labels in {labels}")
        report = validate(stack, tol)
        if drop_zero_effects and report.zero_effects:
            keep = [i for i in range(len(stack)) if i not in report.zero_effects]
            warnings.warn(
                f"dropping zero effects {[labels[i] for i in report.zero_effects]}",
                ZeroEffectWarning,
                stacklevel=2,
            )
            stack = stack[keep]
            labels = tuple(labels[i] for i in keep)
            report = validate(stack, tol)
        if not report.valid:
            raise InvalidPovm("; ".join(report.problems()))
        stack = 0.5 * (stack + stack.conj().transpose(0, 2, 1))
        stack.setflags(write=False)
        return cls(stack, labels)

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]

    def __len__(self) -> int:
        return self.n_outcomes

    def __getitem__(self, label: str) -> np.ndarray:
        return self.effects[self.labels.index(label)]

    def relabel(self, labels: Sequence[str]) -> "DiscretePovm":
        return DiscretePovm.from_effects(self.effects, labels)

    def permute(self, order: Sequence[int]) -> "DiscretePovm":
        order = list(order)
        return DiscretePovm(self.effects[order], tuple(self.labels[i] for i in order))

    def __repr__(self) -> str:
        return f"DiscretePovm(dim={self.dim}, labels={list(self.labels)})"


@dataclass(frozen=True, eq=False)
class State:
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, rho, tol: Tolerances = DEFAULT_TOL) -> "State":
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DimensionMismatch(f"state must be a square matrix, got {rho.shape}")
        try:
            w = eig_hermitian(rho, tol).eigenvalues
        except NotHermitian as exc:
            raise InvalidState(str(exc)) from None
        if w[0] < -tol.psd_tol * (1.0 + abs(w[-1])):
            raise InvalidState(f"state has negative eigenvalue {w[0]:.3e}")
        tr = np.trace(rho)
        if abs(tr - 1.0) > tol.id_tol * max(1.0, np.sqrt(len(rho))):
            raise InvalidState(f"state trace is {tr.real:.12g}, expected 1")
        m = 0.5 * (rho + rho.conj().T)
        m.setflags(write=False)
        return cls(m)

    @classmethod
    def pure(cls, vector, tol: Tolerances = DEFAULT_TOL) -> "State":
        v = np.asarray(vector, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls.from_matrix(np.outer(v, v.conj()), tol)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "State":
        return cls.from_matrix(np.eye(dim) / dim)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class OutcomeDistribution:
    labels: tuple[str, ...]
    probabilities: np.ndarray
    clamped: tuple[int, ...] = ()
    max_imaginary: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, (float(p) for p in self.probabilities)))


def outcome_distribution(povm: DiscretePovm, state: State, tol: Tolerances = DEFAULT_TOL) -> OutcomeDistribution:
    """Born-rule probabilities ``Re tr[rho M_i]`` in label order.

    Values in ``[-id_tol, 0)`` are set to 0 and their indices recorded; the
    imaginary parts are checked against ``id_tol``.
    """
    if state.dim != povm.dim:
        raise DimensionMismatch(f"state has dim {state.dim}, POVM has dim {povm.dim}")
    # tr[rho M] = sum_ab rho_ab M_ba
    raw = np.einsum("ab,nba->n", state.matrix, povm.effects)
    max_imag = float(np.max(np.abs(raw.imag)))
    if max_imag > tol.id_tol:
        raise NotHermitian(f"probabilities have imaginary parts up to {max_imag:.3e}")
    p = raw.real.copy()
    if np.any(p < -tol.id_tol):
        raise InvalidPovm(f"negative probability {p.min():.3e}")
    clamped = tuple(int(i) for i in np.flatnonzero(p < 0))
    p[p < 0] = 0.0
    return OutcomeDistribution(povm.labels, p, clamped, max_imag)


def _normalize_partition(povm: DiscretePovm, partition) -> list[tuple[str, list[int]]]:
    index = {lab: i for i, lab in enumerate(povm.labels)}
    if isinstance(partition, Mapping):
        cells = [(str(k), list(v)) for k, v in partition.items()]
    else:
        cells = []
        for cell in partition:
            members = [cell] if isinstance(cell, str) else list(cell)
            cells.append(("+".join(str(m) for m in members), members))
    out, seen = [], set()
    for name, members in cells:
        idx = []
        for m in members:
            if m not in index:
                raise BadPartition(f"unknown outcome label {m!r}")
            if m in seen:
                raise BadPartition(f"outcome {m!r} appears in more than one cell")
            seen.add(m)
            idx.append(index[m])
        if not idx:
            raise BadPartition(f"cell {name!r} is empty")
        out.append((name, sorted(idx)))
    missing = set(povm.labels) - seen
    if missing:
        raise BadPartition(f"partition does not cover outcomes {sorted(missing)}")
    return out


def coarse_grain(povm: DiscretePovm, partition, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
    """Sum effects over the cells of a partition of the outcome labels.

    ``partition`` is either a mapping ``new_label -> iterable of old labels``
    or a sequence of label collections (new labels are the members joined
    with ``+``).  Member effects are added in their original label order.
    """
    cells = _normalize_partition(povm, partition)
    effects = []
    for _, idx in cells:
        acc = np.zeros_like(povm.effects[0])
        for i in idx:
            acc = acc + povm.effects[i]
        effects.append(acc)
    return DiscretePovm.from_effects(effects, [name for name, _ in cells], drop_zero_effects=True, tol=tol)


def parent_partition(parent_map: Mapping[str, str]) -> dict[str, list[str]]:
    """Invert a ``child -> parent`` label map into a partition, parents in first-seen order."""
    cells: dict[str, list[str]] = {}
    for child, parent in parent_map.items():
        cells.setdefault(parent, []).append(child)
    return cells


def is_commutative(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL) -> tuple[bool, float]:
    """Whether all effects commute pairwise; also returns the largest commutator norm."""
    worst = 0.0
    for a, b in itertools.combinations(povm.effects, 2):
        worst = max(worst, op_norm(a @ b - b @ a))
    scale = 1.0 + max(op_norm(e) for e in povm.effects) ** 2
    return worst <= tol.herm_tol * scale, worst


def subset_sums(effects: np.ndarray, chunk: int = 1 << 14) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(masks, sums)`` over all nonempty outcome subsets in chunks.

    ``masks`` is a boolean (k, N) array, ``sums`` the (k, d, d) matching
    effect sums.  Intended for N up to about 20.
    """
    n, d, _ = effects.shape
    flat = effects.reshape(n, d * d)
    total = 1 << n
    bits = 1 << np.arange(n)
    for start in range(1, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        masks = (codes[:, None] & bits[None, :]) != 0
        yield masks, (masks.astype(float) @ flat).reshape(-1, d, d)


def _effect_regularity(lmin: np.ndarray, lmax: np.ndarray) -> np.ndarray:
    return np.minimum(lmax - 0.5, 0.5 - lmin)


def regularity_margin(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL, *, subsets: bool = True) -> float:
    """Smallest ``min(lambda_max - 1/2, 1/2 - lambda_min)`` over the nontrivial effects M(X).

    With ``subsets=True`` (the default, feasible for N <= 20) every outcome
    subset X is inspected; otherwise only single outcomes.  Returns ``inf``
    when no nontrivial effect exists.
    """
    d = povm.dim
    worst = np.inf
    if subsets and povm.n_outcomes <= MAX_EXHAUSTIVE_OUTCOMES:
        batches = (s for _, s in subset_sums(povm.effects))
    else:
        batches = iter([povm.effects])
    for sums in batches:
        w = np.linalg.eigvalsh(0.5 * (sums + sums.conj().transpose(0, 2, 1)))
        is_zero = w[:, -1] <= tol.id_tol
        is_one = np.abs(w - 1.0).max(axis=1) <= tol.id_tol * np.sqrt(d)
        keep = ~(is_zero | is_one)
        if np.any(keep):
            worst = min(worst, float(_effect_regularity(w[keep, 0], w[keep, -1]).min()))
    return worst


def is_regular(povm: DiscretePovm, tol: Tolerances = DEFAULT_TOL, *, subsets: bool = True) -> bool:
    """Every nontrivial M(X) has spectrum strictly above and below 1/2.

    Strictness is enforced with a tie width of ``eigval1_tol``.
    """
    return regularity_margin(povm, tol, subsets=subsets) > tol.eigval1_tol
