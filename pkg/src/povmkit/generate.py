"""Concrete observables and seeded random families.

Every random generator takes an explicit ``seed`` (anything accepted by
:func:`numpy.random.default_rng`, i.e. PCG64) and never touches global state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InfeasibleRanks, InfeasibleRequest, SingularS
from .numerics import DEFAULT_TOL, Tolerances, dyad, ket, numerical_rank, psd_inv_sqrt
from .observable import DiscretePovm, State

__all__ = [
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "Example71Config",
    "example71_vector",
    "gen_example71",
    "gen_trine",
    "gen_intro_examples",
    "gen_basis_pvm",
    "gen_random_povm",
    "gen_random_pvm",
    "random_unitary",
    "random_state",
    "random_kernel",
    "random_channel_kraus",
    "as_rng",
]

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

TRINE_DIRECTIONS = (
    (1.0, 0.0, 0.0),
    (-0.5, np.sqrt(3) / 2, 0.0),
    (-0.5, -np.sqrt(3) / 2, 0.0),
)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# -- fixed examples ---------------------------------------------------------


def gen_trine() -> DiscretePovm:
    """Three effects ``(I + a_i . sigma) / 3`` with coplanar directions 120 degrees apart."""
    effects = [
        (np.eye(2) + ax * PAULI_X + ay * PAULI_Y + az * PAULI_Z) / 3.0 for ax, ay, az in TRINE_DIRECTIONS
    ]
    return DiscretePovm.from_effects(effects, ["1", "2", "3"])


def gen_basis_pvm(dim: int, labels: Sequence[str] | None = None) -> DiscretePovm:
    return DiscretePovm.from_effects([dyad(ket(i, dim)) for i in range(dim)], labels)


@dataclass(frozen=True)
class Example71Config:
    """Index set (1-based pairs) and positive weights for :func:`gen_example71`.

    ``index_set=None`` means the full grid; ``weights=None`` means ``1/d^2``
    for every pair.
    """

    d: int
    index_set: tuple[tuple[int, int], ...] | None = None
    weights: Mapping[tuple[int, int], float] | None = field(default=None, hash=False)

    def pairs(self) -> tuple[tuple[int, int], ...]:
        if self.index_set is None:
            return tuple((n, m) for n in range(1, self.d + 1) for m in range(1, self.d + 1))
        return tuple(self.index_set)

    def weight(self, pair: tuple[int, int]) -> float:
        if self.weights is None:
            return 1.0 / self.d**2
        return float(self.weights[pair])


def example71_vector(n: int, m: int, d: int) -> np.ndarray:
    """``|n>`` for n == m, ``|n> + |m>`` for n < m and ``|m> - i|n>`` for n > m (1-based)."""
    if not (1 <= n <= d and 1 <= m <= d):
        raise ValueError(f"index ({n}, {m}) outside 1..{d}")
    if n == m:
        return ket(n - 1, d)
    if n < m:
        return ket(n - 1, d) + ket(m - 1, d)
    return ket(m - 1, d) - 1j * ket(n - 1, d)


def gen_example71(config: Example71Config | int, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
    """Rank-1 POVM ``M_nm = p_nm S^{-1/2} |f_nm><f_nm| S^{-1/2}`` with ``S = sum p_nm |f_nm><f_nm|``.

    Outcome labels are ``"n,m"``.  Raises :class:`SingularS` when the chosen
    vectors do not span ``C^d``.
    """
    if isinstance(config, int):
        config = Example71Config(config)
    d = config.d
    pairs = config.pairs()
    if not pairs:
        raise SingularS("index set is empty")
    if len(set(pairs)) != len(pairs):
        raise ValueError("index set has repeated pairs")
    weights = [config.weight(p) for p in pairs]
    if any(not (w > 0 and np.isfinite(w)) for w in weights):
        raise ValueError("weights must be positive and finite")
    fs = np.stack([example71_vector(n, m, d) for n, m in pairs], axis=1)
    if numerical_rank(fs, tol) < d:
        raise SingularS(f"vectors of the index set span only a proper subspace of C^{d}")
    s = (fs * np.array(weights)) @ fs.conj().T
    s_inv_half = psd_inv_sqrt(s, tol)
    vecs = s_inv_half @ (fs * np.sqrt(weights))
    effects = [dyad(vecs[:, k]) for k in range(len(pairs))]
    return DiscretePovm.from_effects(effects, [f"{n},{m}" for n, m in pairs], tol=tol)


def gen_intro_examples() -> dict:
    """The small hand-built examples.

    ``c3_norm1``
        On ``C^3`` with basis ``|0>, |1>, |2>``: ``M_1 = |1><1| + 1/3 |0><0|``,
        ``M_2 = |2><2| + 2/3 |0><0|``.
    ``regular_not_norm1``
        On ``C^2``: ``M_1 = 1/3 |1><1| + 2/3 |2><2|`` and its complement.
    ``c2_joint_blocks``
        A :class:`povmkit.instrument.JointObservable` on ``C^2`` with first
        margin the basis PVM and second margin ``(1/2 |1><1| + |2><2|, 1/2 |1><1|)``.
    """
    from .instrument import JointObservable

    e = [dyad(ket(i, 3)) for i in range(3)]
    c3 = DiscretePovm.from_effects([e[1] + e[0] / 3.0, e[2] + 2.0 * e[0] / 3.0], ["1", "2"])
    p = [dyad(ket(i, 2)) for i in range(2)]
    reg = DiscretePovm.from_effects([p[0] / 3.0 + 2.0 * p[1] / 3.0, 2.0 * p[0] / 3.0 + p[1] / 3.0], ["1", "2"])
    grid = np.array([[p[0] / 2.0, p[0] / 2.0], [p[1], np.zeros((2, 2))]], dtype=complex)
    joint = JointObservable.from_grid(grid, ["1", "2"], ["1", "2"])
    return {"c3_norm1": c3, "c2_joint_blocks": joint, "regular_not_norm1": reg}


# -- random families --------------------------------------------------------


def random_unitary(dim: int, seed=None) -> np.ndarray:
    """Haar-distributed unitary (QR of a complex Ginibre matrix with phase correction)."""
    rng = as_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def gen_random_povm(
    d: int,
    n: int,
    ranks: int | Sequence[int] = 1,
    seed=None,
    tol: Tolerances = DEFAULT_TOL,
) -> DiscretePovm:
    """Random POVM with prescribed effect ranks.

    Draws ``G_i = W_i W_i*`` with complex Ginibre ``W_i`` of shape
    ``d x r_i``, sets ``S = sum G_i`` and returns
    ``M_i = S^{-1/2} G_i S^{-1/2}``.  Requires ``sum r_i >= d``.
    """
    if isinstance(ranks, (int, np.integer)):
        ranks = [int(ranks)] * n
    ranks = [int(r) for r in ranks]
    if len(ranks) != n:
        raise InfeasibleRanks(f"{len(ranks)} ranks for {n} outcomes")
    if any(r < 1 or r > d for r in ranks):
        raise InfeasibleRanks(f"ranks must lie in 1..{d}, got {ranks}")
    if sum(ranks) < d:
        raise InfeasibleRanks(f"ranks {ranks} sum to less than the dimension {d}")
    rng = as_rng(seed)
    ws = [_ginibre(rng, d, r) for r in ranks]
    s = sum(w @ w.conj().T for w in ws)
    s_inv_half = psd_inv_sqrt(s, tol)
    vs = [s_inv_half @ w for w in ws]
    return DiscretePovm.from_effects([v @ v.conj().T for v in vs], tol=tol)


def gen_random_pvm(d: int, multiplicities: Sequence[int], seed=None, tol: Tolerances = DEFAULT_TOL) -> DiscretePovm:
    """Columns of a Haar unitary grouped into projections of the given ranks (must sum to d)."""
    multiplicities = [int(m) for m in multiplicities]
    if any(m < 1 for m in multiplicities) or sum(multiplicities) != d:
        raise InfeasibleRanks(f"PVM multiplicities {multiplicities} must be positive and sum to {d}")
    u = random_unitary(d, seed)
    offsets = np.concatenate([[0], np.cumsum(multiplicities)])
    effects = [u[:, a:b] @ u[:, a:b].conj().T for a, b in zip(offsets[:-1], offsets[1:])]
    return DiscretePovm.from_effects(effects, tol=tol)


def random_state(d: int, rank: int | None = None, seed=None) -> State:
    """Random density matrix ``W W* / tr`` with ``W`` Ginibre of shape ``d x rank``."""
    rng = as_rng(seed)
    w = _ginibre(rng, d, d if rank is None else rank)
    rho = w @ w.conj().T
    return State.from_matrix(rho / np.trace(rho).real)


def random_kernel(n_in: int, n_out: int, seed=None, *, sparsity: float = 0.0) -> np.ndarray:
    """Row-stochastic ``n_in x n_out`` matrix; ``sparsity`` zeroes that fraction of entries (keeping one per row)."""
    rng = as_rng(seed)
    k = rng.random((n_in, n_out))
    if sparsity > 0:
        mask = rng.random((n_in, n_out)) < sparsity
        mask[np.arange(n_in), rng.integers(0, n_out, n_in)] = False
        k[mask] = 0.0
    return k / k.sum(axis=1, keepdims=True)


def random_channel_kraus(d_in: int, d_out: int, n_kraus: int, seed=None) -> np.ndarray:
    """Kraus operators ``(n_kraus, d_out, d_in)`` of a random channel, cut from a Haar isometry.

    Needs ``n_kraus * d_out >= d_in`` for the isometry to exist.
    """
    if n_kraus * d_out < d_in:
        raise InfeasibleRequest(f"{n_kraus} Kraus operators into C^{d_out} cannot form an isometry on C^{d_in}")
    rng = as_rng(seed)
    z = _ginibre(rng, n_kraus * d_out, d_in)
    q, r = np.linalg.qr(z)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return q.reshape(n_kraus, d_out, d_in)


def random_povm_corpus(seed, count: int, *, max_dim: int = 8, max_outcomes: int = 10) -> Iterable[DiscretePovm]:
    """Mixed corpus of random POVMs, PVMs and structured examples for property sweeps."""
    rng = as_rng(seed)
    produced = 0
    while produced < count:
        d = int(rng.integers(1, max_dim + 1))
        kind = rng.random()
        if kind < 0.2:
            parts = _random_composition(rng, d, max_outcomes)
            yield gen_random_pvm(d, parts, rng)
        else:
            n = int(rng.integers(1, max_outcomes + 1))
            if kind < 0.55:
                ranks = [1] * n
            else:
                ranks = [int(r) for r in rng.integers(1, d + 1, n)]
            if sum(ranks) < d:
                ranks[int(rng.integers(n))] = d
            yield gen_random_povm(d, n, ranks, rng)
        produced += 1


def _random_composition(rng: np.random.Generator, d: int, max_parts: int) -> list[int]:
    parts = int(rng.integers(1, min(d, max_parts) + 1))
    cuts = sorted(rng.choice(np.arange(1, d), size=parts - 1, replace=False)) if parts > 1 else []
    edges = [0, *cuts, d]
    return [int(b - a) for a, b in zip(edges[:-1], edges[1:])]
