"""Monte-Carlo sampling of single and sequential measurements.

Randomness comes only from :class:`numpy.random.Generator` seeded with the
given integer (PCG64 bit generator), which produces the same stream on every
platform.  Outcomes are drawn by inverse CDF over the label order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .instrument import Instrument
from .numerics import DEFAULT_TOL, Tolerances
from .observable import DiscretePovm, State, outcome_distribution

__all__ = ["SimulationResult", "simulate", "simulate_sequential", "ZERO_BRANCH"]

# Branches below this probability are never drawn (no division by ~0).
ZERO_BRANCH = 1e-14


@dataclass(frozen=True, eq=False)
class SimulationResult:
    labels: tuple[str, ...]
    counts: np.ndarray
    n_shots: int
    seed: int
    analytic: np.ndarray

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_shots

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.frequencies - self.analytic)))

    def sigma(self) -> np.ndarray:
        """Binomial standard deviation of every frequency."""
        p = self.analytic
        return np.sqrt(p * (1 - p) / self.n_shots)

    def as_dict(self) -> dict:
        shape = self.counts.shape
        out = {
            "n_shots": self.n_shots,
            "seed": self.seed,
            "prng": "numpy PCG64",
            "max_deviation": self.max_deviation,
        }
        if len(shape) == 1:
            out["outcomes"] = list(self.labels)
            out["counts"] = [int(c) for c in self.counts]
            out["frequencies"] = [float(f) for f in self.frequencies]
            out["analytic"] = [float(p) for p in self.analytic]
        else:
            rows, cols = self.labels
            out["row_outcomes"], out["col_outcomes"] = list(rows), list(cols)
            out["counts"] = [[int(c) for c in r] for r in self.counts]
            out["frequencies"] = [[float(f) for f in r] for r in self.frequencies]
            out["analytic"] = [[float(p) for p in r] for r in self.analytic]
        return out


def _inverse_cdf(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    p = np.where(p < ZERO_BRANCH, 0.0, p)
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    # guard against u landing past a trailing run of zero-probability outcomes
    last = int(np.flatnonzero(p > 0)[-1])
    return np.minimum(idx, last)


def simulate(povm: DiscretePovm, state: State, n: int, seed: int, tol: Tolerances = DEFAULT_TOL) -> SimulationResult:
    if n < 1:
        raise ValueError("number of shots must be at least 1")
    p = outcome_distribution(povm, state, tol).probabilities
    rng = np.random.default_rng(seed)
    idx = _inverse_cdf(p, rng.random(n))
    counts = np.bincount(idx, minlength=povm.n_outcomes)
    return SimulationResult(povm.labels, counts, n, seed, p)


def simulate_sequential(
    instrument: Instrument,
    second: DiscretePovm,
    state: State,
    n: int,
    seed: int,
    tol: Tolerances = DEFAULT_TOL,
) -> SimulationResult:
    """Shots of "apply the instrument, then measure ``second`` on the normalised posterior".

    Each shot consumes two uniforms, ``u[k, 0]`` for the first outcome and
    ``u[k, 1]`` for the second.  Pair frequencies are compared with
    ``tr[rho J_i*(M'_j)]``.
    """
    if n < 1:
        raise ValueError("number of shots must be at least 1")
    if state.dim != instrument.input_dim:
        raise DimensionMismatch(f"state on C^{state.dim}, instrument expects C^{instrument.input_dim}")
    if second.dim != instrument.output_dim:
        raise DimensionMismatch(f"second POVM on C^{second.dim}, instrument outputs C^{instrument.output_dim}")
    n1, n2 = instrument.n_outcomes, second.n_outcomes
    first_p = np.array([np.trace(instrument.schrodinger(i, state.matrix)).real for i in range(n1)])
    first_p = np.clip(first_p, 0.0, None)
    cond = np.zeros((n1, n2))
    for i in range(n1):
        if first_p[i] < ZERO_BRANCH:
            continue
        post = State.from_matrix(instrument.schrodinger(i, state.matrix) / first_p[i], _loose(tol))
        cond[i] = outcome_distribution(second, post, _loose(tol)).probabilities
    analytic = first_p[:, None] * cond

    rng = np.random.default_rng(seed)
    u = rng.random((n, 2))
    first = _inverse_cdf(first_p, u[:, 0])
    second_idx = np.empty(n, dtype=int)
    for i in np.unique(first):
        sel = first == i
        second_idx[sel] = _inverse_cdf(cond[i], u[sel, 1])
    counts = np.zeros((n1, n2), dtype=int)
    np.add.at(counts, (first, second_idx), 1)
    return SimulationResult((instrument.labels, second.labels), counts, n, seed, analytic)


def _loose(tol: Tolerances) -> Tolerances:
    # posteriors are renormalised by small probabilities; allow for the amplified rounding
    return tol.with_overrides(id_tol=max(tol.id_tol, 1e-6), psd_tol=max(tol.psd_tol, 1e-6))
