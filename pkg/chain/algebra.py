"""Multistep products, reverse-time kernels and homogeneity/stationarity/reversibility diagnostics."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from chain.core import ChainModel, ChainError, Distribution, TimeIndex, WindowError, marginals
from chain.helpers import max_abs_difference, read_only
from settings import tolerances

LOGGER = logging.getLogger('chain.algebra')


class InconsistentMarginalsError(ChainError):
    pass


@dataclass(frozen=True, eq=False)
class ProductMatrix:
    """P_st = P_s P_{s+1} ... P_{t-1}, an N_s x N_t stochastic matrix"""

    s: TimeIndex
    t: TimeIndex
    matrix: np.ndarray

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def row_defect(self) -> float:
        return float(np.abs(self.matrix.sum(axis=1) - 1).max())


@dataclass(frozen=True, eq=False)
class ReverseKernel:
    """
    Backward transition probabilities P(Z_n = i | Z_{n+1} = j), stored as an N_{n+1} x N_n matrix.

    Rows of states j with P(Z_{n+1} = j) = 0 are undefined: they hold NaN and are False in support_mask.
    """

    n: TimeIndex
    matrix: np.ndarray
    support_mask: np.ndarray


@dataclass(frozen=True)
class ReversalReport:
    is_homogeneous: bool
    is_stationary: bool
    reverse_is_homogeneous: bool
    is_reversible: bool


def product(model: ChainModel, s: TimeIndex, t: TimeIndex) -> ProductMatrix:
    model.check_window(s, t)
    acc = model.matrix(s).entries
    for n in range(s + 1, t):
        acc = acc @ model.matrix(n).entries
    return ProductMatrix(s, t, read_only(acc))


def backward_products(model: ChainModel, t: TimeIndex, depth: int) -> Iterator[ProductMatrix]:
    """Yields P_{t-1,t}, P_{t-2,t}, ..., P_{t-depth,t}, each obtained from the previous one by one multiplication"""
    model.check_window(t - depth, t)
    acc: Optional[np.ndarray] = None
    for s in range(t - 1, t - depth - 1, -1):
        p = model.matrix(s).entries
        acc = p if acc is None else p @ acc
        yield ProductMatrix(s, t, read_only(acc))


def reverse_matrix(entries: np.ndarray, m_from: np.ndarray, m_to: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bayes reversal of a transition matrix.

    :return: the N_to x N_from matrix with (j, i) entry p(i, j) m_from(i) / m_to(j) and the mask of rows j
        with m_to(j) > 0. Unsupported rows are NaN.
    """
    mask = m_to > 0
    joint = entries * m_from[:, None]
    res = np.full((entries.shape[1], entries.shape[0]), np.nan)
    res[mask] = joint.T[mask] / m_to[mask][:, None]
    return res, mask


def _marginals_by_time(seq: Sequence[Distribution]) -> Dict[TimeIndex, Distribution]:
    return {m.time: m for m in seq}


def reverse_kernel(model: ChainModel, marginal_seq: Sequence[Distribution], n: TimeIndex,
                   tol: Optional[float] = None) -> ReverseKernel:
    tol = tolerances.comparison if tol is None else tol
    by_time = _marginals_by_time(marginal_seq)
    if n not in by_time or n + 1 not in by_time:
        raise WindowError(f'Marginals at times {n} and {n + 1} are required')
    m_n, m_next = by_time[n], by_time[n + 1]
    p = model.matrix(n)
    residual = max_abs_difference(m_n.probs @ p.entries, m_next.probs)
    if residual > tol:
        raise InconsistentMarginalsError(f'Marginals at times {n} and {n + 1} are inconsistent with the matrix: '
                                         f'residual {residual:.3g}')
    matrix, mask = reverse_matrix(p.entries, m_n.probs, m_next.probs)
    if not mask.all():
        LOGGER.warning(f'Reverse kernel at time {n}: {int((~mask).sum())} rows undefined (zero probability)')
    return ReverseKernel(n, read_only(matrix), mask)


def _same(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    return a.shape == b.shape and max_abs_difference(a, b) <= tol


def _same_kernel(a: ReverseKernel, b: ReverseKernel, tol: float) -> bool:
    if a.matrix.shape != b.matrix.shape or not np.array_equal(a.support_mask, b.support_mask):
        return False
    return _same(a.matrix[a.support_mask], b.matrix[b.support_mask], tol)


def reversal_diagnostics(model: ChainModel, initial: Distribution, tol: Optional[float] = None) -> ReversalReport:
    tol = tolerances.comparison if tol is None else tol
    steps = list(range(initial.time, model.end))
    if not steps:
        raise WindowError(f'No transitions after time {initial.time} in window {model.window}')
    ms = marginals(model, initial)
    kernels = [reverse_kernel(model, ms, n, tol) for n in steps]
    forward = [model.matrix(n).entries for n in steps]

    is_homogeneous = all(_same(forward[0], p, tol) for p in forward[1:])
    is_stationary = all(_same(ms[0].probs, m.probs, tol) for m in ms[1:])
    reverse_is_homogeneous = all(_same_kernel(kernels[0], k, tol) for k in kernels[1:])
    is_reversible = is_homogeneous and is_stationary and all(
        k.support_mask.all() and _same(k.matrix, p, tol) for k, p in zip(kernels, forward))

    report = ReversalReport(is_homogeneous, is_stationary, reverse_is_homogeneous, is_reversible)
    LOGGER.info(f'Reversal diagnostics over [{initial.time}, {model.end}]: {report}')
    return report


def stationary_vector(entries: np.ndarray, tol: Optional[float] = None, max_iter: int = 100000) -> np.ndarray:
    """
    Stationary vector of a square stochastic matrix by fixed-point iteration.

    The lazy matrix (P + I) / 2 is iterated, it has the same fixed points and is aperiodic.
    """
    tol = tolerances.convergence if tol is None else tol
    n = entries.shape[0]
    if entries.shape != (n, n):
        raise ChainError(f'Stationary vector requires a square matrix, got {entries.shape}')
    lazy = 0.5 * (entries + np.eye(n))
    m = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = m @ lazy
        if max_abs_difference(nxt, m) <= tol * 1e-2:
            return nxt / nxt.sum()
        m = nxt
    raise ChainError(f'Fixed-point iteration did not converge in {max_iter} steps')

