"""
Domain types of a time-indexed Markov chain: distributions, stochastic matrices and chain models.

States are numbered from one in every public interface, arrays are indexed from zero.
All types are immutable after construction.
"""
import logging
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Optional, Tuple, List, Iterable

import numpy as np

from chain.helpers import read_only
from settings import tolerances

LOGGER = logging.getLogger('chain.core')

TimeIndex = int


class ChainError(Exception):
    def __init__(self, msg: str):
        super().__init__(msg)
        self.message = msg


class DimensionError(ChainError):
    pass


class WindowError(ChainError):
    pass


class InfeasibleAnalysisError(ChainError):
    pass


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector on the states of the chain at a given time"""

    time: TimeIndex
    probs: np.ndarray
    tol: Optional[float] = field(default=None, compare=False, repr=False)
    """Allowed deviation of the total mass from one, settings value if None"""

    def __post_init__(self):
        probs = read_only(self.probs)
        tol = tolerances.stochastic if self.tol is None else self.tol
        object.__setattr__(self, 'probs', probs)
        object.__setattr__(self, 'tol', tol)
        if probs.ndim != 1 or probs.size == 0:
            raise DimensionError(f'Distribution at time {self.time} must be a non-empty vector')
        if np.any(probs < 0):
            raise ValueError(f'Distribution at time {self.time} has negative entries')
        defect = abs(float(probs.sum()) - 1)
        if defect > tol:
            raise ValueError(f'Distribution at time {self.time} sums to 1 with defect {defect:.3g}')

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """
    Transition matrix from time from_time to from_time + 1.

    Only the shape is checked on construction, stochasticity is reported by chain.checks.
    """

    from_time: TimeIndex
    entries: np.ndarray

    def __post_init__(self):
        entries = read_only(self.entries)
        if entries.ndim != 2 or entries.size == 0:
            raise DimensionError(f'Matrix at time {self.from_time} must be a non-empty two dimensional array')
        object.__setattr__(self, 'entries', entries)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def renormalized(self) -> 'StochasticMatrix':
        sums = self.row_sums()
        if np.any(sums <= 0):
            raise ValueError(f'Matrix at time {self.from_time} has a row without mass')
        return StochasticMatrix(self.from_time, self.entries / sums[:, None])


@dataclass(frozen=True, eq=False)
class ChainModel:
    """
    Sequence of stochastic matrices P_n for n in [s_min, t_max - 1].

    An empty window (s_min == t_max) is a valid model without matrices.
    """

    window: Tuple[TimeIndex, TimeIndex]
    matrices: Mapping[TimeIndex, StochasticMatrix]
    initial: Optional[Distribution] = None
    tol_stochastic: float = field(default_factory=lambda: tolerances.stochastic)

    def __post_init__(self):
        s_min, t_max = self.window
        if s_min > t_max:
            raise WindowError(f'Window start {s_min} is after window end {t_max}')
        object.__setattr__(self, 'matrices', MappingProxyType(dict(self.matrices)))

    @property
    def start(self) -> TimeIndex:
        return self.window[0]

    @property
    def end(self) -> TimeIndex:
        return self.window[1]

    def steps(self) -> Iterable[TimeIndex]:
        return range(self.start, self.end)

    def matrix(self, n: TimeIndex) -> StochasticMatrix:
        if not self.start <= n < self.end:
            raise WindowError(f'No transition from time {n} in window {self.window}')
        try:
            return self.matrices[n]
        except KeyError:
            raise WindowError(f'Matrix at time {n} is missing')

    def dimension(self, n: TimeIndex) -> int:
        """Number of states N_n at time n"""
        if n < self.end:
            return self.matrix(n).rows
        return self.matrix(n - 1).cols

    def check_window(self, s: TimeIndex, t: TimeIndex) -> None:
        if s >= t:
            raise WindowError(f'Expected s < t, got s = {s}, t = {t}')
        if s < self.start or t > self.end:
            raise WindowError(f'Interval [{s}, {t}] is outside window {self.window}')

    def with_initial(self, initial: Optional[Distribution]) -> 'ChainModel':
        return replace(self, initial=initial)


def homogeneous_model(entries: np.ndarray, window: Tuple[TimeIndex, TimeIndex],
                      initial: Optional[Distribution] = None) -> ChainModel:
    return ChainModel(window, {n: StochasticMatrix(n, entries) for n in range(*window)}, initial)


def push_forward(m: Distribution, p: StochasticMatrix, tol: Optional[float] = None) -> Distribution:
    """m_{n+1} = m_n P_n"""
    if m.time != p.from_time:
        raise WindowError(f'Distribution at time {m.time} cannot be moved by the matrix at time {p.from_time}')
    if len(m) != p.rows:
        raise DimensionError(f'Distribution of length {len(m)} does not match {p.rows}x{p.cols} matrix '
                             f'at time {p.from_time}')
    step_tol = tolerances.stochastic if tol is None else tol
    return Distribution(m.time + 1, m.probs @ p.entries, m.tol + step_tol)


def delta_distribution(i: int, n: int, t: TimeIndex) -> Distribution:
    """Unit mass at state i (numbering from one) among n states"""
    if i < 1 or i > n:
        raise IndexError(f'Invalid state index: {i}, expected 1..{n}')
    probs = np.zeros(n)
    probs[i - 1] = 1
    return Distribution(t, probs)


def marginals(model: ChainModel, initial: Distribution, until: Optional[TimeIndex] = None) -> List[Distribution]:
    """Marginal distributions from initial.time up to until (window end by default)"""
    until = model.end if until is None else until
    if not model.start <= initial.time <= until <= model.end:
        raise WindowError(f'Cannot push time {initial.time} distribution to time {until} in window {model.window}')
    res = [initial]
    for n in range(initial.time, until):
        res.append(push_forward(res[-1], model.matrix(n), model.tol_stochastic))
    return res
