"""
Chains on the countable state space {1, 2, ...}.

A kernel is given by a row generator that materializes prefixes of rows, and by an envelope that
certifies tightness: envelope(n, eps) = N means that every row of P_n keeps mass at least 1 - eps on
the states 1..N. Verdicts are certificates over a probe grid (rows 1..probe_states plus adversarial
rows just beyond the claimed cutoff), not statements about every state.

Finite windows onto these chains are truncations to the states 1..M with renormalized rows,
the leaked mass is carried separately as a defect bound.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from chain.core import ChainModel, ChainError, Distribution, InfeasibleAnalysisError, StochasticMatrix, TimeIndex, \
    delta_distribution
from chain.entrance import delta_vertices, entrance_law
from chain.helpers import max_abs_difference
from settings import countable_settings

LOGGER = logging.getLogger('chain.countable')

RW_BOUND_CONSTANT = math.sqrt(math.e / (2 * math.pi))


class TruncationError(ChainError):
    def __init__(self, msg: str, rows: List[int]):
        super().__init__(msg)
        self.rows = rows


class RowFamily(ABC):
    name = ''
    bandwidth = 0
    """Largest distance between a state and the states its row jumps to, outside of any reset part"""

    @abstractmethod
    def row(self, n: TimeIndex, i: int, length: int) -> np.ndarray:
        """Probabilities p_n(i, k) for k = 1..length"""

    def envelope(self, n: TimeIndex, eps: float) -> Optional[int]:
        """Certified cutoff N_eps(n), None if the family is not known to be tight at time n"""
        return None


class ResetFamily(RowFamily):
    """
    Capped ladder with geometric resets:
    p_n(i, .) = (1 - alpha) delta_{min(i + 1, band)} + alpha g_n, g_n(k) = (1 - beta_n) beta_n^(k - 1).

    beta_n = 1 - (1 - beta) / (1 + drift |n|), so drift = 0 gives the same reset law at every time
    and drift > 0 pushes beta_n to 1 in the past.
    """

    name = 'reset'
    bandwidth = 1

    def __init__(self, alpha: float, beta: float, band: int, drift: float = 0.0):
        if not 0 < alpha <= 1 or not 0 < beta < 1 or band < 1 or drift < 0:
            raise ValueError(f'Invalid reset family parameters: alpha = {alpha}, beta = {beta}, '
                             f'band = {band}, drift = {drift}')
        self.alpha = alpha
        self.beta = beta
        self.band = band
        self.drift = drift

    def beta_at(self, n: TimeIndex) -> float:
        return 1 - (1 - self.beta) / (1 + self.drift * abs(n))

    def row(self, n: TimeIndex, i: int, length: int) -> np.ndarray:
        b = self.beta_at(n)
        res = self.alpha * (1 - b) * b ** np.arange(length)
        climb = min(i + 1, self.band)
        if climb <= length:
            res[climb - 1] += 1 - self.alpha
        return res

    def envelope(self, n: TimeIndex, eps: float) -> Optional[int]:
        # sum_{k <= N} p_n(i, k) >= 1 - alpha beta_n^N for N >= band
        return max(self.band, math.ceil(math.log(eps) / math.log(self.beta_at(n))))


class RandomWalkFamily(RowFamily):
    """Symmetric walk, state 1 holds or steps up with probability .5 each"""

    name = 'random_walk'
    bandwidth = 1

    def row(self, n: TimeIndex, i: int, length: int) -> np.ndarray:
        res = np.zeros(length)
        for k in ((i, i + 1) if i == 1 else (i - 1, i + 1)):
            if k <= length:
                res[k - 1] += 0.5
        return res


class ShiftFamily(RowFamily):
    """Deterministic move p_n(i, k) = I[k = i + ell]"""

    name = 'shift'

    def __init__(self, ell: int):
        if ell < 0:
            raise ValueError(f'Shift must be nonnegative on the states 1, 2, ..., got {ell}')
        self.ell = ell
        self.bandwidth = ell

    def row(self, n: TimeIndex, i: int, length: int) -> np.ndarray:
        res = np.zeros(length)
        if i + self.ell <= length:
            res[i + self.ell - 1] = 1
        return res


@dataclass(frozen=True)
class Counterexample:
    state: int
    eps: float
    claimed: int
    """Cutoff N that the state violates"""
    mass: float
    """Mass of the row on the states 1..claimed"""


@dataclass(frozen=True)
class TightnessVerdict:
    time: TimeIndex
    tight: bool
    table: Dict[float, int]
    counterexample: Optional[Counterexample]


@dataclass(frozen=True)
class ConditionPReport:
    verdicts: List[TightnessVerdict]
    probe_budget: int

    @property
    def holds(self) -> bool:
        return all(v.tight for v in self.verdicts)


@dataclass(frozen=True)
class ConditionUReport:
    uniform: bool
    table: Dict[float, Optional[int]]
    """Uniform cutoff max_n N_eps(n), None where some time is not tight"""
    per_time: ConditionPReport


@dataclass(frozen=True)
class TruncatedStep:
    matrix: StochasticMatrix
    mass_defect: float
    """Largest mass leaked beyond M by a row i <= M"""
    renormalization: np.ndarray
    """Row masses inside 1..M before renormalization"""


@dataclass(frozen=True)
class TruncatedModel:
    model: ChainModel
    mass_defects: Dict[TimeIndex, float]
    renormalization: Dict[TimeIndex, np.ndarray]

    def product_defect(self, s: TimeIndex, t: TimeIndex) -> float:
        """Union bound on the mass a product P_st loses to the truncation"""
        return math.fsum(self.mass_defects[n] for n in range(s, t))


@dataclass(frozen=True)
class RwBoundRow:
    n: int
    exact: float
    bound: float
    holds: bool


@dataclass(frozen=True)
class ShiftReport:
    ell: int
    onto_on_truncation_modulo_shift: bool
    laws: List[Distribution]
    residual: float


@dataclass(frozen=True)
class CountableEntranceReport:
    law: Distribution
    """Law at the window end started from the anchor state at the window start"""
    diameter: float
    vertex_count: int
    defect_bound: float


def _probe_states(claimed: int, bandwidth: int) -> List[int]:
    grid = set(range(1, countable_settings.probe_states + 1))
    grid.update({claimed, claimed + 1, claimed + bandwidth, claimed + bandwidth + 1, 2 * claimed})
    return sorted(grid)


def _verify(family: RowFamily, n: TimeIndex, eps: float, claimed: int) -> Optional[Counterexample]:
    for i in _probe_states(claimed, family.bandwidth):
        mass = math.fsum(family.row(n, i, claimed))
        if mass < 1 - eps - 1e-12:
            return Counterexample(i, eps, claimed, mass)
    return None


def check_time(family: RowFamily, n: TimeIndex, eps_grid: Sequence[float],
               probe_budget: Optional[int] = None) -> TightnessVerdict:
    budget = countable_settings.probe_budget if probe_budget is None else probe_budget
    table = {}
    for eps in eps_grid:
        if not 0 < eps < 1:
            raise ValueError(f'Tolerances must lie in (0, 1), got {eps}')
        claimed = family.envelope(n, eps)
        if claimed is None:
            found = _verify(family, n, eps, budget)
            if found is None:
                LOGGER.warning(f'{family.name} at time {n}: no envelope and no counterexample within {budget} states')
            return TightnessVerdict(n, False, table, found)
        found = _verify(family, n, eps, claimed)
        if found is not None:
            LOGGER.error(f'{family.name} at time {n}: envelope {claimed} for eps = {eps} fails at state {found.state}')
            return TightnessVerdict(n, False, table, found)
        table[eps] = claimed
    return TightnessVerdict(n, True, table, None)


def condition_p_check(family: RowFamily, times: Sequence[TimeIndex], eps_grid: Optional[Sequence[float]] = None,
                      probe_budget: Optional[int] = None) -> ConditionPReport:
    eps_grid = countable_settings.eps_grid if eps_grid is None else eps_grid
    budget = countable_settings.probe_budget if probe_budget is None else probe_budget
    verdicts = [check_time(family, n, eps_grid, budget) for n in times]
    report = ConditionPReport(verdicts, budget)
    LOGGER.info(f'{family.name}: tight at {sum(v.tight for v in verdicts)} of {len(verdicts)} probed times')
    return report


def condition_u_check(family: RowFamily, times: Sequence[TimeIndex], eps_grid: Optional[Sequence[float]] = None,
                      probe_budget: Optional[int] = None) -> ConditionUReport:
    """Uniform only when every probed time is tight and max_n N_eps(n) fits in the probe budget"""
    eps_grid = countable_settings.eps_grid if eps_grid is None else eps_grid
    per_time = condition_p_check(family, times, eps_grid, probe_budget)
    table: Dict[float, Optional[int]] = {}
    for eps in eps_grid:
        cutoffs = [v.table.get(eps) for v in per_time.verdicts]
        table[eps] = None if any(c is None for c in cutoffs) else max(cutoffs, default=0)
    uniform = per_time.holds and all(c is not None and c <= per_time.probe_budget for c in table.values())
    return ConditionUReport(uniform, table, per_time)


def truncate(family: RowFamily, n: TimeIndex, m: int) -> TruncatedStep:
    if m < 1:
        raise ValueError(f'Truncation size must be positive, got {m}')
    rows = np.array([family.row(n, i, m) for i in range(1, m + 1)])
    inside = rows.sum(axis=1)
    empty = [i + 1 for i in np.flatnonzero(inside <= 0)]
    if empty:
        raise TruncationError(f'{family.name} at time {n}: rows {empty} have no mass inside 1..{m}', empty)
    defect = float(max(0.0, (1 - inside).max()))
    if defect > 0:
        LOGGER.debug(f'{family.name} at time {n}: truncation to {m} states leaks up to {defect:.3g}')
    return TruncatedStep(StochasticMatrix(n, rows / inside[:, None]), defect, inside)


def truncated_chain(family: RowFamily, window: Tuple[TimeIndex, TimeIndex], m: int) -> TruncatedModel:
    steps = {n: truncate(family, n, m) for n in range(*window)}
    model = ChainModel(window, {n: s.matrix for n, s in steps.items()})
    return TruncatedModel(model, {n: s.mass_defect for n, s in steps.items()},
                          {n: s.renormalization for n, s in steps.items()})


def truncated_entrance(family: RowFamily, window: Tuple[TimeIndex, TimeIndex], m: int,
                       anchor_state: int = 1) -> CountableEntranceReport:
    """
    Anchored entrance law on a truncation.

    The law is exact for the truncated chain, its distance to the untruncated anchored law is at most
    the union bound of the per-step defects.
    """
    s, t = window
    if s >= t:
        raise InfeasibleAnalysisError(f'Window {window} has no transitions')
    truncated = truncated_chain(family, window, m)
    anchor = delta_distribution(anchor_state, m, s)
    law = entrance_law(truncated.model, anchor, [t]).laws[t]
    delta = delta_vertices(truncated.model, s, t)
    return CountableEntranceReport(law, delta.diameter, len(delta.vertices), truncated.product_defect(s, t))


def product_envelope_check(family: RowFamily, window: Tuple[TimeIndex, TimeIndex], m: int,
                           eps: float) -> Tuple[float, float, bool]:
    """
    A cutoff certified for P_{t-1} also holds for every row of P_st.

    :return: the smallest row mass of the truncated P_st on 1..N_eps, the required 1 - eps - defect,
        and whether it holds
    """
    s, t = window
    claimed = family.envelope(t - 1, eps)
    if claimed is None:
        raise InfeasibleAnalysisError(f'{family.name} has no envelope at time {t - 1}')
    if claimed > m:
        raise InfeasibleAnalysisError(f'Cutoff {claimed} exceeds the truncation {m}')
    truncated = truncated_chain(family, window, m)
    acc = truncated.model.matrix(s).entries
    for n in range(s + 1, t):
        acc = acc @ truncated.model.matrix(n).entries
    smallest = float(acc[:, :claimed].sum(axis=1).min())
    required = 1 - eps - truncated.product_defect(s, t)
    return smallest, required, smallest >= required


def central_binomial(n: int) -> float:
    """(.5)^(2n) C(2n, n) evaluated in log space"""
    return math.exp(gammaln(2 * n + 1) - 2 * gammaln(n + 1) - 2 * n * math.log(2))


def rw_bound_check(n_list: Sequence[int]) -> List[RwBoundRow]:
    res = []
    for n in n_list:
        if n < 1:
            raise ValueError(f'n must be positive, got {n}')
        exact = central_binomial(n)
        bound = RW_BOUND_CONSTANT / math.sqrt(n)
        res.append(RwBoundRow(n, exact, bound, exact <= bound))
    return res


def rw_max_row_entry(n: int, m: int) -> float:
    """
    Largest entry of the row of the centered state 2n + 1 in the 2n-step product of the truncated walk.

    The walk started at 2n + 1 stays inside 2..4n for the first 2n - 1 steps, so with m >= 4n + 1
    the row is the same as for the untruncated walk.
    """
    if n < 1:
        raise ValueError(f'n must be positive, got {n}')
    if m < 4 * n + 1:
        raise InfeasibleAnalysisError(f'Support of the {2 * n}-step walk needs {4 * n + 1} states, truncation is {m}')
    step = truncate(RandomWalkFamily(), 0, m).matrix.entries
    row = np.zeros(m)
    row[2 * n] = 1
    for _ in range(2 * n):
        row = row @ step
    return float(row.max())


def shift_family_checks(ell: int, m: int, window: Tuple[TimeIndex, TimeIndex], base: int = 1) -> ShiftReport:
    """
    Shifted deltas m_n = delta_{base + (n - s) ell} form an entrance law of the shift family,
    the recursion is checked on the truncation without renormalization.
    """
    family = ShiftFamily(ell)
    s, t = window
    last = base + (t - s) * ell
    if base < 1 or last > m:
        raise InfeasibleAnalysisError(f'Shifted deltas leave the truncation 1..{m}: last state {last}')
    raw = np.array([family.row(s, i, m) for i in range(1, m + 1)])
    cols = raw.sum(axis=0)
    onto = bool(np.all(cols[ell:] == 1) and np.all(cols[:ell] == 0))

    laws = [delta_distribution(base + (n - s) * ell, m, n) for n in range(s, t + 1)]
    residual = max((max_abs_difference(a.probs @ raw, b.probs) for a, b in zip(laws, laws[1:])), default=0.0)
    LOGGER.info(f'Shift family ell = {ell}: entrance law recursion residual {residual}')
    return ShiftReport(ell, onto, laws, residual)
