"""
Tail events of forward-time chains.

h_n(i) = P(A | Z_n = i) is computed by the backward recursion h_n = P_n h_{n+1}.
Two classes of events are representable: absorption in a set of absorbing target states,
and events given by a terminal seed h_T.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from chain.checks import absorbing_states, require_valid
from chain.core import ChainModel, ChainError, DimensionError, Distribution, TimeIndex, WindowError, marginals
from chain.helpers import max_abs_difference, read_only
from settings import tail_settings

LOGGER = logging.getLogger('chain.tail')

LOW = 0
MID = 1
HIGH = 2


class InvalidEventError(ChainError):
    pass


class EventKind(Enum):
    ABSORPTION = 'absorption'
    TERMINAL_SEED = 'terminal_seed'


@dataclass(frozen=True, eq=False)
class TailEventSpec:
    kind: EventKind
    targets: Tuple[int, ...] = ()
    """Absorbing target states, numbering from one"""
    horizon: Optional[TimeIndex] = None
    seed: Optional[np.ndarray] = None

    @staticmethod
    def absorption(targets: Sequence[int]) -> 'TailEventSpec':
        if not targets:
            raise InvalidEventError('Absorption event needs at least one target state')
        return TailEventSpec(EventKind.ABSORPTION, tuple(sorted(set(targets))))

    @staticmethod
    def terminal_seed(horizon: TimeIndex, values: Sequence[float]) -> 'TailEventSpec':
        seed = read_only(np.asarray(values))
        if seed.ndim != 1 or seed.size == 0:
            raise InvalidEventError('Terminal seed must be a non-empty vector')
        if np.any(seed < 0) or np.any(seed > 1):
            raise InvalidEventError(f'Terminal seed values must lie in [0, 1], got {seed}')
        return TailEventSpec(EventKind.TERMINAL_SEED, horizon=horizon, seed=seed)

    def is_indicator(self) -> bool:
        return self.kind == EventKind.ABSORPTION or bool(np.all((self.seed == 0) | (self.seed == 1)))


@dataclass(frozen=True)
class HarmonicSequence:
    vectors: Dict[TimeIndex, np.ndarray]
    """h_n for n = start..horizon"""
    horizon: TimeIndex
    stabilization_residual: Optional[float]
    """Sup-norm change of h at the window start when the horizon is moved, None if it cannot be moved"""

    @property
    def start(self) -> TimeIndex:
        return min(self.vectors)

    def at(self, n: TimeIndex) -> np.ndarray:
        try:
            return self.vectors[n]
        except KeyError:
            raise WindowError(f'Harmonic sequence is defined on [{self.start}, {self.horizon}], not at {n}')


@dataclass(frozen=True)
class BandPartition:
    """Per time band codes: LOW for h < p, MID for p <= h <= q, HIGH for h > q"""

    p: float
    q: float
    codes: Dict[TimeIndex, np.ndarray]

    def _states(self, n: TimeIndex, code: int) -> List[int]:
        return [int(i) + 1 for i in np.flatnonzero(self.codes[n] == code)]

    def low(self, n: TimeIndex) -> List[int]:
        return self._states(n, LOW)

    def mid(self, n: TimeIndex) -> List[int]:
        return self._states(n, MID)

    def high(self, n: TimeIndex) -> List[int]:
        return self._states(n, HIGH)


@dataclass(frozen=True)
class BandRow:
    n: TimeIndex
    low: float
    mid: float
    high: float
    p_a: float
    conservation_residual: float


@dataclass(frozen=True)
class Cylinder:
    """Event {Z_j in allowed[j] for k <= j <= n}, times missing from allowed put no constraint"""

    k: TimeIndex
    n: TimeIndex
    allowed: Mapping[TimeIndex, FrozenSet[int]]


@dataclass(frozen=True)
class CylinderBands:
    k: TimeIndex
    n: TimeIndex
    conditional: np.ndarray
    """P(A_kn | Z_n = i), NaN where P(Z_n = i) = 0"""
    mask: np.ndarray
    codes: np.ndarray
    """Band codes of supported states, -1 for masked states"""
    prob_high: float
    """P(Z_n in S_kn(q, 1))"""
    impossible: bool


def _recurse(model: ChainModel, horizon: TimeIndex, seed: np.ndarray) -> Dict[TimeIndex, np.ndarray]:
    res = {horizon: seed}
    h = seed
    for n in range(horizon - 1, model.start - 1, -1):
        h = np.clip(model.matrix(n).entries @ h, 0.0, 1.0)
        h.setflags(write=False)
        res[n] = h
    return res


def _indicator(size: int, targets: Sequence[int]) -> np.ndarray:
    res = np.zeros(size)
    res[[i - 1 for i in targets]] = 1
    res.setflags(write=False)
    return res


def _check_targets(model: ChainModel, targets: Sequence[int]) -> None:
    absorbing = absorbing_states(model)
    for i in targets:
        if i not in absorbing:
            raise InvalidEventError(f'State {i} is not absorbing under every matrix in window {model.window}, '
                                    f'absorbing states are {absorbing}')


def harmonic_backward(model: ChainModel, event: TailEventSpec,
                      stabilization_steps: Optional[int] = None) -> HarmonicSequence:
    steps = tail_settings.stabilization_steps if stabilization_steps is None else stabilization_steps
    require_valid(model)
    start = model.start

    if event.kind == EventKind.ABSORPTION:
        _check_targets(model, event.targets)
        horizon = model.end
        vectors = _recurse(model, horizon, _indicator(model.dimension(horizon), event.targets))
        shorter = max(start, horizon - steps)
        ref = _recurse(model, shorter, _indicator(model.dimension(shorter), event.targets))
        residual: Optional[float] = max_abs_difference(vectors[start], ref[start])
    else:
        horizon = event.horizon if event.horizon is not None else model.end
        if not start <= horizon <= model.end:
            raise WindowError(f'Seed horizon {horizon} is outside window {model.window}')
        if len(event.seed) != model.dimension(horizon):
            raise DimensionError(f'Seed has {len(event.seed)} entries, '
                                 f'but there are {model.dimension(horizon)} states at time {horizon}')
        vectors = _recurse(model, horizon, event.seed)
        residual = None
        for moved in (horizon + steps, horizon - steps):
            if start <= moved <= model.end and model.dimension(moved) == len(event.seed):
                ref = _recurse(model, moved, event.seed)
                residual = max_abs_difference(vectors[start], ref[start])
                break
        if residual is None:
            LOGGER.warning(f'Seed horizon {horizon} cannot be moved by {steps} steps, stabilization not certified')

    LOGGER.debug(f'Harmonic sequence on [{start}, {horizon}], stabilization residual {residual}')
    return HarmonicSequence(vectors, horizon, residual)


def band_sets(h: HarmonicSequence, p: float, q: float) -> BandPartition:
    if not 0 < p < q < 1:
        raise InvalidEventError(f'Bands require 0 < p < q < 1, got p = {p}, q = {q}')
    codes = {}
    for n, vec in h.vectors.items():
        c = np.where(vec < p, LOW, np.where(vec <= q, MID, HIGH))
        c.setflags(write=False)
        codes[n] = c
    return BandPartition(p, q, codes)


def band_probabilities(model: ChainModel, initial: Distribution, h: HarmonicSequence,
                       bands: BandPartition) -> List[BandRow]:
    """Per time band probabilities from initial.time to the horizon of h"""
    if not h.start <= initial.time <= h.horizon:
        raise WindowError(f'Initial time {initial.time} is outside [{h.start}, {h.horizon}]')
    seq = marginals(model, initial, h.horizon)
    p_a = math.fsum(seq[0].probs * h.at(initial.time))
    rows = []
    for m in seq:
        codes = bands.codes[m.time]
        rows.append(BandRow(
            m.time,
            math.fsum(m.probs[codes == LOW]),
            math.fsum(m.probs[codes == MID]),
            math.fsum(m.probs[codes == HIGH]),
            p_a,
            math.fsum(m.probs * h.at(m.time)) - p_a
        ))
    return rows


def backward_band_sets(model: ChainModel, initial: Distribution, cylinder: Cylinder,
                       p: Optional[float] = None, q: Optional[float] = None) -> CylinderBands:
    """
    Band sets of the past event A_kn given the present state Z_n.

    The joint probabilities P(A_kn, Z_n = i) are obtained by pushing the time k marginal forward while
    killing the mass outside the allowed sets, and then divided by P(Z_n = i).
    """
    p = tail_settings.bands[0] if p is None else p
    q = tail_settings.bands[1] if q is None else q
    if not 0 < p < q < 1:
        raise InvalidEventError(f'Bands require 0 < p < q < 1, got p = {p}, q = {q}')
    k, n = cylinder.k, cylinder.n
    if not initial.time <= k <= n <= model.end:
        raise WindowError(f'Cylinder [{k}, {n}] is not inside [{initial.time}, {model.end}]')
    require_valid(model)

    def allowed_mask(j: TimeIndex) -> np.ndarray:
        size = model.dimension(j)
        if j not in cylinder.allowed:
            return np.ones(size, dtype=bool)
        res = np.zeros(size, dtype=bool)
        for i in cylinder.allowed[j]:
            if not 1 <= i <= size:
                raise IndexError(f'Invalid state index: {i} at time {j}, expected 1..{size}')
            res[i - 1] = True
        return res

    seq = marginals(model, initial, n)
    impossible = any(not allowed_mask(j).any() for j in range(k, n + 1))
    joint = seq[k - initial.time].probs * allowed_mask(k)
    for j in range(k, n):
        joint = (joint @ model.matrix(j).entries) * allowed_mask(j + 1)

    m_n = seq[-1].probs
    mask = m_n > 0
    conditional = np.full(m_n.size, np.nan)
    conditional[mask] = np.clip(joint[mask] / m_n[mask], 0.0, 1.0)
    if impossible:
        LOGGER.warning(f'Cylinder [{k}, {n}] has an empty allowed set, the event is impossible')
    if not mask.all():
        LOGGER.warning(f'Cylinder [{k}, {n}]: {int((~mask).sum())} states at time {n} have zero probability')

    codes = np.full(m_n.size, -1)
    supported = conditional[mask]
    codes[mask] = np.where(supported < p, LOW, np.where(supported <= q, MID, HIGH))
    prob_high = math.fsum(m_n[codes == HIGH])
    return CylinderBands(k, n, read_only(conditional), mask, codes, prob_high, impossible)
