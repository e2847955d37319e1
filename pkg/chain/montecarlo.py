"""
Trajectory simulation and empirical check of the convergence (Z_n in S_n(q, 1)) -> A.

Trajectory i draws its uniforms from a Philox stream keyed by SeedSequence(root_seed) with the counter
block (0, i, 0, 0), so a trajectory does not depend on the number of workers or on the chunk it was
simulated in. A raw 64-bit output x becomes the uniform u = (x >> 11) * 2**-53 in [0, 1).
Next states are sampled by inverse CDF on 1 - u in (0, 1]: state j is chosen when
cdf(j - 1) < 1 - u <= cdf(j).
"""

import logging
import math
from concurrent.futures.thread import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from chain.checks import is_absorbing, require_valid
from chain.core import ChainModel, ChainError, Distribution, TimeIndex, WindowError
from chain.tail import BandPartition, EventKind, HIGH, HarmonicSequence, LOW, MID, TailEventSpec
from settings import simulation_settings

LOGGER = logging.getLogger('chain.montecarlo')

_UNIFORM_SCALE = 2.0 ** -53


class UndecidableEventError(ChainError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_trajectories: int
    horizon: TimeIndex
    root_seed: int
    checkpoints: Tuple[TimeIndex, ...]
    workers: Optional[int] = None
    chunk_size: Optional[int] = None

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError(f'At least one trajectory is required, got {self.n_trajectories}')
        if any(c > self.horizon for c in self.checkpoints):
            raise ValueError(f'Checkpoints must not exceed the horizon {self.horizon}')
        if not 0 <= self.root_seed < 2 ** 64:
            raise ValueError(f'Root seed must be a 64-bit unsigned integer, got {self.root_seed}')


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    start: TimeIndex
    states: np.ndarray
    """n_trajectories x (horizon - start + 1) array of states, numbering from zero"""

    @property
    def horizon(self) -> TimeIndex:
        return self.start + self.states.shape[1] - 1

    def __len__(self):
        return self.states.shape[0]

    def at(self, n: TimeIndex) -> np.ndarray:
        if not self.start <= n <= self.horizon:
            raise WindowError(f'Trajectories cover [{self.start}, {self.horizon}], not {n}')
        return self.states[:, n - self.start]


@dataclass(frozen=True)
class EmpiricalRow:
    n: TimeIndex
    low: float
    mid: float
    high: float
    p_a: float
    sym_diff: float
    """Frequency of trajectories decided at the horizon whose event membership disagrees with Z_n in the high band"""
    undecided: float
    absorbed: float
    """Fraction of trajectories decided at the horizon, 1 - undecided"""
    h_mean: float
    """Average of h_n(Z_n) over trajectories, an unbiased estimate of P(A) at every n"""
    se_low: float
    se_mid: float
    se_high: float
    se_a: float
    se_sym_diff: float


def standard_error(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


def _stream_key(root_seed: int) -> np.ndarray:
    return np.random.SeedSequence(root_seed).generate_state(2, dtype=np.uint64)


def _uniforms(key: np.ndarray, index: int, count: int) -> np.ndarray:
    bit_gen = np.random.Philox(key=key, counter=np.array([0, index, 0, 0], dtype=np.uint64))
    raw = bit_gen.random_raw(count)
    return (raw >> np.uint64(11)).astype(np.float64) * _UNIFORM_SCALE


class _Sampler:
    """Inverse CDF sampling with right-closed intervals"""

    def __init__(self, entries: np.ndarray):
        self.cdf = np.cumsum(entries, axis=1)
        positive = entries > 0
        # last state with positive probability, absorbs rounding of the final cumulative sum
        self.last = entries.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)

    def sample(self, rows: np.ndarray, u: np.ndarray) -> np.ndarray:
        v = 1.0 - u
        cdf = self.cdf[rows]
        idx = (cdf < v[:, None]).sum(axis=1)
        return np.minimum(idx, self.last[rows])


def _simulate_chunk(key: np.ndarray, indices: range, initial: np.ndarray,
                    samplers: List[_Sampler]) -> np.ndarray:
    steps = len(samplers)
    u = np.empty((len(indices), steps + 1))
    for row, i in enumerate(indices):
        u[row] = _uniforms(key, i, steps + 1)
    states = np.empty((len(indices), steps + 1), dtype=np.int64)
    states[:, 0] = _Sampler(initial[None, :]).sample(np.zeros(len(indices), dtype=np.int64), u[:, 0])
    for j, sampler in enumerate(samplers):
        states[:, j + 1] = sampler.sample(states[:, j], u[:, j + 1])
    return states


def simulate(model: ChainModel, initial: Distribution, config: SimConfig) -> TrajectoryBatch:
    if not initial.time <= config.horizon <= model.end:
        raise WindowError(f'Horizon {config.horizon} is outside [{initial.time}, {model.end}]')
    if any(c < initial.time for c in config.checkpoints):
        raise WindowError(f'Checkpoints must not precede the initial time {initial.time}')
    require_valid(model)

    workers = config.workers or simulation_settings.workers
    chunk = config.chunk_size or simulation_settings.chunk_size
    key = _stream_key(config.root_seed)
    samplers = [_Sampler(model.matrix(n).entries) for n in range(initial.time, config.horizon)]
    chunks = [range(lo, min(lo + chunk, config.n_trajectories)) for lo in range(0, config.n_trajectories, chunk)]

    LOGGER.info(f'Simulating {config.n_trajectories} trajectories on [{initial.time}, {config.horizon}], '
                f'seed {config.root_seed}, {workers} workers')
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix='Simulation') as executor:
        parts = list(executor.map(lambda r: _simulate_chunk(key, r, initial.probs, samplers), chunks))
    return TrajectoryBatch(initial.time, np.concatenate(parts, axis=0))


def _decide(batch: TrajectoryBatch, model: ChainModel, event: TailEventSpec) -> Tuple[np.ndarray, np.ndarray]:
    """:return: membership in A and the mask of trajectories for which it is decided"""
    if event.kind == EventKind.TERMINAL_SEED:
        if not event.is_indicator():
            raise UndecidableEventError('Terminal seed with values other than 0 and 1 does not define an event '
                                        'that a single trajectory can decide, use the exact band probabilities')
        horizon = event.horizon if event.horizon is not None else model.end
        if horizon > batch.horizon:
            raise UndecidableEventError(f'Event is decided at time {horizon}, '
                                        f'but trajectories end at {batch.horizon}')
        final = batch.at(horizon)
        return event.seed[final] == 1, np.ones(len(batch), dtype=bool)

    final = batch.at(batch.horizon)
    size = model.dimension(batch.horizon)
    absorbing = np.array([is_absorbing(model, i + 1) for i in range(size)])
    targets = np.zeros(size, dtype=bool)
    targets[[i - 1 for i in event.targets]] = True
    return targets[final], absorbing[final]


def empirical_band_report(batch: TrajectoryBatch, model: ChainModel, h: HarmonicSequence, bands: BandPartition,
                          event: TailEventSpec, config: SimConfig) -> List[EmpiricalRow]:
    in_a, decided = _decide(batch, model, event)
    total = len(batch)
    undecided = float((~decided).sum()) / total
    if undecided > 0:
        LOGGER.warning(f'{undecided:.3%} of trajectories are not absorbed at time {batch.horizon}')

    p_a = float((in_a & decided).sum()) / total
    rows = []
    for n in config.checkpoints:
        codes = bands.codes[n][batch.at(n)]
        high = codes == HIGH
        freq = [float((codes == c).sum()) / total for c in (LOW, MID, HIGH)]
        sym_diff = float((decided & (in_a != high)).sum()) / total
        h_mean = float(h.at(n)[batch.at(n)].mean())
        rows.append(EmpiricalRow(
            n, freq[0], freq[1], freq[2], p_a, sym_diff, undecided, 1 - undecided, h_mean,
            standard_error(freq[0], total), standard_error(freq[1], total), standard_error(freq[2], total),
            standard_error(p_a, total), standard_error(sym_diff, total)
        ))
    return rows
