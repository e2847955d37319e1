"""
This file contains definitions of settings used by the program and their default values.

It is not supposed to be edited by user, edit config.py instead.
"""

from dataclasses import dataclass
from typing import Tuple

program_version = '1.0.0'


@dataclass
class ProgramSettings:
    log_file: str


program_settings = ProgramSettings('log/markov.log')


@dataclass
class ToleranceSettings:
    stochastic: float
    """Allowed deviation of a row sum from one"""
    convergence: float
    """Max-abs change between successive products that counts as converged"""
    dedup: float
    """Total variation distance under which two vertices of a simplex image are merged"""
    comparison: float
    """Max-abs difference under which two kernels or marginals are considered equal"""
    hull: float
    """Accuracy of the distance-to-hull computation"""


tolerances = ToleranceSettings(
    stochastic=1e-12,
    convergence=1e-10,
    dedup=1e-9,
    comparison=1e-10,
    hull=1e-10
)


@dataclass
class TailSettings:
    stabilization_steps: int
    """Horizon extension used to certify that a harmonic sequence has stabilized"""
    bands: Tuple[float, float]
    """Default (p, q) thresholds of the band partition"""


tail_settings = TailSettings(
    stabilization_steps=10,
    bands=(0.1, 0.9)
)


@dataclass
class SimulationSettings:
    workers: int
    chunk_size: int
    """Number of trajectories simulated by one task"""


simulation_settings = SimulationSettings(
    workers=4,
    chunk_size=10000
)


@dataclass
class CountableSettings:
    probe_budget: int
    """Largest state index a tightness certificate may claim"""
    probe_states: int
    """Rows 1..probe_states are always probed when checking a certificate"""
    eps_grid: Tuple[float, ...]


countable_settings = CountableSettings(
    probe_budget=1000,
    probe_states=64,
    eps_grid=(0.1, 0.01, 0.001)
)
