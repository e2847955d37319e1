"""Validation of chain models. Every check returns the list of violations it found."""

import functools
import math
import operator
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional

import numpy as np
from flags import Flags

from chain.core import ChainModel, ChainError, StochasticMatrix, TimeIndex, WindowError


class Defect(Flags):
    shape = 0x1
    missing_matrix = 0x2
    negative_entry = 0x4
    row_sum = 0x8
    dimension_chain = 0x10
    initial_time = 0x20
    initial_length = 0x40
    initial_simplex = 0x80


class ExitCode(IntEnum):
    OK = 0
    VALIDATION = 2
    PARSE = 3
    INFEASIBLE = 4


@dataclass(frozen=True)
class Violation:
    kind: Defect
    time: TimeIndex
    row: Optional[int]
    """Row number, numbering from one, None if the violation concerns the whole matrix"""
    magnitude: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: List[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def defects(self) -> Defect:
        return functools.reduce(operator.or_, (v.kind for v in self.violations), Defect.no_flags)


class ChainValidationError(ChainError):
    def __init__(self, report: ValidationReport):
        first = report.violations[0].message
        super().__init__(f'Chain model is invalid ({len(report.violations)} violations), first: {first}')
        self.report = report


def check_entries(p: StochasticMatrix) -> List[Violation]:
    res = []
    for row in range(p.rows):
        worst = float(p.entries[row].min())
        if worst < 0:
            res.append(Violation(Defect.negative_entry, p.from_time, row + 1, -worst,
                                 f'Matrix at time {p.from_time}, row {row + 1}: negative entry {worst:.3g}'))
    return res


def check_row_sums(p: StochasticMatrix, tol: float) -> List[Violation]:
    res = []
    for row, total in enumerate(p.row_sums()):
        defect = abs(float(total) - 1)
        if defect > tol:
            res.append(Violation(Defect.row_sum, p.from_time, row + 1, defect,
                                 f'Matrix at time {p.from_time}, row {row + 1}: sums to {total:.12g}'))
    return res


def check_dimension_chain(prev: StochasticMatrix, p: StochasticMatrix) -> List[Violation]:
    if prev.cols == p.rows:
        return []
    return [Violation(Defect.dimension_chain, p.from_time, None, float(abs(prev.cols - p.rows)),
                      f'Matrix at time {p.from_time} has {p.rows} rows, '
                      f'but the matrix at time {prev.from_time} has {prev.cols} columns')]


def check_initial(model: ChainModel) -> List[Violation]:
    m = model.initial
    if m is None:
        return []
    if not model.start <= m.time <= model.end:
        return [Violation(Defect.initial_time, m.time, None, 0.0,
                          f'Initial distribution time {m.time} is outside window {model.window}')]
    if model.start == model.end:
        return []
    try:
        expected = model.dimension(m.time)
    except WindowError:
        return []  # reported as missing_matrix
    if expected != len(m):
        return [Violation(Defect.initial_length, m.time, None, float(abs(expected - len(m))),
                          f'Initial distribution has {len(m)} entries, but there are {expected} states '
                          f'at time {m.time}')]
    defect = abs(math.fsum(m.probs) - 1)
    if defect > model.tol_stochastic:
        return [Violation(Defect.initial_simplex, m.time, None, defect,
                          f'Initial distribution sums to 1 with defect {defect:.3g}')]
    return []


def validate_chain(model: ChainModel, tol: Optional[float] = None) -> ValidationReport:
    tol = model.tol_stochastic if tol is None else tol
    res: List[Violation] = []
    prev: Optional[StochasticMatrix] = None
    for n in model.steps():
        p = model.matrices.get(n)
        if p is None:
            res.append(Violation(Defect.missing_matrix, n, None, 0.0, f'Matrix at time {n} is missing'))
            prev = None
            continue
        if p.from_time != n:
            res.append(Violation(Defect.shape, n, None, 0.0,
                                 f'Matrix stored at time {n} declares time {p.from_time}'))
        res.extend(check_entries(p))
        res.extend(check_row_sums(p, tol))
        if prev is not None:
            res.extend(check_dimension_chain(prev, p))
        prev = p
    extra = sorted(n for n in model.matrices if not model.start <= n < model.end)
    for n in extra:
        res.append(Violation(Defect.shape, n, None, 0.0, f'Matrix at time {n} is outside window {model.window}'))
    res.extend(check_initial(model))
    return ValidationReport(res)


def require_valid(model: ChainModel, tol: Optional[float] = None) -> None:
    report = validate_chain(model, tol)
    if not report.ok:
        raise ChainValidationError(report)


def is_absorbing(model: ChainModel, state: int) -> bool:
    """True if the state (numbering from one) is kept with probability one by every matrix"""
    for n in model.steps():
        p = model.matrix(n)
        if state > min(p.rows, p.cols) or not np.isclose(p.entries[state - 1, state - 1], 1.0,
                                                         rtol=0, atol=model.tol_stochastic):
            return False
    return True


def absorbing_states(model: ChainModel) -> List[int]:
    if model.start == model.end:
        return []
    return [i for i in range(1, model.dimension(model.start) + 1) if is_absorbing(model, i)]
