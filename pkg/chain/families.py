"""Builtin finite chains, runnable without hand-entered matrices."""

from typing import Tuple

import numpy as np

from chain.core import ChainModel, StochasticMatrix, TimeIndex, homogeneous_model

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
SPLIT_ROW = np.array([[0.5, 0.5]])
MERGE_COLUMN = np.array([[1.0], [1.0]])


def permutation2(window: Tuple[TimeIndex, TimeIndex]) -> ChainModel:
    """Period two permutation at every step, the entrance law is not unique"""
    return homogeneous_model(SWAP, window)


def alt_dim(window: Tuple[TimeIndex, TimeIndex]) -> ChainModel:
    """
    Alternating dimensions: one state at odd times, two states at even times.

    P_n is the 1x2 row (.5 .5) for odd n and the 2x1 column (1; 1) for even n.
    """
    return ChainModel(window, {n: StochasticMatrix(n, SPLIT_ROW if n % 2 else MERGE_COLUMN)
                               for n in range(*window)})


def alt_dim_limit(s: TimeIndex, t: TimeIndex) -> np.ndarray:
    """Closed form of P_st for the alternating-dimension chain, s < t"""
    if t % 2 == 0:
        return np.full((2, 2), 0.5) if s % 2 == 0 else np.full((1, 2), 0.5)
    return np.ones((2, 1)) if s % 2 == 0 else np.ones((1, 1))


def absorbing_walk(window: Tuple[TimeIndex, TimeIndex], hold: float = 0.5) -> ChainModel:
    """Three states, 1 and 3 absorbing, the middle state stays with probability hold and leaves symmetrically"""
    if not 0 <= hold < 1:
        raise ValueError(f'Holding probability must lie in [0, 1), got {hold}')
    leave = (1 - hold) / 2
    return homogeneous_model(np.array([[1.0, 0.0, 0.0], [leave, hold, leave], [0.0, 0.0, 1.0]]), window)
