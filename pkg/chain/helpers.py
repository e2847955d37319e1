import numpy as np


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    if p.shape != q.shape:
        raise ValueError(f'Cannot compare vectors of shapes {p.shape} and {q.shape}')
    return 0.5 * float(np.abs(p - q).sum())


def dobrushin(matrix: np.ndarray) -> float:
    """Half the largest L1 distance between two rows of the matrix"""
    res = 0.0
    for i in range(matrix.shape[0] - 1):
        res = max(res, float(np.abs(matrix[i + 1:] - matrix[i]).sum(axis=1).max()))
    return 0.5 * res


def max_abs_difference(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f'Cannot compare arrays of shapes {a.shape} and {b.shape}')
    if a.size == 0:
        return 0.0
    return float(np.abs(a - b).max())


def read_only(array: np.ndarray) -> np.ndarray:
    res = np.array(array, dtype=float)
    res.setflags(write=False)
    return res
