"""
Entrance laws of chains indexed by negative time.

Delta(s, t) is the image of the simplex at time s under P_st, the convex hull of the rows of P_st.
The set of possible distributions at time t is the nested intersection of Delta(s, t) over s < t,
it is approximated here by Delta(s, t) at the deepest available s.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from chain.algebra import backward_products, product, ProductMatrix
from chain.checks import require_valid
from chain.core import ChainModel, ChainError, Distribution, DimensionError, InfeasibleAnalysisError, TimeIndex, \
    WindowError, marginals
from chain.helpers import dobrushin, max_abs_difference, total_variation
from settings import tolerances

LOGGER = logging.getLogger('chain.entrance')


@dataclass(frozen=True)
class DeltaApprox:
    s: TimeIndex
    t: TimeIndex
    vertices: List[Distribution]
    """Extreme rows of P_st, near duplicates merged and rows inside the hull of the others dropped"""
    diameter: float
    """Dobrushin coefficient of P_st, the largest total variation distance between two rows"""

    def vertex_array(self) -> np.ndarray:
        return np.array([v.probs for v in self.vertices])


@dataclass(frozen=True)
class NestingReport:
    t: TimeIndex
    schedule: List[TimeIndex]
    residuals: List[float]
    """Distance of Delta(schedule[k + 1], t) from the hull of Delta(schedule[k], t)"""
    diameters: List[float]

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)


@dataclass(frozen=True)
class LimitMatrixReport:
    t: TimeIndex
    schedule: List[TimeIndex]
    limit: np.ndarray
    """Product at the last probed s, the candidate limit matrix"""
    residuals: List[float]
    """Max-abs change of the product between consecutive schedule entries"""
    converged: bool
    unique: bool
    unique_law: Optional[Distribution]
    dimension_mismatch: bool = False


@dataclass(frozen=True)
class UniquenessReport:
    """Uniqueness at time t as seen at a finite depth with a finite tolerance, not an absolute claim"""

    t: TimeIndex
    depth: int
    tol: float
    unique: bool
    law: Optional[Distribution]
    diameter_trace: List[float]
    """Diameter of Delta(t - d, t) for d = 1..depth"""
    delta: DeltaApprox


@dataclass(frozen=True)
class EntranceLaw:
    laws: Dict[TimeIndex, Distribution]
    anchor_sensitivity: float
    """Upper bound of the total variation distance between laws started from any two anchors"""
    recursion_residual: float


def _dedup(rows: np.ndarray, dedup_tol: float) -> List[np.ndarray]:
    kept: List[np.ndarray] = []
    for row in rows:
        if all(total_variation(row, k) > dedup_tol for k in kept):
            kept.append(row)
    return kept


def _extreme_points(rows: List[np.ndarray], dedup_tol: float) -> List[np.ndarray]:
    """Drops rows that lie within dedup_tol of the hull of the remaining rows, a zero tolerance keeps every row"""
    kept = list(rows)
    if dedup_tol <= 0:
        return kept
    k = 0
    while len(kept) > 2 and k < len(kept):
        others = np.array(kept[:k] + kept[k + 1:])
        # a row that sticks out in some coordinate is at least half that far from the hull
        margin = float((kept[k] - others.max(axis=0)).max())
        if margin <= 2 * dedup_tol and hull_distance(kept[k], others) <= dedup_tol:
            del kept[k]
        else:
            k += 1
    return kept


def delta_from_product(pm: ProductMatrix, dedup_tol: Optional[float] = None,
                       tol_stochastic: Optional[float] = None) -> DeltaApprox:
    dedup_tol = tolerances.dedup if dedup_tol is None else dedup_tol
    tol_stochastic = tolerances.stochastic if tol_stochastic is None else tol_stochastic
    kept = _extreme_points(_dedup(pm.matrix, dedup_tol), dedup_tol)
    row_tol = (pm.t - pm.s + 1) * tol_stochastic
    vertices = [Distribution(pm.t, np.clip(v, 0, None), row_tol) for v in kept]
    return DeltaApprox(pm.s, pm.t, vertices, min(dobrushin(pm.matrix), 1.0))


def delta_vertices(model: ChainModel, s: TimeIndex, t: TimeIndex, dedup_tol: Optional[float] = None) -> DeltaApprox:
    return delta_from_product(product(model, s, t), dedup_tol, model.tol_stochastic)


def hull_distance(x: np.ndarray, vertices: np.ndarray, tol: Optional[float] = None) -> float:
    """
    Total variation distance from x to the convex hull of the rows of vertices.

    Up to three vertices the barycentric coordinates are solved exactly, a point outside the hull
    (and any larger vertex set) goes to a linear program.
    """
    tol = tolerances.hull if tol is None else tol
    k, d = vertices.shape
    if x.shape != (d,):
        raise DimensionError(f'Point of shape {x.shape} cannot be compared with vertices of dimension {d}')
    if k == 1:
        return total_variation(x, vertices[0])
    if k <= 3:
        system = np.vstack([vertices.T, np.ones(k)])
        weights = np.linalg.lstsq(system, np.append(x, 1.0), rcond=None)[0]
        if weights.min() >= -tol:
            dist = total_variation(x, weights @ vertices)
            if dist <= tol:
                return dist

    # minimize sum(u) / 2 subject to |x - weights @ vertices| <= u, weights in the simplex
    c = np.concatenate([np.zeros(k), np.full(d, 0.5)])
    a_ub = np.block([[-vertices.T, -np.eye(d)], [vertices.T, -np.eye(d)]])
    b_ub = np.concatenate([-x, x])
    a_eq = np.concatenate([np.ones(k), np.zeros(d)])[None, :]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=(0, None), method='highs')
    if not res.success:
        raise ChainError(f'Distance to hull could not be computed: {res.message}')
    return max(float(res.fun), 0.0)


def vertex_set_distance(a: DeltaApprox, b: DeltaApprox) -> float:
    """Hausdorff distance between two vertex sets in the total variation metric"""
    va, vb = a.vertex_array(), b.vertex_array()
    if va.shape[1] != vb.shape[1]:
        raise DimensionError(f'Vertex sets live in dimensions {va.shape[1]} and {vb.shape[1]}')
    dist = 0.5 * np.abs(va[:, None, :] - vb[None, :, :]).sum(axis=2)
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


def _check_schedule(t: TimeIndex, schedule: Sequence[TimeIndex]) -> None:
    if any(s >= t for s in schedule):
        raise WindowError(f'Schedule entries must be below t = {t}')
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError('Schedule must be strictly decreasing')


def delta_nesting_check(model: ChainModel, t: TimeIndex, schedule: Sequence[TimeIndex],
                        tol: Optional[float] = None) -> NestingReport:
    _check_schedule(t, schedule)
    # exact duplicates only, merged rows would shrink the outer hull
    deltas = [delta_vertices(model, s, t, dedup_tol=0.0) for s in schedule]
    residuals = []
    for outer, inner in zip(deltas, deltas[1:]):
        hull = outer.vertex_array()
        residuals.append(max(hull_distance(v.probs, hull, tol) for v in inner.vertices))
    return NestingReport(t, list(schedule), residuals, [d.diameter for d in deltas])


def _products_on_schedule(model: ChainModel, t: TimeIndex, schedule: Sequence[TimeIndex]) -> List[ProductMatrix]:
    wanted = set(schedule)
    found = {pm.s: pm for pm in backward_products(model, t, t - min(schedule)) if pm.s in wanted}
    return [found[s] for s in schedule]


def limit_matrix(model: ChainModel, t: TimeIndex, schedule: Sequence[TimeIndex],
                 tol: Optional[float] = None) -> LimitMatrixReport:
    """
    Follows P_st along a decreasing schedule of s.

    All probed products must have the same number of rows, the caller selects a constant dimension subsequence.
    """
    tol = tolerances.convergence if tol is None else tol
    _check_schedule(t, schedule)
    if not schedule:
        raise ValueError('Schedule is empty')
    require_valid(model)
    products = _products_on_schedule(model, t, schedule)
    limit = products[-1].matrix

    if len({pm.matrix.shape for pm in products}) > 1:
        LOGGER.warning(f'Limit matrix at t = {t}: schedule mixes dimensions '
                       f'{sorted({pm.rows for pm in products})}')
        return LimitMatrixReport(t, list(schedule), limit, [], False, False, None, True)

    residuals = [max_abs_difference(a.matrix, b.matrix) for a, b in zip(products, products[1:])]
    converged = bool(residuals) and residuals[-1] <= tol
    spread = max_abs_difference(limit.max(axis=0), limit.min(axis=0))
    unique = converged and spread <= tol
    law = None
    if unique:
        law = Distribution(t, limit.mean(axis=0), (t - schedule[-1] + 1) * model.tol_stochastic)
    LOGGER.info(f'Limit matrix at t = {t}: converged = {converged}, unique = {unique}')
    return LimitMatrixReport(t, list(schedule), limit, residuals, converged, unique, law)


def detect_uniqueness(model: ChainModel, t: TimeIndex, tol: Optional[float] = None, s_depth: int = 50,
                      dedup_tol: Optional[float] = None) -> UniquenessReport:
    tol = tolerances.convergence if tol is None else tol
    if s_depth < 1:
        raise ValueError(f'Depth must be positive, got {s_depth}')
    if t - s_depth < model.start or t > model.end:
        raise InfeasibleAnalysisError(f'Window {model.window} does not reach depth {s_depth} below t = {t}')
    require_valid(model)

    trace = []
    deepest: Optional[ProductMatrix] = None
    for pm in backward_products(model, t, s_depth):
        trace.append(min(dobrushin(pm.matrix), 1.0))
        deepest = pm
    assert deepest is not None
    delta = delta_from_product(deepest, dedup_tol, model.tol_stochastic)

    unique = delta.diameter <= tol
    law = None
    if unique:
        centroid = delta.vertex_array().mean(axis=0)
        law = Distribution(t, centroid, (s_depth + 1) * model.tol_stochastic)
    LOGGER.info(f'Uniqueness at t = {t}, depth {s_depth}: diameter {delta.diameter:.3g}, unique = {unique}')
    return UniquenessReport(t, s_depth, tol, unique, law, trace, delta)


def entrance_law(model: ChainModel, anchor: Distribution, t_report: Sequence[TimeIndex]) -> EntranceLaw:
    """
    Entrance law approximated by pushing an anchor distribution forward from the left edge of the window.

    The anchor sensitivity is the diameter of Delta(s_min, min(t_report)).
    """
    if anchor.time != model.start:
        raise WindowError(f'Anchor must be placed at the window start {model.start}, got time {anchor.time}')
    if not t_report:
        raise ValueError('No report times requested')
    if min(t_report) < model.start or max(t_report) > model.end:
        raise WindowError(f'Report times must lie in window {model.window}')
    if len(anchor) != model.dimension(model.start):
        raise DimensionError(f'Anchor has {len(anchor)} entries, '
                             f'but there are {model.dimension(model.start)} states at time {model.start}')
    require_valid(model)

    seq = marginals(model, anchor, max(t_report))
    residual = max((max_abs_difference(a.probs @ model.matrix(a.time).entries, b.probs)
                    for a, b in zip(seq, seq[1:])), default=0.0)
    by_time = {m.time: m for m in seq}
    first = min(t_report)
    if first == model.start:
        sensitivity = 1.0 if len(anchor) > 1 else 0.0
    else:
        sensitivity = min(dobrushin(product(model, model.start, first).matrix), 1.0)
    return EntranceLaw({n: by_time[n] for n in sorted(t_report)}, sensitivity, residual)
