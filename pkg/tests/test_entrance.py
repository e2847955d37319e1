import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chain.core import ChainModel, DimensionError, InfeasibleAnalysisError, StochasticMatrix, WindowError, \
    delta_distribution, homogeneous_model
from chain.entrance import delta_nesting_check, delta_vertices, detect_uniqueness, entrance_law, hull_distance, \
    limit_matrix, vertex_set_distance
from chain.families import SWAP, alt_dim, permutation2
from chain.helpers import dobrushin, max_abs_difference, total_variation
from tests.strategies import chains, distributions

CONTRACTING = np.array([[0.9, 0.1], [0.2, 0.8]])


def test_permutation_diameter_is_one_at_every_depth():
    model = permutation2((-200, 0))
    report = detect_uniqueness(model, 0, s_depth=200)
    assert report.diameter_trace == [1.0] * 200
    assert not report.unique
    assert report.law is None
    for d in (1, 2, 77, 200):
        assert delta_vertices(model, -d, 0).diameter == 1.0


def test_permutation_parity_schedules():
    model = permutation2((-200, 0))
    even = limit_matrix(model, 0, list(range(-2, -201, -2)))
    odd = limit_matrix(model, 0, list(range(-1, -200, -2)))
    assert even.converged and odd.converged
    assert np.array_equal(even.limit, np.eye(2))
    assert np.array_equal(odd.limit, SWAP)
    assert not even.unique and not odd.unique
    assert vertex_set_distance(delta_vertices(model, -200, 0), delta_vertices(model, -199, 0)) <= 1e-12


def test_alternating_dimension_unique_law():
    model = alt_dim((-50, 0))
    report = detect_uniqueness(model, 0, s_depth=50)
    assert report.unique
    assert np.abs(report.law.probs - [0.5, 0.5]).max() <= 1e-12

    even = limit_matrix(model, 0, list(range(-2, -51, -2)))
    odd = limit_matrix(model, 0, list(range(-1, -50, -2)))
    assert even.unique and odd.unique
    assert np.abs(even.unique_law.probs - [0.5, 0.5]).max() <= 1e-12
    assert odd.limit.shape == (1, 2)

    at_odd = limit_matrix(model, -1, list(range(-2, -51, -2)))
    assert np.array_equal(at_odd.limit, [[1.0], [1.0]])
    assert at_odd.unique


def test_mixed_dimension_schedule_is_flagged():
    report = limit_matrix(alt_dim((-10, 0)), 0, [-1, -2, -3])
    assert report.dimension_mismatch
    assert not report.converged


def test_contraction_diameter_trace():
    model = homogeneous_model(CONTRACTING, (-40, 0))
    report = detect_uniqueness(model, 0, s_depth=40)
    for d, diameter in enumerate(report.diameter_trace, 1):
        assert abs(diameter - 0.7 ** d) <= 1e-10
    assert not report.unique


@pytest.mark.parametrize('d', [5, 10, 20, 40])
def test_entrance_laws_from_different_anchors_agree(d):
    model = homogeneous_model(CONTRACTING, (-d, 0))
    first = entrance_law(model, delta_distribution(1, 2, -d), [0])
    second = entrance_law(model, delta_distribution(2, 2, -d), [0])
    assert total_variation(first.laws[0].probs, second.laws[0].probs) <= 0.7 ** d + 1e-12
    assert abs(first.anchor_sensitivity - 0.7 ** d) <= 1e-10
    assert first.recursion_residual <= 1e-12


def test_anchor_sensitivity_bounds_anchor_disagreement():
    model = homogeneous_model(CONTRACTING, (-30, 0))
    law = entrance_law(model, delta_distribution(1, 2, -30), [-20, -10, 0])
    assert sorted(law.laws) == [-20, -10, 0]
    assert abs(law.anchor_sensitivity - 0.7 ** 10) <= 1e-10


def test_unique_law_is_the_stationary_vector():
    model = homogeneous_model(CONTRACTING, (-80, 0))
    report = detect_uniqueness(model, 0, tol=1e-10, s_depth=80)
    assert report.unique
    assert np.abs(report.law.probs - [2 / 3, 1 / 3]).max() <= 1e-10


def test_detect_uniqueness_needs_deep_window():
    with pytest.raises(InfeasibleAnalysisError):
        detect_uniqueness(permutation2((-10, 0)), 0, s_depth=20)


def test_entrance_law_errors():
    model = homogeneous_model(CONTRACTING, (-5, 0))
    with pytest.raises(WindowError):
        entrance_law(model, delta_distribution(1, 2, -4), [0])
    with pytest.raises(WindowError):
        entrance_law(model, delta_distribution(1, 2, -5), [1])
    with pytest.raises(DimensionError):
        entrance_law(model, delta_distribution(1, 3, -5), [0])


def test_hull_distance():
    vertices = np.eye(3)[:2]
    assert hull_distance(np.array([0.5, 0.5, 0.0]), vertices) <= 1e-12
    assert hull_distance(np.array([0.0, 0.0, 1.0]), vertices) == pytest.approx(1.0, abs=1e-9)
    assert hull_distance(np.array([0.25, 0.25, 0.5]), vertices) == pytest.approx(0.5, abs=1e-9)


def test_hull_distance_with_many_vertices():
    vertices = np.eye(5)[:4]
    assert hull_distance(np.array([0.25, 0.25, 0.25, 0.25, 0.0]), vertices) <= 1e-9
    assert hull_distance(np.eye(5)[4], vertices) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DimensionError):
        hull_distance(np.ones(3) / 3, vertices)


def test_nesting_of_contracting_chain():
    model = homogeneous_model(CONTRACTING, (-20, 0))
    report = delta_nesting_check(model, 0, [-1, -2, -5, -10, -20])
    assert report.max_residual <= 1e-10
    assert report.diameters == sorted(report.diameters, reverse=True)


def test_schedule_must_decrease():
    model = permutation2((-10, 0))
    with pytest.raises(ValueError):
        delta_nesting_check(model, 0, [-2, -1])
    with pytest.raises(WindowError):
        delta_nesting_check(model, 0, [0, -1])


@st.composite
def chain_and_schedule(draw):
    model = draw(chains(max_steps=6, max_dim=3, min_steps=2))
    t = model.end
    depths = draw(st.lists(st.integers(1, t - model.start), min_size=2, max_size=4, unique=True))
    return model, t, [t - d for d in sorted(depths)]


@settings(max_examples=200, deadline=None)
@given(chain_and_schedule())
def test_delta_nesting(data):
    model, t, schedule = data
    report = delta_nesting_check(model, t, schedule)
    assert report.max_residual <= 1e-10
    for outer, inner in zip(report.diameters, report.diameters[1:]):
        assert inner <= outer + 1e-12


def test_rows_inside_the_hull_are_not_vertices():
    model = ChainModel((0, 2), {0: StochasticMatrix(0, np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])),
                                1: StochasticMatrix(1, np.eye(2))})
    delta = delta_vertices(model, 0, 2)
    assert delta.vertex_array().tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert delta.diameter == 1.0


def test_diameter_is_the_dobrushin_coefficient():
    model = homogeneous_model(CONTRACTING, (-6, 0))
    for s in range(-6, 0):
        delta = delta_vertices(model, s, 0)
        assert abs(delta.diameter - dobrushin(np.linalg.matrix_power(CONTRACTING, -s))) <= 1e-12
        assert abs(delta.diameter - 0.7 ** -s) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(chains(max_steps=5, max_dim=3))
def test_vertex_count_bound(model):
    t = model.end
    for s in range(model.start, t):
        delta = delta_vertices(model, s, t)
        smallest = min(model.dimension(u) for u in range(s + 1, t + 1))
        vertices = delta.vertex_array()
        if len(vertices) > 1:
            assert np.linalg.matrix_rank(vertices[1:] - vertices[0], tol=1e-7) <= smallest - 1
        if smallest <= 2:
            assert len(delta.vertices) <= smallest
        pairwise = max((total_variation(a, b) for a in vertices for b in vertices), default=0.0)
        assert abs(pairwise - delta.diameter) <= 1e-8


def test_unique_verdict_agrees_with_limit_matrix():
    model = homogeneous_model(CONTRACTING, (-80, 0))
    tol = 1e-10
    assert detect_uniqueness(model, 0, tol=tol, s_depth=80).unique
    report = limit_matrix(model, 0, list(range(-1, -81, -1)), tol)
    assert max_abs_difference(report.limit.max(axis=0), report.limit.min(axis=0)) <= 2 * tol


@settings(max_examples=200, deadline=None)
@given(chains(max_steps=6, max_dim=3), st.sampled_from([1e-3, 0.05, 0.3]))
def test_unique_verdict_bounds_row_spread(model, tol):
    t = model.end
    report = detect_uniqueness(model, t, tol=tol, s_depth=t - model.start)
    if report.unique:
        limit = limit_matrix(model, t, [model.start], tol).limit
        assert max_abs_difference(limit.max(axis=0), limit.min(axis=0)) <= 2 * tol


@st.composite
def chain_and_anchors(draw):
    model = draw(chains(max_steps=6, max_dim=3))
    size = model.dimension(model.start)
    return model, draw(distributions(size, model.start)), draw(distributions(size, model.start))


@settings(max_examples=200, deadline=None)
@given(chain_and_anchors())
def test_anchor_sensitivity_bounds_random_anchors(data):
    model, first, second = data
    t = model.end
    a = entrance_law(model, first, [t])
    b = entrance_law(model, second, [t])
    assert total_variation(a.laws[t].probs, b.laws[t].probs) <= a.anchor_sensitivity + 1e-12
    assert a.anchor_sensitivity == b.anchor_sensitivity
