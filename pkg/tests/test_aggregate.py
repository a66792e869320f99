from collections import Counter

import numpy as np
import pytest

from aese.aggregate import (AggregateDensity, CandidateGrid, aggregate_log_norm, build_candidates,
                            criterion_H, fixed_candidates, penalty, select_weights, split_sample)
from aese.expmodel import ModelIndex, series_density
from aese.metrics import kl_divergence
from aese.mle import SampleError, SimplexSample, fit
from aese.quadrature import simplex_grid
from aese.truncation import named_model, sample


@pytest.fixture(scope="module")
def setup():
    data = sample(named_model("beta"), 400, 5)
    part1, part2 = split_sample(data, 0.8, 1)
    cands = [fit(part1, idx).density for idx in fixed_candidates(2, [1, 2, 3, 4]).indices]
    return cands, part2


def test_candidate_formula():
    g = build_candidates(1000, 2, 4)
    # floor(1000^(1/7)) = 2, floor(1000^(1/9)) = 2, then 1, 1
    assert g.degrees == (2, 1)
    assert build_candidates(10 ** 7, 2, 1).degrees == (10,)
    for n in (50, 500, 5000, 10 ** 6):
        assert max(build_candidates(n, 2, 5).degrees) <= int(n ** (1 / 7) + 1e-12)
    with pytest.raises(ValueError):
        build_candidates(100, 2, 0)
    with pytest.raises(ValueError):
        CandidateGrid(2, (0, 1))


def test_fixed_candidates_deduplicate():
    assert fixed_candidates(3, [2, 1, 2]).degrees == (2, 1)
    assert fixed_candidates(3, [2]).indices == [ModelIndex((2, 2, 2))]


def test_split_sizes_and_multiset():
    data = sample(named_model("gumbel"), 100, 0)
    a, b = split_sample(data, 0.8, 3)
    assert (a.n, b.n) == (80, 20)
    key = lambda s: Counter(map(tuple, s.points))
    assert key(a) + key(b) == key(data)
    a2, _ = split_sample(data, 0.8, 3)
    np.testing.assert_array_equal(a.points, a2.points)


def test_split_rejects_tiny_parts():
    with pytest.raises(SampleError):
        split_sample(sample(named_model("gumbel"), 5, 0), 0.8, 0)
    with pytest.raises(ValueError):
        split_sample(sample(named_model("gumbel"), 50, 0), 1.0, 0)


def test_penalty_matches_direct_kl(setup):
    cands, _ = setup
    grid = simplex_grid(2, 48)
    rng = np.random.default_rng(0)
    for _ in range(5):
        lam = rng.dirichlet(np.ones(len(cands)))
        blend = AggregateDensity(cands, lam, aggregate_log_norm(cands, lam))
        direct = sum(w * kl_divergence(blend, c, grid=grid) for w, c in zip(lam, cands))
        assert abs(penalty(cands, lam) - direct) < 1e-8


def test_penalty_vanishes_at_vertices(setup):
    cands, _ = setup
    for m in range(len(cands)):
        assert penalty(cands, np.eye(len(cands))[m]) < 1e-12


def test_criterion_concave_on_segments(setup):
    cands, part2 = setup
    rng = np.random.default_rng(1)
    for _ in range(100):
        a, b = rng.dirichlet(np.ones(len(cands)), size=2)
        mid = criterion_H(cands, (a + b) / 2, part2)
        assert mid >= 0.5 * (criterion_H(cands, a, part2) + criterion_H(cands, b, part2)) - 1e-12


def test_criterion_definition(setup):
    cands, part2 = setup
    lam = np.array([0.1, 0.2, 0.3, 0.4])
    blend = AggregateDensity(cands, lam, aggregate_log_norm(cands, lam))
    direct = np.mean(blend.log_pdf(part2.points)) - 0.5 * penalty(cands, lam)
    assert abs(criterion_H(cands, lam, part2) - direct) < 1e-10


def test_weights_in_simplex_and_beat_vertices(setup):
    cands, part2 = setup
    agg = select_weights(cands, part2)
    assert agg.converged
    assert np.all(agg.weights >= 0) and abs(agg.weights.sum() - 1) < 1e-12
    best_vertex = max(criterion_H(cands, e, part2) for e in np.eye(len(cands)))
    assert criterion_H(cands, agg.weights, part2) >= best_vertex - 1e-9
    assert abs(agg.criterion - criterion_H(cands, agg.weights, part2)) < 1e-12
    g = simplex_grid(2, 32)
    assert abs(g.weights @ agg.pdf(g.points) - 1) < 1e-8


def test_weights_near_optimal(setup):
    cands, part2 = setup
    agg = select_weights(cands, part2)
    rng = np.random.default_rng(2)
    for lam in rng.dirichlet(np.ones(len(cands)), size=50):
        assert criterion_H(cands, lam, part2) <= agg.criterion + 1e-9


def test_single_candidate(setup):
    cands, part2 = setup
    agg = select_weights(cands[:1], part2)
    np.testing.assert_array_equal(agg.weights, [1.0])
    assert abs(agg.log_norm - cands[0].log_norm) < 1e-12


def test_identical_candidates(setup):
    cands, part2 = setup
    agg = select_weights([cands[1]] * 3, part2)
    assert abs(agg.weights.sum() - 1) < 1e-12
    np.testing.assert_allclose(agg.blended.theta, cands[1].theta, atol=1e-12)


def test_duplicate_candidate_keeps_blend(setup):
    cands, part2 = setup
    a = select_weights(cands, part2)
    b = select_weights(cands + [cands[2]], part2)
    assert abs(a.criterion - b.criterion) < 1e-9
    np.testing.assert_allclose(a.blended.theta, b.blended.theta, atol=1e-4)


def test_dominant_vertex_is_selected():
    idx = ModelIndex((2, 2))
    truth = series_density(idx, np.array([0.8, -0.4, 0.5, 0.3]))
    wrong = series_density(idx, np.array([-0.8, 0.4, -0.5, -0.3]))
    from aese.quadrature import simplex_grid as sg
    g = sg(2, 32)
    # validation sample drawn from the truth by inverse weighting of a fine grid
    rng = np.random.default_rng(4)
    p = g.weights * truth.pdf(g.points)
    pts = g.points[rng.choice(p.size, 2000, p=p / p.sum())]
    agg = select_weights([truth, wrong], SimplexSample(pts))
    assert agg.weights[0] > 0.99


def test_text_round_trip(setup):
    cands, part2 = setup
    agg = select_weights(cands, part2)
    back = AggregateDensity.from_text(agg.to_text())
    np.testing.assert_array_equal(back.weights, agg.weights)
    assert abs(back.log_norm - agg.log_norm) < 1e-12
    x = np.array([[0.1, 0.3], [0.5, 0.9]])
    np.testing.assert_allclose(back.log_pdf(x), agg.log_pdf(x), atol=1e-12)
    with pytest.raises(ValueError):
        AggregateDensity.from_text(cands[0].to_text())


def test_weight_validation(setup):
    cands, part2 = setup
    with pytest.raises(ValueError):
        penalty(cands, [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(ValueError):
        penalty(cands, [0.5, 0.5])
