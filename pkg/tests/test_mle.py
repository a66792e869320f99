from math import factorial, log

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aese.basis import basis_family
from aese.expmodel import ModelIndex, log_normalizer, moment_map, series_density
from aese.metrics import kl_divergence
from aese.mle import (SampleError, SimplexSample, empirical_moments, fit, fit_moments,
                      kl_between_series)
from aese.truncation import named_model, sample


def uniform_sample(n, d, seed):
    return SimplexSample(np.sort(np.random.default_rng(seed).random((n, d)), axis=1))


def test_sample_validation_names_row():
    with pytest.raises(SampleError, match="row 1"):
        SimplexSample(np.array([[0.1, 0.2], [0.5, 0.4]]))
    with pytest.raises(SampleError):
        SimplexSample(np.array([[0.1, 1.2]]))
    with pytest.raises(SampleError):
        SimplexSample(np.array([0.1, 0.2]))


def test_csv_round_trip(tmp_path):
    s = uniform_sample(20, 3, 0)
    path = tmp_path / "s.csv"
    s.to_csv(path)
    assert path.read_text().splitlines()[0] == "x1,x2,x3"
    np.testing.assert_array_equal(SimplexSample.from_csv(path).points, s.points)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n0.1,0.2\n")
    with pytest.raises(SampleError):
        SimplexSample.from_csv(bad)


def test_repeated_point_moments():
    x = np.array([0.2, 0.6])
    idx = ModelIndex((3, 2))
    mu = empirical_moments(SimplexSample(np.tile(x, (5, 1))), idx)
    expect = np.concatenate([basis_family(2, 1, 3).table(x[0])[1:],
                             basis_family(2, 2, 2).table(x[1])[1:]])
    np.testing.assert_allclose(mu, expect, atol=1e-14)


def test_uniform_moments_clt_scale():
    n = 4000
    idx = ModelIndex((3, 3))
    hits = 0
    for seed in range(20):
        mu = empirical_moments(uniform_sample(n, 2, seed), idx)
        # each phi has variance d! = 2 under the uniform density
        hits += np.all(np.abs(mu) < 4 * np.sqrt(2) / np.sqrt(n))
    assert hits >= 18


@given(st.integers(0, 1000))
def test_moments_permutation_invariant(seed):
    s = uniform_sample(30, 2, seed)
    perm = np.random.default_rng(seed).permutation(30)
    idx = ModelIndex((2, 2))
    np.testing.assert_allclose(empirical_moments(s, idx),
                               empirical_moments(SimplexSample(s.points[perm]), idx), atol=1e-14)


def test_zero_moments_give_uniform():
    res = fit_moments(np.zeros(4), ModelIndex((2, 2)))
    assert res.converged and res.iterations <= 1
    np.testing.assert_allclose(res.theta, 0, atol=1e-14)


def test_inverse_map_recovery():
    rng = np.random.default_rng(8)
    for m in [(2, 2), (4, 3), (2, 2, 2)]:
        idx = ModelIndex(m)
        theta = rng.uniform(-1.5, 1.5, idx.size)
        res = fit_moments(moment_map(idx, theta), idx)
        assert res.converged
        assert np.max(np.abs(res.theta - theta)) < 1e-6


def test_fit_matches_moments_and_improves_objective():
    model = named_model("gumbel")
    s = sample(model, 500, 3)
    for v in (1, 2, 4):
        idx = ModelIndex.uniform(2, v)
        res = fit(s, idx)
        mu = empirical_moments(s, idx)
        assert res.converged
        assert np.max(np.abs(moment_map(idx, res.theta) - mu)) < 1e-7
        obj = res.theta @ mu - res.density.log_norm
        assert obj >= -log_normalizer(idx, np.zeros(idx.size))


def test_fit_needs_two_points():
    with pytest.raises(SampleError):
        fit(SimplexSample(np.array([[0.1, 0.5]])), ModelIndex((1, 1)))


def test_non_convergence_is_flagged():
    # all mass at one point: the moments sit on the boundary of the moment space
    s = SimplexSample(np.tile([0.0, 1.0], (4, 1)))
    res = fit(s, ModelIndex((2, 2)), max_iter=5)
    assert not res.converged
    assert res.residual >= 1e-8


def test_kl_between_series_identities():
    idx = ModelIndex((2, 2))
    theta = np.array([0.5, -0.3, 0.2, 0.4])
    f = series_density(idx, theta)
    u = series_density(idx, np.zeros(4))
    assert kl_between_series(f, f) == 0.0
    assert abs(kl_between_series(u, f) - (f.log_norm + log(factorial(2)))) < 1e-12
    g = series_density(ModelIndex((1, 3)), np.array([0.1, 0.2, -0.1, 0.3]))
    for p, q in [(f, g), (g, f)]:
        v = kl_between_series(p, q)
        assert v > 0
        assert abs(v - kl_divergence(p, q)) < 1e-7


def test_pythagorean_identity():
    truth = named_model("beta")
    idx = ModelIndex((2, 2))
    # moments of the truth itself, by quadrature
    from aese.quadrature import simplex_grid
    sg = simplex_grid(2, 32)
    w = sg.weights * truth.pdf(sg.points)
    alpha = np.concatenate([w @ basis_family(2, i + 1, 2).table(sg.points[:, i])[:, 1:]
                            for i in range(2)])
    star = fit_moments(alpha, idx).density
    other = series_density(idx, np.array([0.3, 0.1, -0.2, 0.2]))
    lhs = kl_divergence(truth, other, grid=sg)
    rhs = kl_divergence(truth, star, grid=sg) + kl_between_series(star, other)
    assert abs(lhs - rhs) < 1e-6
