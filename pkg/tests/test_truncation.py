from math import log

import numpy as np
import pytest
from scipy import stats

from aese.quadrature import SimplexGrid
from aese.truncation import (MODELS, Beta, Gumbel, ModelError, Normal, NormalMix, Uniform,
                             build_model, coordinate_marginal, named_model, parse_marginal,
                             rejection_sample, sample)

T = np.linspace(-0.5, 1.5, 41)


def test_normal_matches_scipy():
    np.testing.assert_allclose(Normal(0.8, 0.2).logpdf(T),
                               stats.norm(0.8, np.sqrt(0.2)).logpdf(T), atol=1e-13)


def test_mixture_with_unit_weight_is_first_component():
    mix = NormalMix(0.2, 0.01, 0.6, 0.01, 1.0)
    np.testing.assert_allclose(mix.logpdf(T), Normal(0.2, 0.01).logpdf(T), atol=1e-12)


def test_mixture_is_bimodal():
    t = np.linspace(0, 1, 1001)
    p = np.exp(MODELS["normal_mix"][0].logpdf(t))
    peaks = np.flatnonzero((p[1:-1] > p[:-2]) & (p[1:-1] > p[2:])) + 1
    np.testing.assert_allclose(t[peaks], [0.2, 0.6], atol=2e-3)


def test_beta_matches_scipy():
    b = Beta(3, 5, -1, 2)
    inner = T[(T > -1) & (T < 2)]
    np.testing.assert_allclose(b.logpdf(inner),
                               stats.beta(3, 2, loc=-1, scale=3).logpdf(inner), atol=1e-12)
    assert b.logpdf(np.array([2.0]))[0] == -np.inf
    assert b.logpdf(np.array([2.5]))[0] == -np.inf


def test_gumbel_matches_scipy():
    np.testing.assert_allclose(Gumbel(2.4, 0.7).logpdf(T),
                               stats.gumbel_r(loc=0.7, scale=1 / 2.4).logpdf(T), atol=1e-12)


def test_draws_follow_marginal_laws():
    rng = np.random.default_rng(3)
    cases = [(Normal(0.8, 0.2), stats.norm(0.8, np.sqrt(0.2)).cdf),
             (Beta(1, 6, -1, 2), stats.beta(1, 5, loc=-1, scale=3).cdf),
             (Gumbel(4, 0.3), stats.gumbel_r(loc=0.3, scale=0.25).cdf),
             (Uniform(), stats.uniform().cdf)]
    for law, cdf in cases:
        assert stats.kstest(law.draw(rng, 5000), cdf).pvalue > 0.01


def test_parse_marginal():
    assert parse_marginal("Beta(1,6,-1,2)") == Beta(1, 6, -1, 2)
    assert parse_marginal(" gumbel( 4 , 0.3 ) ") == Gumbel(4, 0.3)
    assert parse_marginal("Normal_Mix(0.2,0.01,0.6,0.01,0.5)") == MODELS["normal_mix"][0]
    assert str(Beta(1, 6, -1, 2)) == "Beta(1,6,-1,2)"
    for bad in ["Beta(1,6)", "Cauchy(0,1)", "Normal 0 1", "Normal(0,-1)", "Beta(3,2,-1,2)"]:
        with pytest.raises(ModelError):
            parse_marginal(bad)


def test_uniform_alpha():
    assert abs(named_model("uniform").alpha - 0.5) < 1e-14
    assert abs(build_model([Uniform()] * 3).alpha - 1 / 6) < 1e-14


@pytest.mark.parametrize("name", ["beta", "gumbel", "normal_mix"])
def test_named_models_normalize(name):
    model = named_model(name)
    g = SimplexGrid(2, panels=64)
    assert abs(g.weights @ model.pdf(g.points) - 1) < 1e-8


def test_alpha_independent_of_oracle():
    # alpha = P(0 <= Z1 <= Z2 <= 1) for independent Z_i, by plain Monte Carlo
    model = named_model("gumbel")
    rng = np.random.default_rng(11)
    z = np.column_stack([m.draw(rng, 400_000) for m in model.marginals])
    hit = np.mean((z[:, 0] >= 0) & (z[:, 0] <= z[:, 1]) & (z[:, 1] <= 1))
    assert abs(hit - model.alpha) < 4 * np.sqrt(model.alpha * (1 - model.alpha) / 400_000)


def test_model_errors():
    with pytest.raises(ModelError):
        named_model("cauchy")
    with pytest.raises(ModelError):
        build_model([Uniform()])
    with pytest.raises(ModelError):
        build_model([Normal(40, 0.01), Normal(40, 0.01)])


def test_seed_determinism():
    model = named_model("beta")
    a, b, c = sample(model, 50, 7), sample(model, 50, 7), sample(model, 50, 8)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_draws_lie_on_simplex():
    pts = sample(named_model("normal_mix"), 2000, 1).points
    assert np.all(pts[:, 0] >= 0) and np.all(pts[:, 1] <= 1) and np.all(pts[:, 0] <= pts[:, 1])


def test_proposal_count_matches_alpha():
    model = named_model("gumbel")
    n = 20000
    _, props = rejection_sample(model, n, np.random.default_rng(5))
    # n-th success of Bernoulli(alpha) trials: mean n/alpha, sd sqrt(n (1-alpha)) / alpha
    a = model.alpha
    assert abs(props - n / a) < 4 * np.sqrt(n * (1 - a)) / a


def test_first_coordinate_marginal_ks():
    model = named_model("beta")
    nodes, dens, cdf = coordinate_marginal(model, 1)
    assert abs(cdf[-1] - 1) < 1e-10
    x = np.concatenate([[0.0], nodes, [1.0]])
    F = np.concatenate([[0.0], cdf, [1.0]])
    pts = sample(model, 10_000, 2).points
    assert stats.kstest(pts[:, 0], lambda t: np.interp(t, x, F)).pvalue > 0.01


def test_density_is_additive():
    model = named_model("gumbel")
    comps, const = model.additive_form()
    x = np.array([[0.1, 0.4], [0.3, 0.9]])
    np.testing.assert_allclose(comps[0](x[:, 0]) + comps[1](x[:, 1]) + const, model.log_pdf(x))
    assert model.log_pdf(np.array([0.5, 0.2])) == -np.inf
    assert abs(model.log_pdf(np.array([0.1, 0.4]))
               - (Gumbel(4, 0.3).logpdf(0.1) + Gumbel(2.4, 0.7).logpdf(0.4) - log(model.alpha))) < 1e-12
