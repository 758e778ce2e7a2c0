import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from truncmean.distributions import (
    DiagonalGaussian,
    DiscreteAtomic,
    IsotropicGaussian,
    Pareto,
    PiecewiseUniform,
    StudentT,
    directional_moment_exact,
    sample,
)
from truncmean.errors import SamplingError, SpecError
from truncmean.oracle import exact_median_1d, exact_truncated_law
from truncmean.rng import stream
from truncmean.truncation import (
    AdversaryInstance,
    TruncationRule,
    adversary_from_dict,
    center_hollowing_adversary,
    full_space,
    gaussian_halfspace_variance,
    halfspace_adversary,
    impossibility_adversary,
    sharpness_construction,
    slab_rule,
    truncated_sampler,
)

# E[Z | Z <= z_0.9] = -phi(z_0.9) / 0.9, evaluated at 30 digits with mpmath
GAUSS_SHIFT_EPS01 = -0.194998146591652


def test_rule_epsilon_range():
    with pytest.raises(SpecError):
        TruncationRule(lambda x: x[:, 0] < 0, 0.6)
    with pytest.raises(SpecError):
        TruncationRule(lambda x: x[:, 0] < 0, -0.1)
    TruncationRule(lambda x: x[:, 0] < 0, 0.6, severe=True)
    with pytest.raises(SpecError):
        TruncationRule(lambda x: x[:, 0] < 0, 1.0, severe=True)


def test_point_mass_under_halfline():
    inst = AdversaryInstance(DiscreteAtomic.point_mass([0.0]), slab_rule([1.0], [(-math.inf, 0.0)], 0.0))
    batch = truncated_sampler(inst, 4, stream(1, 0))
    np.testing.assert_array_equal(batch.data, np.zeros((4, 1)))


@pytest.mark.parametrize("d", [1, 3])
def test_impossibility_truncated_draws_are_zero(d):
    h1, h0 = impossibility_adversary(0.04, 2.0, d)
    x = truncated_sampler(h1, 5000, stream(2, d)).data
    assert set(np.unique(x)) == {0.0}
    assert h0.true_mean().tolist() == [0.0] * d


def test_impossibility_parameters():
    h1, _ = impossibility_adversary(0.04, 2.0)
    assert sorted(zip(h1.base.weights, h1.base.points[:, 0])) == [(0.04, 5.0), (0.96, 0.0)]
    assert h1.base.true_mean()[0] == pytest.approx(0.2)
    assert h1.exact_survival_mass == pytest.approx(0.96)
    h1, _ = impossibility_adversary(0.25, 2.0)
    assert h1.base.points[:, 0].tolist() == [0.0, 2.0]
    assert h1.base.true_mean()[0] == pytest.approx(0.5)


def test_full_space_sampler_matches_base():
    g = IsotropicGaussian((0.0,))
    inst = AdversaryInstance(g, full_space(), g.true_mean(), 1.0)
    a = truncated_sampler(inst, 100_000, stream(3, 0)).data[:, 0]
    b = sample(g, 100_000, stream(3, 1)).data[:, 0]
    res = stats.ks_2samp(a, b)
    crit = 1.628 * math.sqrt(2 / 100_000)  # 1% two-sample critical value
    assert res.statistic < crit


def test_sharpness_example():
    inst = sharpness_construction(0.25, 0.6, 2.0)
    assert inst.params["eta"] == pytest.approx(0.25)
    assert inst.params["alpha_gap"] == pytest.approx(0.1)
    assert inst.base.segments == ((-2.25, -2.0), (-0.25, 0.25), (2.0, 2.25))
    assert inst.exact_survival_mass == pytest.approx(0.4)
    med = exact_median_1d(exact_truncated_law(inst.base, inst.rule))
    assert med == pytest.approx(2.05)
    assert med >= 2.0


@settings(max_examples=40, deadline=None)
@given(xi=st.floats(0.01, 0.49), gap=st.floats(0.01, 0.45), R=st.floats(1.01, 10.0))
def test_sharpness_construction_invariants(xi, gap, R):
    eps = min(2 * xi + gap, 0.99)
    if eps <= 2 * xi:
        return
    inst = sharpness_construction(xi, eps, R)
    assert inst.base.true_mean()[0] == pytest.approx(0.0, abs=1e-12)
    assert exact_median_1d(inst.base) == pytest.approx(0.0, abs=1e-12)
    assert inst.exact_survival_mass >= 1 - eps - 1e-12
    tl = exact_truncated_law(inst.base, inst.rule)
    assert exact_median_1d(tl) > R
    assert tl.true_mean()[0] == pytest.approx(inst.exact_truncated_mean[0], rel=1e-9)


def test_sharpness_base_regularity():
    # unit density on [-xi, xi] around the median: c = 1, r = xi, c r = xi
    inst = sharpness_construction(0.25, 0.6, 2.0)
    marg = inst.base.centered_marginal()
    assert all(marg.pdf(t) == 1.0 for t in np.linspace(-0.25, 0.25, 11))


def test_sharpness_range_errors():
    with pytest.raises(SpecError):
        sharpness_construction(0.5, 1.2, 2.0)
    with pytest.raises(SpecError):
        sharpness_construction(0.25, 0.4, 2.0)
    with pytest.raises(SpecError):
        sharpness_construction(0.25, 0.6, 1.0)


def test_halfspace_gaussian_shift():
    val, _ = integrate.quad(lambda z: z * stats.norm.pdf(z), -np.inf, stats.norm.ppf(0.9))
    assert val / 0.9 == pytest.approx(GAUSS_SHIFT_EPS01, rel=1e-10)
    inst = halfspace_adversary(IsotropicGaussian((0.0,)), 0.1, [1.0])
    assert inst.exact_truncated_mean[0] == pytest.approx(GAUSS_SHIFT_EPS01, rel=1e-10)
    assert inst.exact_survival_mass == pytest.approx(0.9)


def test_halfspace_vanishes_at_zero():
    g = IsotropicGaussian((1.0, 2.0))
    np.testing.assert_allclose(halfspace_adversary(g, 0.0, [1.0, 0.0]).exact_truncated_mean, [1.0, 2.0])
    small = halfspace_adversary(g, 1e-9, [1.0, 0.0]).exact_truncated_mean
    assert np.linalg.norm(small - g.true_mean()) < 1e-7


def halfspace_cases():
    return [
        IsotropicGaussian((0.0, 0.0), sigma=2.0),
        DiagonalGaussian((1.0, -1.0), (1.0, 3.0)),
        StudentT((0.0, 0.0), df=3.0),
        StudentT((0.0,), df=4.0, scale=0.5),
        Pareto((0.0,), tail=3.0),
        PiecewiseUniform.uniform(-1.0, 1.0),
    ]


@pytest.mark.parametrize("spec", halfspace_cases(), ids=lambda s: s.family)
@pytest.mark.parametrize("eps", [0.001, 0.01, 0.1, 0.3, 0.5])
def test_halfspace_shift_within_moment_envelope(spec, eps):
    inst = halfspace_adversary(spec, eps, np.eye(spec.dimension)[0])
    shift = np.linalg.norm(inst.exact_truncated_mean - spec.true_mean())
    for p in (2.0, 3.0, 4.0, 8.0):
        nu = directional_moment_exact(spec, p)
        if nu is None or not math.isfinite(nu):
            continue
        assert shift <= 2 * nu * eps ** (1 - 1 / p) + 1e-12


@pytest.mark.parametrize("spec", halfspace_cases()[1:5], ids=lambda s: s.family)
def test_halfspace_sampler_mass_and_mean(spec):
    eps = 0.1
    d = spec.dimension
    inst = halfspace_adversary(spec, eps, np.eye(d)[0])
    N = 100_000
    base = spec.draw(N, stream(4, 0))
    m = inst.exact_survival_mass
    rate = np.mean(inst.rule.contains(base))
    assert abs(rate - m) <= 3 * math.sqrt(m * (1 - m) / N)
    x = truncated_sampler(inst, 200_000, stream(4, 1)).data
    se = np.sqrt(x.var(axis=0) / x.shape[0])
    assert np.all(np.abs(x.mean(axis=0) - inst.exact_truncated_mean) <= 5 * se)


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.3, 0.5])
def test_gaussian_truncated_variance_bound(eps):
    for sigma in (0.5, 1.0, 3.0):
        var = gaussian_halfspace_variance(eps, sigma)
        assert 0 < var <= sigma**2 / (1 - eps) ** 2
    val, _ = integrate.quad(lambda z: z * z * stats.norm.pdf(z), -np.inf, stats.norm.isf(eps))
    m, _ = integrate.quad(lambda z: z * stats.norm.pdf(z), -np.inf, stats.norm.isf(eps))
    assert gaussian_halfspace_variance(eps) == pytest.approx(val / (1 - eps) - (m / (1 - eps)) ** 2, rel=1e-9)


def test_center_hollowing_uniform():
    base = PiecewiseUniform.uniform(-0.5, 0.5)
    inst = center_hollowing_adversary(base, 0.2)
    assert inst.rule.intervals[1][0] == pytest.approx(0.2)
    assert inst.exact_survival_mass == pytest.approx(0.8)
    med = exact_median_1d(exact_truncated_law(base, inst.rule))
    # half the mass sits below 0 out of a kept total of 0.8, so the median is at -0.1
    assert med == pytest.approx(-0.1)
    assert abs(med) <= 0.2 / 1.0


def test_center_hollowing_zero_is_full_space():
    inst = center_hollowing_adversary(IsotropicGaussian((0.0,)), 0.0)
    assert inst.exact_survival_mass == 1.0
    assert inst.rule.contains(np.linspace(-5, 5, 11)[:, None]).all()


@pytest.mark.parametrize("spec", [IsotropicGaussian((0.0, 0.0)), StudentT((0.0,), df=3.0),
                                  DiscreteAtomic(((-1.0,), (0.0,), (1.0,), (2.0,)), (0.2, 0.3, 0.3, 0.2))],
                         ids=lambda s: s.family)
def test_center_hollowing_mass_matches_sampler(spec):
    inst = center_hollowing_adversary(spec, 0.1)
    N = 100_000
    base = spec.draw(N, stream(5, 0))
    m = inst.exact_survival_mass
    assert abs(np.mean(inst.rule.contains(base)) - m) <= 3 * math.sqrt(m * (1 - m) / N) + 1e-12
    assert m >= 0.9 - 1e-12


def test_sampler_cap_detects_misdeclared_epsilon():
    g = IsotropicGaussian((0.0,))
    rule = slab_rule([1.0], [(3.0, math.inf)], 0.1)
    with pytest.raises(SamplingError):
        truncated_sampler(AdversaryInstance(g, rule), 100, stream(6, 0))


def test_instance_rejects_mass_below_promise():
    with pytest.raises(SpecError):
        AdversaryInstance(IsotropicGaussian((0.0,)), full_space(), None, 0.8)


@pytest.mark.parametrize("make", [
    lambda: impossibility_adversary(0.04, 2.0, 2)[0],
    lambda: sharpness_construction(0.25, 0.6, 2.0),
    lambda: halfspace_adversary(StudentT((0.0, 1.0), df=3.0), 0.05, [1.0, 0.0]),
    lambda: center_hollowing_adversary(IsotropicGaussian((0.0, 0.0)), 0.05),
])
def test_adversary_round_trip(make):
    inst = make()
    again = adversary_from_dict(inst.to_dict())
    np.testing.assert_allclose(again.exact_truncated_mean, inst.exact_truncated_mean)
    assert again.exact_survival_mass == inst.exact_survival_mass
    x = np.linspace(-3, 3, 25)[:, None] * np.ones((1, inst.base.dimension))
    np.testing.assert_array_equal(again.rule.contains(x), inst.rule.contains(x))


def test_custom_rule_not_serializable():
    inst = AdversaryInstance(IsotropicGaussian((0.0,)), TruncationRule(lambda x: x[:, 0] < 1, 0.2))
    with pytest.raises(SpecError):
        inst.to_dict()
