import math

import mpmath
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from causalreg.core import (
    EPS_CLIP,
    FeatureGroups,
    LinearModel,
    PenaltyConfig,
    bce_loss,
    gradient,
    grouped_penalty,
    loss_and_gradient,
    penalty_coefficients,
    predict_proba,
    sigmoid,
    total_loss,
)
from causalreg.errors import ConfigError, DataError

mpmath.mp.dps = 50


def mp_sigmoid(z: float) -> float:
    return float(1 / (1 + mpmath.exp(-mpmath.mpf(z))))


def fsum_bce(p, y) -> float:
    """Row-by-row BCE with exact summation, as an independent oracle."""
    terms = []
    for pi, yi in zip(p, y):
        pi = min(max(float(pi), EPS_CLIP), 1 - EPS_CLIP)
        terms.append(-(yi * math.log(pi) + (1 - yi) * math.log(1 - pi)))
    return math.fsum(terms) / len(terms)


def loop_penalty(w, groups, cfg) -> float:
    total = 0.0
    for idx, lam in zip((groups.causal, groups.spurious, groups.remaining), cfg.as_tuple()):
        if idx:
            total += lam / len(idx) * math.fsum(w[i] ** 2 for i in idx)
    return total


def random_instance(rng, n, d):
    X = rng.normal(size=(n, d))
    y = (rng.random(n) < 0.5).astype(float)
    perm = rng.permutation(d)
    cuts = sorted(rng.integers(0, d + 1, size=2))
    groups = FeatureGroups(perm[: cuts[0]], perm[cuts[0] : cuts[1]], perm[cuts[1] :])
    cfg = PenaltyConfig(*(10.0 ** rng.uniform(-3, 2, size=3)))
    model = LinearModel(rng.normal(size=d), rng.normal())
    return X, y, groups, cfg, model


# predict_proba ------------------------------------------------------------


def test_zero_model_gives_half():
    assert predict_proba(LinearModel.zeros(3), np.array([1.0, -2.0, 5.0])) == 0.5


def test_inactive_feature_gives_half():
    assert predict_proba(LinearModel(np.array([1.0]), 0.0), np.array([0.0])) == 0.5


def test_two_feature_row_matches_high_precision_sigmoid():
    model = LinearModel(np.array([2.0, -1.0]), 0.5)
    p = predict_proba(model, np.array([1.0, 1.0]))
    assert p == pytest.approx(mp_sigmoid(1.5), rel=1e-15)


@pytest.mark.parametrize("z", [-745.0, -700.0, -50.0, -1e-8, 0.0, 3.25, 36.0, 700.0, 1e4])
def test_sigmoid_against_mpmath(z):
    got = float(sigmoid(np.array([z]))[0])
    assert 0.0 < got < 1.0
    want = mp_sigmoid(z)
    if want < 1 - 1e-15:
        assert got == pytest.approx(want, rel=1e-14)


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e6, 1e6)))
def test_probabilities_strictly_inside_unit_interval(z):
    p = sigmoid(z)
    assert np.all((p > 0) & (p < 1))


def test_dimension_mismatch_is_an_error():
    with pytest.raises(DataError):
        predict_proba(LinearModel.zeros(3), np.ones(4))


def test_sparse_and_dense_inputs_agree(rng):
    X = (rng.random((6, 5)) < 0.4).astype(float)
    model = LinearModel(rng.normal(size=5), 0.3)
    np.testing.assert_array_equal(predict_proba(model, X), predict_proba(model, sp.csr_matrix(X)))


# bce ----------------------------------------------------------------------


def test_bce_half_is_ln2():
    assert bce_loss([0.5], [1]) == pytest.approx(math.log(2), abs=1e-15)


def test_bce_clamp_bound():
    loss = bce_loss([1.0, 0.0, 1.0], [1, 0, 1])
    assert 0 <= loss <= -math.log1p(-EPS_CLIP) + 1e-18


def test_bce_matches_summation_oracle(rng):
    for _ in range(20):
        p = rng.random(5)
        y = rng.integers(0, 2, 5)
        assert bce_loss(p, y) == pytest.approx(fsum_bce(p, y), abs=1e-12)


def test_bce_empty_is_an_error():
    with pytest.raises(DataError):
        bce_loss([], [])


# penalty ------------------------------------------------------------------


def test_penalty_zero_lambdas():
    g = FeatureGroups.from_labeled(3, [0], [1])
    assert grouped_penalty(LinearModel(np.array([3.0, -4.0, 5.0])), g, PenaltyConfig()) == 0.0


def test_penalty_unit_weights_singletons():
    g = FeatureGroups((0,), (1,), ())
    assert grouped_penalty(LinearModel(np.array([1.0, 1.0])), g, PenaltyConfig(1, 10, 0)) == 11.0


def test_penalty_hand_arithmetic():
    g = FeatureGroups((0,), (1, 2), ())
    value = grouped_penalty(LinearModel(np.array([0.5, -2.0, 3.0])), g, PenaltyConfig(0.01, 100, 0))
    assert value == pytest.approx(0.01 * 0.25 + 50 * 13, abs=1e-12)
    assert value == pytest.approx(650.0025, abs=1e-12)


def test_penalty_ignores_bias():
    g = FeatureGroups.single(2)
    a = grouped_penalty(LinearModel(np.array([1.0, 2.0]), 0.0), g, PenaltyConfig.uniform(3))
    b = grouped_penalty(LinearModel(np.array([1.0, 2.0]), 99.0), g, PenaltyConfig.uniform(3))
    assert a == b


def test_overlapping_groups_are_rejected():
    with pytest.raises(ConfigError):
        FeatureGroups((0, 1), (1,), (2,))


def test_penalty_matches_loop_oracle(rng):
    for _ in range(20):
        _, _, groups, cfg, model = random_instance(rng, 3, int(rng.integers(1, 9)))
        assert grouped_penalty(model, groups, cfg) == pytest.approx(
            loop_penalty(model.weights, groups, cfg), rel=1e-12
        )


@given(st.data())
def test_penalty_permutation_invariant_within_group(data):
    d = data.draw(st.integers(2, 8))
    w = data.draw(arrays(np.float64, d, elements=st.floats(-100, 100)))
    k = data.draw(st.integers(0, d))
    groups = FeatureGroups(tuple(range(k)), (), tuple(range(k, d)))
    cfg = PenaltyConfig(*data.draw(st.tuples(*[st.floats(0, 1000)] * 3)))
    perm = np.concatenate([np.random.default_rng(d).permutation(k), k + np.random.default_rng(k).permutation(d - k)])
    a = grouped_penalty(LinearModel(w), groups, cfg)
    b = grouped_penalty(LinearModel(w[perm]), groups, cfg)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_empty_groups_contribute_nothing():
    g = FeatureGroups((), (), (0, 1))
    assert grouped_penalty(LinearModel(np.array([1.0, 1.0])), g, PenaltyConfig(5, 7, 2)) == 2.0
    assert penalty_coefficients(g, PenaltyConfig(5, 7, 2)).tolist() == [1.0, 1.0]


# total loss -------------------------------------------------------------


def test_total_loss_without_penalty_is_bce(rng):
    X, y, groups, _, model = random_instance(rng, 7, 4)
    assert total_loss(model, X, y, groups, PenaltyConfig()) == bce_loss(predict_proba(model, X), y)


def test_total_loss_single_row_zero_model():
    g = FeatureGroups.single(2)
    assert total_loss(LinearModel.zeros(2), np.ones((1, 2)), [1], g, PenaltyConfig(1, 1, 1)) == pytest.approx(
        math.log(2), abs=1e-15
    )


def test_total_loss_matches_component_oracles(rng):
    for _ in range(10):
        X, y, groups, cfg, model = random_instance(rng, 6, 5)
        p = [mp_sigmoid(float(X[i] @ model.weights + model.bias)) for i in range(6)]
        want = fsum_bce(p, y) + loop_penalty(model.weights, groups, cfg)
        assert total_loss(model, X, y, groups, cfg) == pytest.approx(want, abs=1e-12)


def test_single_group_is_mean_normalized_l2(rng):
    X, y, _, _, model = random_instance(rng, 8, 5)
    lam = 0.7
    want = bce_loss(predict_proba(model, X), y) + lam * np.mean(model.weights**2)
    got = total_loss(model, X, y, FeatureGroups.single(5), PenaltyConfig.uniform(lam))
    assert got == pytest.approx(want, abs=1e-12)


@given(st.integers(0, 10_000), st.floats(0.01, 0.99))
def test_total_loss_is_convex(seed, t):
    rng = np.random.default_rng(seed)
    X, y, groups, cfg, m1 = random_instance(rng, 6, 4)
    m2 = LinearModel(rng.normal(size=4), rng.normal())
    mix = LinearModel(t * m1.weights + (1 - t) * m2.weights, t * m1.bias + (1 - t) * m2.bias)

    def f(m):
        return total_loss(m, X, y, groups, cfg)

    assert f(mix) <= t * f(m1) + (1 - t) * f(m2) + 1e-10


# gradient -------------------------------------------------------------------


def finite_difference(model, X, y, groups, cfg, h=1e-6):
    params = np.append(model.weights, model.bias)
    out = np.empty_like(params)
    for i in range(params.size):
        up, down = params.copy(), params.copy()
        up[i] += h
        down[i] -= h
        f_up = total_loss(LinearModel(up[:-1], up[-1]), X, y, groups, cfg)
        f_down = total_loss(LinearModel(down[:-1], down[-1]), X, y, groups, cfg)
        out[i] = (f_up - f_down) / (2 * h)
    return out


def test_gradient_single_row_example():
    gw, gb = gradient(LinearModel.zeros(1), np.array([[1.0]]), [1], FeatureGroups.single(1), PenaltyConfig())
    assert gw.tolist() == [-0.5]
    assert gb == -0.5


def test_gradient_bias_zero_under_symmetry():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    _, gb = gradient(LinearModel.zeros(2), X, [1, 1, 0, 0], FeatureGroups.single(2), PenaltyConfig())
    assert gb == 0.0


def test_gradient_matches_finite_differences_4x3(rng):
    X, y, groups, cfg, model = random_instance(rng, 4, 3)
    gw, gb = gradient(model, X, y, groups, cfg)
    fd = finite_difference(model, X, y, groups, cfg)
    np.testing.assert_allclose(np.append(gw, gb), fd, rtol=1e-5, atol=1e-8)


def test_gradient_formula(rng):
    X, y, groups, cfg, model = random_instance(rng, 5, 4)
    p = predict_proba(model, X)
    coef = penalty_coefficients(groups, cfg)
    gw, gb = gradient(model, X, y, groups, cfg)
    np.testing.assert_allclose(gw, X.T @ (p - y) / 5 + 2 * coef * model.weights, rtol=1e-13)
    assert gb == pytest.approx(np.mean(p - y), rel=1e-13)


def test_loss_and_gradient_consistent(rng):
    X, y, groups, cfg, model = random_instance(rng, 5, 4)
    loss, gw, gb = loss_and_gradient(model, X, y, groups, cfg)
    assert loss == total_loss(model, X, y, groups, cfg)
    gw2, gb2 = gradient(model, X, y, groups, cfg)
    np.testing.assert_array_equal(gw, gw2)
    assert gb == gb2


def test_gradient_shape_mismatch():
    with pytest.raises(DataError):
        gradient(LinearModel.zeros(2), np.ones((3, 2)), [1, 0], FeatureGroups.single(2), PenaltyConfig())


# groups and configs ---------------------------------------------------------


def test_groups_from_labeled_and_sizes():
    g = FeatureGroups.from_labeled(6, causal=[4, 1], spurious=[0])
    assert (g.causal, g.spurious, g.remaining) == ((1, 4), (0,), (2, 3, 5))
    assert g.sizes == (2, 1, 3)
    assert list(g.labels()) == ["spurious", "causal", "remaining", "remaining", "causal", "remaining"]


def test_groups_remove_reindexes():
    g = FeatureGroups((0, 3), (1, 4), (2, 5))
    assert g.remove([1, 4]) == FeatureGroups((0, 2), (), (1, 3))


def test_groups_round_trip():
    g = FeatureGroups((2,), (0, 1), (3,))
    assert FeatureGroups.from_dict(g.to_dict()) == g


def test_partition_check():
    with pytest.raises(ConfigError):
        FeatureGroups((0,), (), (2,)).check_partition(3)


@pytest.mark.parametrize("bad", [-1.0, float("nan"), float("inf")])
def test_penalty_values_must_be_finite_nonnegative(bad):
    with pytest.raises(ConfigError):
        PenaltyConfig(0, bad, 0)


def test_constraint_admits_zero_remaining():
    assert PenaltyConfig(0, 10, 0).satisfies_ordering()
    assert not PenaltyConfig(1, 1, 1).satisfies_ordering()
    assert not PenaltyConfig(0, 1, 10).satisfies_ordering()
    with pytest.raises(ConfigError):
        PenaltyConfig(1, 0, 0).check_constraint()
