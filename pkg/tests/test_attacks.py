import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import asud_grid_optimum, best_two_symbol_margin, misleading_margins, random_informative_pmfs
from social_attacks.attacks import (
    AttackSpec,
    Distortion,
    _pair_masses,
    asud_attack,
    asud_objectives,
    echo_attack,
    known_divergence_attack,
    materialize_attack,
    misleads_both_states,
    mixed_confidence_attack,
    pure_confidence_attack,
    random_attack,
    select_signal_pair,
)
from social_attacks.engine import classify_limit
from social_attacks.errors import ContractError, FeasibilityError, ModelError, RegimeError
from social_attacks.models import AgentModel, make_bsc, relative_confidence
from social_attacks.topology import MALICIOUS, NORMAL, build_uniform_weights

EPS = 1e-3


def test_select_signal_pair():
    assert select_signal_pair(make_bsc(0.8))[:2] == (0, 1)
    assert select_signal_pair(make_bsc(0.8))[2] == pytest.approx(0.60, abs=1e-15)
    assert select_signal_pair(make_bsc(0.95))[2] == pytest.approx(0.90, abs=1e-15)
    with pytest.raises(ModelError):
        select_signal_pair(make_bsc(0.5))


def test_select_signal_pair_prefers_largest_determinant():
    m = AgentModel([0.5, 0.3, 0.2], [0.2, 0.3, 0.5])
    i, j, d = select_signal_pair(m)
    assert (i, j) == (0, 2)
    assert d == pytest.approx(0.25 - 0.04)


def test_pair_masses_reproduce_coordinates():
    # the worked example: x = (8, -8) on a binary alphabet
    eps1, eps2 = _pair_masses(8.0, -8.0, 1.0)
    L1_hat = np.array([1 - eps2, eps2])
    L2_hat = np.array([eps1, 1 - eps1])
    np.testing.assert_allclose(L1_hat, [3.3535e-4, 0.99966], rtol=1e-4)
    np.testing.assert_allclose(L2_hat, [0.99966, 3.3535e-4], rtol=1e-4)
    assert math.log(eps1 / (1 - eps2)) == pytest.approx(8.0, abs=1e-9)
    assert math.log((1 - eps1) / eps2) == pytest.approx(-8.0, abs=1e-9)
    ok, margins = misleads_both_states(make_bsc(0.8), 0.25, L1_hat, L2_hat, 0.5, 0.5)
    assert ok
    np.testing.assert_allclose(margins, [0.7, 0.7], atol=1e-9)


def test_known_divergence_worked_example():
    m = make_bsc(0.8)
    dist = known_divergence_attack(m, 0.25, 0.5, 0.5, 1e-4)
    p = dist.params
    assert p.vertex == pytest.approx((10 / 3, -10 / 3), abs=1e-12)
    assert p.literal_anchor == pytest.approx((10 / 3, 10 / 3), abs=1e-12)
    assert p.beta == pytest.approx(-2.125)
    assert p.alpha == 1.0
    assert math.log(p.eps1 / (p.alpha - p.eps2)) == pytest.approx(p.x1, abs=1e-9)
    assert math.log((p.alpha - p.eps1) / p.eps2) == pytest.approx(p.x2, abs=1e-9)
    ok, margins = misleads_both_states(m, 0.25, dist.L1, dist.L2, 0.5, 0.5)
    assert ok and min(margins) > 0
    assert min(dist.L1.min(), dist.L2.min()) >= 1e-4


def test_known_divergence_without_normal_divergence():
    dist = known_divergence_attack(make_bsc(0.7), 0.3, 0.0, 0.0)
    ok, margins = misleads_both_states(make_bsc(0.7), 0.3, dist.L1, dist.L2, 0.0, 0.0)
    assert ok and min(margins) > 0
    assert dist.params.x1 > 0 > dist.params.x2


def test_known_divergence_infeasible():
    # a weak adversary with tiny centrality cannot beat large divergences
    with pytest.raises(FeasibilityError, match="smaller epsilon"):
        known_divergence_attack(make_bsc(0.55), 0.05, 2.0, 2.0, 1e-2)


def test_known_divergence_rejects_uninformative():
    with pytest.raises(ContractError):
        known_divergence_attack(make_bsc(0.5), 0.2, 0.1, 0.1)


def test_known_divergence_property_against_oracle():
    rng = np.random.default_rng(77)
    checked = 0
    while checked < 60:
        K = int(rng.integers(2, 5))
        L1, L2 = random_informative_pmfs(rng, K)
        u = rng.uniform(0.05, 0.5)
        S1, S2 = rng.uniform(0, 2, 2)
        if best_two_symbol_margin(L1, L2, u, S1, S2, 1e-4, points=80) <= 0:
            continue
        m = AgentModel(L1, L2)
        dist = known_divergence_attack(m, u, S1, S2, 1e-4)
        margins = misleading_margins(L1, L2, u, dist.L1, dist.L2, S1, S2)
        assert min(margins) > 0
        assert min(dist.L1.min(), dist.L2.min()) >= 1e-4
        assert abs(dist.L1.sum() - 1) <= 1e-12 and abs(dist.L2.sum() - 1) <= 1e-12
        checked += 1


def test_misleads_honest_fails():
    m = make_bsc(0.8)
    ok, margins = misleads_both_states(m, 0.25, m.L1, m.L2, 0.5, 0.5)
    assert not ok
    kl = 0.6 * math.log(4)
    np.testing.assert_allclose(margins, [-0.5 - 0.25 * kl] * 2, atol=1e-12)


def test_misleads_swapped_extreme():
    L1_hat, L2_hat = [0.001, 0.999], [0.999, 0.001]
    ok, margins = misleads_both_states(make_bsc(0.8), 0.25, L1_hat, L2_hat, 0.5, 0.5)
    assert ok
    expected = 0.25 * 0.6 * math.log(999) - 0.5
    np.testing.assert_allclose(margins, [expected] * 2, atol=1e-12)
    assert expected == pytest.approx(0.536, abs=1e-3)


@pytest.mark.parametrize("p", [0.8, 0.95])
def test_mixed_bsc(p):
    d = mixed_confidence_attack(make_bsc(p), (0.5, 0.5), EPS)
    np.testing.assert_allclose(d.L1, [0.001, 0.999], atol=1e-15)
    np.testing.assert_allclose(d.L2, [0.999, 0.001], atol=1e-15)
    assert d.regime == "mixed" and d.clamped == ()


def test_mixed_three_symbols_with_zero_confidence():
    m = AgentModel([0.5, 0.3, 0.2], [0.2, 0.3, 0.5])
    np.testing.assert_allclose(relative_confidence(m), [0.15, 0.0, -0.15], atol=1e-15)
    d = mixed_confidence_attack(m, (0.5, 0.5), EPS)
    np.testing.assert_allclose(d.L1, [EPS, EPS, 0.998], atol=1e-15)
    np.testing.assert_allclose(d.L2, [0.998, EPS, EPS], atol=1e-15)
    assert len(d.clamped) == 1 and "L2[1]" in d.clamped[0]
    lo, hi = asud_grid_optimum(relative_confidence(m), EPS)
    o1, o2 = asud_objectives(relative_confidence(m), d.L1, d.L2)
    assert abs(o1 - lo) <= 1e-3 and abs(o2 - hi) <= 1e-3


def test_mixed_wrong_regime():
    with pytest.raises(RegimeError):
        mixed_confidence_attack(make_bsc(0.8), (0.9, 0.1), EPS)


def test_pure_examples():
    d = pure_confidence_attack(make_bsc(0.8), (0.9, 0.1), EPS)
    np.testing.assert_allclose(d.L1, [0.001, 0.999], atol=1e-15)
    np.testing.assert_allclose(d.L2, [0.875, 0.125], atol=1e-12)
    assert d.regime == "pure"


def test_pure_mirrored_prior():
    # pi = (0.1, 0.9): Z = (-0.1, -0.7), so D1 is empty and the concentrated
    # PMF is L2_hat, with its mass on the symbol of smallest |Z|
    m = make_bsc(0.8)
    np.testing.assert_allclose(relative_confidence(m, (0.1, 0.9)), [-0.1, -0.7], atol=1e-15)
    d = pure_confidence_attack(m, (0.1, 0.9), EPS)
    np.testing.assert_allclose(d.L2, [0.999, 0.001], atol=1e-15)
    np.testing.assert_allclose(d.L1, [0.125, 0.875], atol=1e-12)


def test_pure_uninformative():
    d = pure_confidence_attack(make_bsc(0.5), (0.9, 0.1), EPS)
    np.testing.assert_allclose(d.L1, [0.999, 0.001], atol=1e-15)
    np.testing.assert_allclose(d.L2, [0.5, 0.5], atol=1e-15)


def test_pure_wrong_regime():
    with pytest.raises(RegimeError):
        pure_confidence_attack(make_bsc(0.8), (0.5, 0.5), EPS)


def test_asud_dispatch():
    assert asud_attack(make_bsc(0.8), (0.5, 0.5), EPS).regime == "mixed"
    assert asud_attack(make_bsc(0.8), (0.9, 0.1), EPS).regime == "pure"
    flat = asud_attack(make_bsc(0.5), (0.5, 0.5), EPS)
    assert flat.regime == "pure"
    o1, o2 = asud_objectives([0.0, 0.0], flat.L1, flat.L2)
    assert (o1, o2) == asud_grid_optimum([0.0, 0.0], EPS) == (0.0, 0.0)


def test_asud_matches_grid_oracle():
    rng = np.random.default_rng(314)
    for _ in range(25):
        K = int(rng.integers(2, 4))
        m = AgentModel(rng.dirichlet(np.ones(K)), rng.dirichlet(np.ones(K)))
        pi1 = rng.uniform()
        prior = (pi1, 1 - pi1)
        Z = relative_confidence(m, prior)
        d = asud_attack(m, prior, EPS)
        o1, o2 = asud_objectives(Z, d.L1, d.L2)
        lo, hi = asud_grid_optimum(Z, EPS)
        assert abs(o1 - lo) <= 1e-3
        assert abs(o2 - hi) <= 1e-3


prior_st = st.floats(0.0, 1.0).map(lambda a: (a, 1.0 - a))


@settings(max_examples=150, deadline=None)
@given(data=st.data(), K=st.integers(2, 5), prior=prior_st, eps=st.sampled_from([1e-2, 1e-3, 1e-4]))
def test_asud_floor_and_sum(data, K, prior, eps):
    w = data.draw(st.lists(st.floats(0.0, 1.0), min_size=2 * K, max_size=2 * K))
    w = np.array(w) + 1e-3
    m = AgentModel(w[:K] / w[:K].sum(), w[K:] / w[K:].sum())
    d = asud_attack(m, prior, eps)
    for pmf in (d.L1, d.L2):
        assert pmf.min() >= eps
        assert abs(pmf.sum() - 1) <= 1e-12


@given(p=st.floats(0.01, 0.99).filter(lambda p: abs(p - 0.5) > 1e-6))
def test_mixed_swap_symmetry(p):
    d = mixed_confidence_attack(make_bsc(p), (0.5, 0.5), EPS)
    np.testing.assert_allclose(d.L1, d.L2[::-1], atol=1e-15)
    assert np.argmax(d.L1) == np.argmin(d.L2)


def test_echo():
    d = echo_attack(make_bsc(0.5))
    np.testing.assert_array_equal(d.L1, [0.5, 0.5])
    np.testing.assert_array_equal(d.L2, [0.5, 0.5])
    with pytest.raises(ContractError):
        echo_attack(make_bsc(0.8))


def test_echo_invariance_in_classifier():
    roles = [NORMAL, NORMAL, MALICIOUS, MALICIOUS]
    net = build_uniform_weights(np.ones((4, 4), dtype=bool), roles)
    models = [make_bsc(0.8), make_bsc(0.7), make_bsc(0.9), make_bsc(0.5)]
    u = np.full(4, 0.25)
    attack = materialize_attack("known_divergence", net, models, u)
    assert attack.distortions[3].regime == "echo"
    truth = dict(attack.distortions)
    truth[3] = Distortion(models[3].L1, models[3].L2, "honest")
    swapped = AttackSpec(attack.family, attack.prior, attack.epsilon, truth)
    a = classify_limit(net, u, models, attack)
    b = classify_limit(net, u, models, swapped)
    assert a.margins == b.margins
    assert a.contributions[3] == (0.0, 0.0)


def test_random_attack_properties():
    m = AgentModel([0.2, 0.3, 0.5], [0.5, 0.3, 0.2])
    a = random_attack(m, 1e-3, np.random.default_rng(3))
    b = random_attack(m, 1e-3, np.random.default_rng(3))
    assert np.array_equal(a.L1, b.L1) and np.array_equal(a.L2, b.L2)
    for pmf in (a.L1, a.L2):
        assert pmf.min() >= 1e-3 and abs(pmf.sum() - 1) <= 1e-12
    near = random_attack(m, 0.333, np.random.default_rng(0))
    np.testing.assert_allclose(near.L1, 1 / 3, atol=2e-3)
    AttackSpec("random", epsilon=1e-3, distortions={0: a})


def test_attack_spec_rejects_floor_violation():
    with pytest.raises(ContractError):
        AttackSpec("asud", epsilon=1e-3, distortions={0: Distortion(np.array([1e-4, 1 - 1e-4]), np.array([0.5, 0.5]), "mixed")})


def test_epsilon_floor_checked():
    with pytest.raises(ContractError, match="full-support floor"):
        asud_attack(make_bsc(0.8), (0.5, 0.5), 0.6)


def test_materialize_honest_and_known_divergence():
    net = build_uniform_weights(np.ones((3, 3), dtype=bool), [NORMAL, NORMAL, MALICIOUS])
    models = [make_bsc(0.8)] * 3
    honest = materialize_attack("honest", net, models)
    assert np.array_equal(honest.distortions[2].L1, models[2].L1)
    kd = materialize_attack("known_divergence", net, models, np.full(3, 1 / 3))
    assert kd.epsilon == 1e-4
    S = 2 / 3 * 0.6 * math.log(4)
    ok, _ = misleads_both_states(models[2], 1 / 3, kd.distortions[2].L1, kd.distortions[2].L2, S, S)
    assert ok
