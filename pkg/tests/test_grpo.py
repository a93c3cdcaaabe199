import math
import random

import pytest

from kbagym.grpo import GrpoConfig, TokenLogProbs, group_advantages, grpo_objective, kl_penalty, token_surrogate


def test_advantages_all_equal_rewards_are_zero():
    assert group_advantages([0.7] * 8) == [0.0] * 8


def test_advantages_single_winner_hand_arithmetic():
    # Calculator oracle: mean 0.125, population std sqrt(0.875/8);
    # winner = sqrt(7), losers = -1/sqrt(7).
    adv = group_advantages([1, 0, 0, 0, 0, 0, 0, 0])
    assert adv[0] == pytest.approx(math.sqrt(7), abs=1e-12)
    assert adv[0] == pytest.approx(2.6458, abs=1e-4)
    for a in adv[1:]:
        assert a == pytest.approx(-1 / math.sqrt(7), abs=1e-12)
        assert a == pytest.approx(-0.3780, abs=1e-4)


def test_advantages_pair():
    assert group_advantages([1, 0]) == pytest.approx([1.0, -1.0])


def test_advantages_sample_mode():
    adv = group_advantages([1, 0], GrpoConfig(std_mode="sample"))
    # sample std of [1, 0] is sqrt(0.5); advantages shrink accordingly
    assert adv == pytest.approx([0.5 / math.sqrt(0.5), -0.5 / math.sqrt(0.5)])


def test_advantages_contract_error():
    with pytest.raises(ValueError):
        group_advantages([1.0])


def test_advantages_mean_zero_std_one_property():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(2, 16)
        rewards = [rng.random() for _ in range(n)]
        adv = group_advantages(rewards)
        if all(a == 0.0 for a in adv):
            continue
        assert abs(sum(adv) / n) < 1e-9
        std = math.sqrt(sum(a * a for a in adv) / n)
        assert abs(std - 1.0) < 1e-9


def test_advantages_shift_scale_invariance():
    rng = random.Random(13)
    for _ in range(50):
        rewards = [rng.random() for _ in range(8)]
        base = group_advantages(rewards)
        shifted = group_advantages([r + 5.5 for r in rewards])
        scaled = group_advantages([r * 3.25 for r in rewards])
        assert shifted == pytest.approx(base, abs=1e-9)
        assert scaled == pytest.approx(base, abs=1e-9)


# -- token surrogate -------------------------------------------------------------


def lp(new, old=None, ref=None):
    return TokenLogProbs.from_lists(new, old, ref)


def test_clip_arithmetic():
    # rho = 1.5 with positive advantage clips to 1.2; rho = 0.5 with negative
    # advantage clips to -0.8.
    config = GrpoConfig(clip_eps=0.2)
    logp = lp([[math.log(1.5) - 1.0]], [[-1.0]])
    per_traj, _ = token_surrogate(logp, [1.0], config)
    assert per_traj[0] == pytest.approx(1.2)
    logp = lp([[math.log(0.5) - 1.0]], [[-1.0]])
    per_traj, _ = token_surrogate(logp, [-1.0], config)
    assert per_traj[0] == pytest.approx(-0.8)


def test_clip_noop_inside_band():
    config = GrpoConfig(clip_eps=0.2)
    logp = lp([[math.log(1.1) - 1.0]], [[-1.0]])
    per_traj, _ = token_surrogate(logp, [2.0], config)
    assert per_traj[0] == pytest.approx(1.1 * 2.0)


def test_on_policy_objective_equals_mean_advantage():
    config = GrpoConfig(on_policy=True)
    logp = lp([[-1.0, -2.0], [-0.5, -0.5, -0.5]])
    advantages = [0.75, -0.25]
    per_traj, batch = token_surrogate(logp, advantages, config)
    assert per_traj == pytest.approx(advantages)
    assert batch == pytest.approx(sum(advantages) / 2)


def test_on_policy_independent_of_logp_old():
    config = GrpoConfig(on_policy=True)
    new = [[-1.0, -2.0], [-0.5, -0.5]]
    a = token_surrogate(lp(new, [[-9.0, -9.0], [-9.0, -9.0]]), [1.0, -1.0], config)
    b = token_surrogate(lp(new, [[-0.1, -0.2], [-0.3, -0.4]]), [1.0, -1.0], config)
    assert a == b


def test_surrogate_contract_errors():
    with pytest.raises(ValueError):
        token_surrogate(lp([[-1.0]]), [1.0, 2.0])
    with pytest.raises(ValueError):
        TokenLogProbs.from_lists([[-1.0]], [[-1.0, -2.0]])
    with pytest.raises(ValueError):
        TokenLogProbs.from_lists([[0.5]])
    with pytest.raises(ValueError):
        TokenLogProbs.from_lists([[]])


# -- KL penalty -------------------------------------------------------------------


def test_kl_zero_for_identical_policies():
    logp = lp([[-1.0, -2.0]], ref=[[-1.0, -2.0]])
    assert kl_penalty(logp, GrpoConfig(kl_estimator="direct")) == 0.0
    assert kl_penalty(logp, GrpoConfig(kl_estimator="k3")) == 0.0


def test_kl_k3_single_token_calculator_value():
    # logp_ref - logp_new = 0.1 -> e^0.1 - 1.1
    logp = lp([[-1.1]], ref=[[-1.0]])
    assert kl_penalty(logp, GrpoConfig(kl_estimator="k3")) == pytest.approx(math.exp(0.1) - 1.1, abs=1e-9)
    assert kl_penalty(logp, GrpoConfig(kl_estimator="k3")) == pytest.approx(0.005171, abs=1e-6)


def test_kl_k3_nonnegative_property():
    rng = random.Random(17)
    for _ in range(200):
        new = [[-rng.uniform(0, 5) for _ in range(rng.randint(1, 6))]]
        ref = [[-rng.uniform(0, 5) for _ in range(len(new[0]))]]
        assert kl_penalty(lp(new, ref=ref), GrpoConfig(kl_estimator="k3")) >= 0.0


def test_kl_direct_sign():
    logp = lp([[-1.0]], ref=[[-2.0]])
    assert kl_penalty(logp, GrpoConfig(kl_estimator="direct")) == pytest.approx(1.0)


# -- objective ---------------------------------------------------------------------


def test_objective_zero_advantages_reduces_to_kl_term():
    config = GrpoConfig(kl_coeff=0.5, kl_estimator="direct")
    logp = lp([[-1.0], [-1.0]], ref=[[-2.0], [-2.0]])
    value = grpo_objective([([1.0, 1.0], logp)], config)
    assert value == pytest.approx(-0.5 * 1.0)


def test_objective_on_policy_mean_centered():
    config = GrpoConfig(on_policy=True, kl_coeff=0.0)
    logp = lp([[-1.0], [-2.0]])
    assert grpo_objective([([1.0, 0.0], logp)], config) == pytest.approx(0.0)


def test_objective_two_groups_identical_policies():
    config = GrpoConfig()
    g1 = ([1.0, 0.0], lp([[-1.0], [-1.5]]))
    g2 = ([0.5, 0.5], lp([[-0.7], [-0.9]]))
    assert grpo_objective([g1, g2], config) == pytest.approx(0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        GrpoConfig(clip_eps=0.0)
    with pytest.raises(ValueError):
        GrpoConfig(std_mode="robust")
    with pytest.raises(ValueError):
        GrpoConfig(kl_estimator="k1")
