import numpy as np
import pytest

from mars_games.exceptions import ParameterError
from mars_games.game import validate_spec
from mars_games.instances import (arm_probabilities, arm_value, bias_instance, from_params,
                                  lower_bound_mg, random_mg)
from mars_games.regret import episode_gaps, phi
from mars_games.risk_dp import best_response, eval_policy, to_value


def test_bias_instance_structure():
    desc = bias_instance(3, [0.2, -0.5, 1.0], 3, 10_000)
    spec = desc.spec
    assert spec.S == 1 and spec.A == 8
    assert validate_spec(spec) == []
    r = phi(3, 1.0) / 100
    assert desc.params["reward"] == pytest.approx(r)
    np.testing.assert_allclose(spec.rewards[0, :, 0, spec.encode((0, 1, 0))], [r, 0, r])
    pol = desc.fixtures["biased_policy"]
    assert pol.dist[0, 0, spec.encode((1, 1, 0))] == 1.0


def test_bias_instance_reward_guard():
    with pytest.raises(ParameterError):
        bias_instance(2, [0.1, 2.0], 3, 4096)
    desc = bias_instance(2, [0.1, 2.0], 3, 4096, check_reward_range=False)
    assert desc.params["check_reward_range"] is False
    assert any(p.startswith("reward ") for p in validate_spec(desc.spec))


def test_bias_gaps_closed_form():
    desc = bias_instance(2, [0.1, 2.0], 3, 10_000)
    gaps = episode_gaps(desc.spec, desc.fixtures["biased_policy"], "cce")
    np.testing.assert_allclose(gaps, [3 * desc.params["reward"], 0.0], atol=1e-12)


@pytest.mark.parametrize("regime,beta,H", [("exp", 1.0, 3), ("exp", -1.0, 4), ("inv_h", 0.2, 9),
                                           ("inv_h", -0.2, 12)])
def test_arm_probability_relations(regime, beta, H):
    p = arm_probabilities(beta, H, 10_000, regime)
    sign = np.sign(beta)
    assert p["p1"] - p["p2"] == pytest.approx(sign * p["p_bar"])
    assert p["q2"] - p["q1"] == pytest.approx(sign * p["p_bar"])
    assert p["p_bar"] == pytest.approx(np.sqrt(p["p2"] * (1 - p["p2"]) / 10_000))


def test_arm_probability_preconditions():
    with pytest.raises(ParameterError):
        arm_probabilities(0.1, 3, 1000, "exp")        # |beta|(H-1) < log 4
    with pytest.raises(ParameterError):
        arm_probabilities(1.0, 9, 1000, "inv_h")      # |beta|(H-1) > log H
    with pytest.raises(ParameterError):
        arm_probabilities(2.0, 5, 10, "exp")          # K < 16 / p2


@pytest.mark.parametrize("beta", [1.0, -1.0])
def test_lower_bound_reduces_to_bandit(beta):
    desc = lower_bound_mg(beta, 3, 2000, machine=1, regime="exp")
    spec = desc.spec
    assert validate_spec(spec) == []
    from mars_games.game import JointPolicy
    pol = JointPolicy.uniform(spec.H, spec.S, spec.action_sizes)
    br = best_response(spec, pol, 0)
    high = desc.params["high_outcome_probs"]
    best = max(arm_value(p, beta, 3) for p in high)
    assert br.value() == pytest.approx(best, abs=1e-12)
    for arm, p in enumerate(high):
        pure = JointPolicy.pure(spec.H, spec.S, spec.action_sizes, (arm,))
        assert to_value(eval_policy(spec, pure, 0), 0, 0) == pytest.approx(arm_value(p, beta, 3))
    # machine 1: arm 1 is optimal for both signs
    assert br.actions[0, 0] == 0


def test_lower_bound_multi_agent():
    desc = lower_bound_mg(2.0, 3, 1000, n_agents=3)
    assert desc.spec.betas.tolist() == [2.0, 1.0, 1.0]
    assert validate_spec(desc.spec) == []


def test_random_mg_seeded_and_sparse():
    a = random_mg(3, 4, 2, (2, 3), (1.0, -1.0), sparsity=0.6).spec
    b = random_mg(3, 4, 2, (2, 3), (1.0, -1.0), sparsity=0.6).spec
    np.testing.assert_array_equal(a.transitions, b.transitions)
    assert validate_spec(a) == []
    assert np.all((a.transitions > 0).sum(axis=-1) >= 1)
    assert (a.transitions == 0).any()


def test_from_params_roundtrip():
    for desc in (bias_instance(2, [0.1, 2.0], 3, 4096, check_reward_range=False),
                 lower_bound_mg(-1.0, 3, 2000, machine=2),
                 random_mg(1, 2, 2, (2, 2), (0.5, 0.5))):
        back = from_params(desc.kind, desc.params)
        np.testing.assert_array_equal(back.spec.transitions, desc.spec.transitions)
        np.testing.assert_array_equal(back.spec.rewards, desc.spec.rewards)
    with pytest.raises(ParameterError):
        from_params("nope", {})
