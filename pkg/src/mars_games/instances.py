"""Hard-instance and random Markov game generators."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParameterError
from .game import JointPolicy, MGSpec, validate_spec
from .regret import phi

GOOD, BAD = 0, 1


@dataclass(frozen=True, eq=False)
class InstanceDescriptor:
    kind: str
    params: dict
    spec: MGSpec
    fixtures: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def bias_instance(M: int, betas, H: int, K: int, check_reward_range: bool = True) -> InstanceDescriptor:
    """Single-state game where each agent earns ``Phi_H(beta_*)/sqrt(K)`` per step for action g.

    The returned fixtures include ``biased_policy``: agents 1..M-1 play b and
    agent M plays g.
    """
    betas = [float(b) for b in np.atleast_1d(betas)]
    if len(betas) != M:
        raise ParameterError(f"need {M} betas, got {len(betas)}")
    if any(b == 0 for b in betas):
        raise ParameterError("betas must be nonzero")
    phi_star = phi(H, max(betas, key=abs))
    reward = phi_star / np.sqrt(K)
    if check_reward_range and reward > 1:
        raise ParameterError(
            f"reward Phi_H(beta_*)/sqrt(K) = {reward:.6g} exceeds 1; need K >= {phi_star ** 2:.6g}")
    sizes = (2,) * M
    A = 2 ** M
    own = np.indices(sizes).reshape(M, A)
    rewards = np.zeros((H, M, 1, A))
    rewards[:, :, 0, :] = np.where(own == GOOD, reward, 0.0)
    transitions = np.ones((H, 1, A, 1))
    spec = MGSpec(H, 1, sizes, transitions, rewards, betas, 0)
    profile = [BAD] * (M - 1) + [GOOD]
    biased = JointPolicy.pure(H, 1, sizes, profile)
    params = {"M": M, "betas": betas, "H": H, "K": K, "reward": float(reward)}
    if not check_reward_range:
        params["check_reward_range"] = False
    return InstanceDescriptor("bias", params, spec, {"biased_policy": biased})


def arm_probabilities(beta_star: float, H: int, K: int, regime: str) -> dict:
    """Arm parameters ``p1, p2, q1, q2`` and the perturbation ``p_bar``."""
    x = abs(beta_star) * (H - 1)
    if beta_star == 0:
        raise ParameterError("beta_star must be nonzero")
    if regime == "exp":
        if H < 2 or x < np.log(4):
            raise ParameterError("regime 'exp' needs H >= 2 and |beta_*|(H-1) >= log 4")
        p2 = float(np.exp(-x))
    elif regime == "inv_h":
        if H <= 8 or x > np.log(H):
            raise ParameterError("regime 'inv_h' needs H > 8 and |beta_*|(H-1) <= log H")
        p2 = 1.0 / H
    else:
        raise ParameterError(f"unknown regime {regime!r}")
    if K < 16 / p2:
        raise ParameterError(f"K must be at least 16/p2 = {16 / p2:.6g}")
    p_bar = float(np.sqrt(p2 * (1 - p2) / K))
    sign = 1.0 if beta_star > 0 else -1.0
    p1 = p2 + sign * p_bar
    q2 = p2 + 2 * sign * p_bar
    return {"p1": p1, "p2": p2, "q1": p1, "q2": q2, "p_bar": p_bar}


def lower_bound_mg(beta_star: float, H: int, K: int, machine: int = 1, regime: str = "exp",
                   n_agents: int = 1, other_betas=None) -> InstanceDescriptor:
    """Three-state game reducing to a two-armed bandit for the most risk-sensitive agent.

    State 0 is the dummy start (step 1 only), states 1 and 2 are absorbing.
    Agent 1 plays the role of the most risk-sensitive agent; its action at
    step 1 pulls an arm whose high outcome (total reward H-1) leads to state 1.
    """
    if machine not in (1, 2):
        raise ParameterError("machine must be 1 or 2")
    probs = arm_probabilities(beta_star, H, K, regime)
    arms = (probs["p1"], probs["p2"]) if machine == 1 else (probs["q1"], probs["q2"])
    if not all(0 < p <= 0.5 for p in arms):
        raise ParameterError(f"arm probabilities {arms} leave (0, 1/2]")
    if other_betas is None:
        other_betas = [beta_star / 2] * (n_agents - 1)
    other_betas = [float(b) for b in other_betas]
    if len(other_betas) != n_agents - 1:
        raise ParameterError(f"need {n_agents - 1} other betas")
    if any(abs(b) > abs(beta_star) or b == 0 for b in other_betas):
        raise ParameterError("other agents need nonzero |beta| <= |beta_star|")
    betas = [float(beta_star)] + other_betas

    # probability of the H-1 outcome: p for risk seekers, 1-p for risk-averse agents
    high = [p if beta_star > 0 else 1 - p for p in arms]
    sizes = (2,) * n_agents
    A = 2 ** n_agents
    lead = np.indices(sizes).reshape(n_agents, A)[0]
    S = 3
    transitions = np.zeros((H, S, A, S))
    for s in range(S):
        transitions[:, s, :, s] = 1.0
    transitions[0, 0] = 0.0
    for a in range(A):
        p = high[lead[a]]
        transitions[0, 0, a, 1] = p
        transitions[0, 0, a, 2] = 1 - p
    rewards = np.zeros((H, n_agents, S, A))
    rewards[:, 0, 1, :] = 1.0
    rewards[:, 1:, 1, :] = 1.0
    rewards[:, 1:, 2, :] = 1.0
    spec = MGSpec(H, S, sizes, transitions, rewards, betas, 0)
    params = {"beta_star": float(beta_star), "H": H, "K": K, "machine": machine,
              "regime": regime, "n_agents": n_agents, "betas": betas, **probs,
              "arms": list(arms), "high_outcome_probs": high}
    return InstanceDescriptor("lower_bound", params, spec)


def arm_value(p_high: float, beta: float, H: int) -> float:
    """Entropic value of total reward H-1 with probability ``p_high`` and 0 otherwise."""
    return float(np.log(p_high * np.exp(beta * (H - 1)) + 1 - p_high) / beta)


def random_mg(seed: int, S: int, H: int, action_sizes, betas, sparsity: float = 0.0) -> InstanceDescriptor:
    """Random game with uniform rewards and normalized uniform-weight transition rows."""
    if S < 1 or H < 1 or any(n < 1 for n in action_sizes):
        raise ParameterError("sizes must be positive")
    if not 0 <= sparsity < 1:
        raise ParameterError("sparsity must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    sizes = tuple(int(n) for n in action_sizes)
    M, A = len(sizes), int(np.prod(sizes))
    rewards = rng.random((H, M, S, A))
    weights = 1.0 - rng.random((H, S, A, S))   # in (0, 1]
    if sparsity > 0:
        drop = rng.random((H, S, A, S)) < sparsity
        keep = np.argmax(weights, axis=-1)
        np.put_along_axis(drop, keep[..., None], False, axis=-1)
        weights = np.where(drop, 0.0, weights)
    transitions = weights / weights.sum(axis=-1, keepdims=True)
    spec = MGSpec(H, S, sizes, transitions, rewards, [float(b) for b in betas], 0)
    problems = validate_spec(spec)
    if problems:
        raise ParameterError(problems[0])
    params = {"seed": seed, "S": S, "H": H, "action_sizes": list(sizes),
              "betas": [float(b) for b in betas], "sparsity": sparsity}
    return InstanceDescriptor("random", params, spec)


def from_params(kind: str, params: dict) -> InstanceDescriptor:
    """Rebuild a descriptor from its kind and echoed parameters."""
    if kind == "bias":
        return bias_instance(params["M"], params["betas"], params["H"], params["K"],
                             params.get("check_reward_range", True))
    if kind == "lower_bound":
        return lower_bound_mg(params["beta_star"], params["H"], params["K"],
                              params.get("machine", 1), params.get("regime", "exp"),
                              params.get("n_agents", 1), params.get("betas", [None])[1:] or None)
    if kind == "random":
        return random_mg(params["seed"], params["S"], params["H"], params["action_sizes"],
                         params["betas"], params.get("sparsity", 0.0))
    raise ParameterError(f"unknown instance kind {kind!r}")
