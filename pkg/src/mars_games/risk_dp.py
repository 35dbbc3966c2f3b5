"""Exact entropic-risk dynamic programming.

All recursions run on exponential-domain values ``E_h(s) = E[exp(beta * G_h)]``
where ``G_h`` is the reward-to-go; a single log at the end recovers the
log-domain value ``(1/beta) log E``.  The |beta|*H <= 30 guard on games keeps
every intermediate inside double range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .game import JointPolicy, MGSpec

RANGE_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class ExpValueTable:
    """Exponential-domain values, ``table[h, s]`` for ``h = 0..H`` (row H is all ones)."""

    table: np.ndarray
    agent: int
    beta: float
    reward_max: float = 1.0   # per-step reward ceiling used by the range check

    @property
    def H(self) -> int:
        return self.table.shape[0] - 1

    def value(self, h: int = 0, s: int = 0) -> float:
        return to_value(self, h, s)


@dataclass(frozen=True, eq=False)
class BestResponseResult:
    exp_values: ExpValueTable
    actions: np.ndarray  # (H, S) own action of the deviator

    def value(self, s: int = 0) -> float:
        return to_value(self.exp_values, 0, s)


@dataclass(frozen=True, eq=False)
class BestModificationResult:
    exp_values: ExpValueTable
    modification: np.ndarray  # (H, S, A_m): recommended own action -> played action

    def value(self, s: int = 0) -> float:
        return to_value(self.exp_values, 0, s)


def _continuation(spec: MGSpec, h: int, m: int, E_next: np.ndarray) -> np.ndarray:
    """``exp(beta r_{h,m}(s,a)) * sum_s' P_h(s'|s,a) E_{h+1}(s')`` as an (S, A) array."""
    beta = spec.betas[m]
    return np.exp(beta * spec.rewards[h, m]) * (spec.transitions[h] @ E_next)


def _reward_max(spec: MGSpec, m: int) -> float:
    # games built with the reward-range check disabled may exceed 1
    return max(1.0, float(spec.rewards[:, m].max(initial=0.0)))


def _opt_index(values: np.ndarray, beta: float, axis: int = 0) -> np.ndarray:
    # exact ties resolve to the lowest index (argmax/argmin return the first hit)
    return np.argmax(values, axis=axis) if beta > 0 else np.argmin(values, axis=axis)


def _split_own(x: np.ndarray, sizes: tuple, m: int) -> np.ndarray:
    """Reshape a flat joint-action vector to ``(A_m, A_{-m})``."""
    t = np.moveaxis(x.reshape(sizes), m, 0)
    return t.reshape(sizes[m], -1)


def eval_policy(spec: MGSpec, policy: JointPolicy, m: int) -> ExpValueTable:
    H, S = spec.H, spec.S
    E = np.ones((H + 1, S))
    for h in range(H - 1, -1, -1):
        term = _continuation(spec, h, m, E[h + 1])
        E[h] = np.einsum("sa,sa->s", policy.dist[h], term)
    return ExpValueTable(E, m, float(spec.betas[m]), _reward_max(spec, m))


def best_response(spec: MGSpec, policy: JointPolicy, m: int) -> BestResponseResult:
    """Best deterministic Markov response of agent m to the others' per-state marginal."""
    H, S, sizes = spec.H, spec.S, spec.action_sizes
    beta = float(spec.betas[m])
    B = np.ones((H + 1, S))
    actions = np.zeros((H, S), dtype=int)
    for h in range(H - 1, -1, -1):
        term = _continuation(spec, h, m, B[h + 1])
        for s in range(S):
            others = _split_own(policy.dist[h, s], sizes, m).sum(axis=0)
            per_action = _split_own(term[s], sizes, m) @ others
            b = int(_opt_index(per_action, beta))
            actions[h, s] = b
            B[h, s] = per_action[b]
    return BestResponseResult(ExpValueTable(B, m, beta, _reward_max(spec, m)), actions)


def best_modification(spec: MGSpec, policy: JointPolicy, m: int) -> BestModificationResult:
    """Best strategy modification of agent m against a (possibly correlated) policy."""
    H, S, sizes = spec.H, spec.S, spec.action_sizes
    beta = float(spec.betas[m])
    Am = sizes[m]
    W = np.ones((H + 1, S))
    psi = np.tile(np.arange(Am), (H, S, 1))
    for h in range(H - 1, -1, -1):
        term = _continuation(spec, h, m, W[h + 1])
        for s in range(S):
            joint = _split_own(policy.dist[h, s], sizes, m)   # (recommended, a_-m)
            swap = joint @ _split_own(term[s], sizes, m).T    # (recommended, played)
            total = 0.0
            for rec in range(Am):
                if joint[rec].sum() <= 0:
                    continue
                b = int(_opt_index(swap[rec], beta))
                psi[h, s, rec] = b
                total += swap[rec, b]
            W[h, s] = total
    return BestModificationResult(ExpValueTable(W, m, beta, _reward_max(spec, m)), psi)


def to_value(table: ExpValueTable, h: int, s: int) -> float:
    """Log-domain value ``(1/beta) log E_h(s)`` with a range check on ``E``."""
    E = float(table.table[h, s])
    edge = np.exp(table.beta * table.reward_max * (table.H - h))
    lo, hi = min(1.0, edge), max(1.0, edge)
    if not (lo - RANGE_SLACK * max(1.0, lo) <= E <= hi + RANGE_SLACK * hi):
        raise DomainError(f"exponential value {E!r} outside [{lo!r}, {hi!r}] at (h={h}, s={s})")
    return float(np.log(E) / table.beta)


def values(spec: MGSpec, policy: JointPolicy, m: int, s: int | None = None):
    """Convenience triple (policy value, best-response value, best-modification value)."""
    s = spec.initial_state if s is None else s
    return (
        to_value(eval_policy(spec, policy, m), 0, s),
        best_response(spec, policy, m).value(s),
        best_modification(spec, policy, m).value(s),
    )
