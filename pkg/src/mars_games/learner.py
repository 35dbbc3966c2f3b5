"""MARS-VI: optimistic/pessimistic exponential value iteration with self-play.

Each episode runs a full backward pass (upper and lower Q estimates with a
sign-dependent bonus, one-step equilibrium per state on signed exponential
payoffs), records the certificate statistic, then executes the joint policy
once and updates visit counts and the empirical kernel.
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .equilibria import KINDS, GameMatrix, solve
from .exceptions import SolverFailure, ZeroCount
from .game import JointPolicy, MGSpec, Trajectory, Transition, check_game, sample_index, step

log = logging.getLogger(__name__)


@dataclass
class LearnerState:
    spec: MGSpec
    K: int
    C: float = 1.0
    delta: float = 0.1
    solver: str = "cce"
    episode: int = 0
    counts: np.ndarray = None        # N_h(s, a), shape (H, S, A)
    next_counts: np.ndarray = None   # N_h(s, a, s'), shape (H, S, A, S)
    P_hat: np.ndarray = None         # empirical kernel, rows of unvisited pairs stay zero
    q_up: np.ndarray = None          # exponential estimates, shape (H, M, S, A)
    q_lo: np.ndarray = None
    Q_up: np.ndarray = None          # log-domain estimates, shape (H, M, S, A)
    Q_lo: np.ndarray = None
    V_up: np.ndarray = None          # shape (H + 1, M, S)
    V_lo: np.ndarray = None
    policy: np.ndarray = None        # shape (H, S, A)

    def __post_init__(self):
        H, S, A, M = self.spec.H, self.spec.S, self.spec.A, self.spec.M
        if self.counts is None:
            self.counts = np.zeros((H, S, A), dtype=np.int64)
            self.next_counts = np.zeros((H, S, A, S), dtype=np.int64)
            self.P_hat = np.zeros((H, S, A, S))
        remaining = (H - np.arange(H))[:, None, None, None]
        betas = self.spec.betas[None, :, None, None]
        self.q_up = np.broadcast_to(np.exp(betas * remaining), (H, M, S, A)).copy()
        self.q_lo = np.ones((H, M, S, A))
        self.Q_up = np.broadcast_to(remaining.astype(float), (H, M, S, A)).copy()
        self.Q_lo = np.zeros((H, M, S, A))
        self.V_up = np.zeros((H + 1, M, S))
        self.V_lo = np.zeros((H + 1, M, S))
        if self.policy is None:
            self.policy = np.full((H, S, A), 1.0 / A)

    @property
    def iota(self) -> float:
        s = self.spec
        return float(np.log(2 * s.S * s.A * s.H * self.K / self.delta))

    def joint_policy(self) -> JointPolicy:
        return JointPolicy(self.policy, self.spec.action_sizes, is_product=self.solver == "ne")


@dataclass
class CertifiedPolicy:
    """Best-so-far policy by the normalized upper-minus-lower value gap."""

    policy: JointPolicy | None = None
    delta_v: float = np.inf
    episode: int = 0
    raw_gap: float = np.inf
    updated: bool = False

    @classmethod
    def initial(cls, H: int) -> "CertifiedPolicy":
        return cls(delta_v=float(H))


def bonus(state: LearnerState, h: int, m: int, s: int, a: int) -> float:
    """Confidence width ``C |e^{beta (H-h)} - 1| sqrt(S iota / N)`` (h zero-based)."""
    n = state.counts[h, s, a]
    if n < 1:
        raise ZeroCount(f"no visits to (h={h}, s={s}, a={a})")
    spec = state.spec
    beta = spec.betas[m]
    return float(state.C * abs(np.expm1(beta * (spec.H - h))) * np.sqrt(spec.S * state.iota / n))


def _truncate(beta, remaining, q_up, q_lo, gamma):
    """Apply the bonus and truncation in the exponential domain; returns log-domain (Q_up, Q_lo)."""
    cap = np.exp(beta * remaining)
    if beta > 0:
        up = np.minimum(q_up + gamma, cap)
        lo = np.maximum(q_lo - gamma, 1.0)
    else:
        up = np.maximum(q_up - gamma, cap)
        lo = np.minimum(q_lo + gamma, 1.0)
    return np.log(up) / beta, np.log(lo) / beta


def q_update(state: LearnerState, h: int, m: int, s: int, a: int):
    """Upper and lower log-domain Q estimates for one visited (h, m, s, a)."""
    spec = state.spec
    beta = spec.betas[m]
    remaining = spec.H - h
    if state.counts[h, s, a] < 1:
        return float(remaining), 0.0
    gamma = bonus(state, h, m, s, a)
    growth = np.exp(beta * spec.rewards[h, m, s, a])
    q_up = growth * (state.P_hat[h, s, a] @ np.exp(beta * state.V_up[h + 1, m]))
    q_lo = growth * (state.P_hat[h, s, a] @ np.exp(beta * state.V_lo[h + 1, m]))
    state.q_up[h, m, s, a], state.q_lo[h, m, s, a] = q_up, q_lo
    up, lo = _truncate(beta, remaining, q_up, q_lo, gamma)
    return float(up), float(lo)


def _q_update_step(state: LearnerState, h: int) -> None:
    """Vectorized q_update over every (m, s, a) at step h."""
    spec = state.spec
    remaining = spec.H - h
    n = state.counts[h]
    visited = n >= 1
    width = np.sqrt(spec.S * state.iota / np.maximum(n, 1))
    for m in range(spec.M):
        beta = spec.betas[m]
        growth = np.exp(beta * spec.rewards[h, m])
        q_up = growth * (state.P_hat[h] @ np.exp(beta * state.V_up[h + 1, m]))
        q_lo = growth * (state.P_hat[h] @ np.exp(beta * state.V_lo[h + 1, m]))
        gamma = state.C * abs(np.expm1(beta * remaining)) * width
        up, lo = _truncate(beta, remaining, q_up, q_lo, gamma)
        state.q_up[h, m] = np.where(visited, q_up, np.exp(beta * remaining))
        state.q_lo[h, m] = np.where(visited, q_lo, 1.0)
        state.Q_up[h, m] = np.clip(np.where(visited, up, remaining), 0.0, remaining)
        state.Q_lo[h, m] = np.clip(np.where(visited, lo, 0.0), 0.0, remaining)


def signed_payoffs(state: LearnerState, h: int, s: int) -> GameMatrix:
    betas = state.spec.betas
    sign = np.where(betas < 0, -1.0, 1.0)[:, None]
    return GameMatrix(sign * np.exp(betas[:, None] * state.Q_up[h, :, s, :]), state.spec.action_sizes)


def backward_pass(state: LearnerState) -> None:
    spec = state.spec
    betas = spec.betas[:, None]
    for h in range(spec.H - 1, -1, -1):
        _q_update_step(state, h)
        remaining = spec.H - h
        for s in range(spec.S):
            g = signed_payoffs(state, h, s)
            try:
                eq = solve(g, state.solver)
            except SolverFailure as exc:
                raise SolverFailure(
                    f"episode {state.episode + 1}, step {h}, state {s}: {exc}") from exc
            pi = eq.x
            state.policy[h, s] = pi
            up = np.log(np.exp(betas * state.Q_up[h, :, s, :]) @ pi) / spec.betas
            lo = np.log(np.exp(betas * state.Q_lo[h, :, s, :]) @ pi) / spec.betas
            state.V_up[h, :, s] = np.clip(up, 0.0, remaining)
            state.V_lo[h, :, s] = np.clip(lo, 0.0, remaining)


def gap_statistic(state: LearnerState) -> tuple[float, float]:
    """Normalized exponential gap ``max_m H (e^{b V_up} - e^{b V_lo}) / (e^{b H} - 1)`` and the raw gap."""
    spec = state.spec
    s1 = spec.initial_state
    b = spec.betas
    up, lo = state.V_up[0, :, s1], state.V_lo[0, :, s1]
    g = spec.H * (np.exp(b * up) - np.exp(b * lo)) / np.expm1(b * spec.H)
    return float(np.max(g)), float(np.max(up - lo))


def certify(state: LearnerState, cert: CertifiedPolicy) -> CertifiedPolicy:
    g, raw = gap_statistic(state)
    if g <= cert.delta_v:
        return CertifiedPolicy(copy.deepcopy(state.joint_policy()), g, state.episode + 1, raw, True)
    return CertifiedPolicy(cert.policy, cert.delta_v, cert.episode, cert.raw_gap, False)


def act_and_record(state: LearnerState, rng: np.random.Generator) -> Trajectory:
    spec = state.spec
    traj = Trajectory()
    s = spec.initial_state
    for h in range(spec.H):
        a = sample_index(state.policy[h, s], rng.random())
        rewards, s_next = step(spec, h, s, a, rng)
        state.counts[h, s, a] += 1
        state.next_counts[h, s, a, s_next] += 1
        state.P_hat[h, s, a] = state.next_counts[h, s, a] / state.counts[h, s, a]
        traj.steps.append(Transition(h, s, a, rewards, s_next))
        s = s_next
    state.episode += 1
    return traj


@dataclass
class RunResult:
    snapshots: list            # (episode, JointPolicy) on the snapshot grid
    certified: CertifiedPolicy
    state: LearnerState
    delta_v: np.ndarray        # Delta_V after each episode's certification, shape (K,)
    gap_stat: np.ndarray       # normalized gap statistic per episode
    raw_gap: np.ndarray        # max_m (V_up - V_lo)(s_1) per episode
    upper_values: np.ndarray   # V_up at (h=1, s_1) per episode, shape (K, M)
    lower_values: np.ndarray
    certified_episodes: list = field(default_factory=list)


def snapshot_grid(K: int, stride: int = 1) -> list[int]:
    grid = list(range(stride, K + 1, stride))
    if not grid or grid[-1] != K:
        grid.append(K)
    return grid


def run(spec: MGSpec, K: int, solver: str = "cce", C: float = 1.0, delta: float = 0.1,
        seed: int = 0, snapshot_stride: int = 1) -> RunResult:
    """Execute K self-play episodes of MARS-VI; deterministic in ``seed``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    if solver not in KINDS:
        raise ValueError(f"unknown solver {solver!r}")
    rng = np.random.default_rng(seed)
    state = LearnerState(spec, K, C=C, delta=delta, solver=solver)
    cert = CertifiedPolicy.initial(spec.H)
    grid = set(snapshot_grid(K, snapshot_stride))
    snapshots, certified_eps = [], []
    M = spec.M
    delta_v, gap_stat, raw_gap = np.empty(K), np.empty(K), np.empty(K)
    upper, lower = np.empty((K, M)), np.empty((K, M))
    for k in range(1, K + 1):
        backward_pass(state)
        cert = certify(state, cert)
        if cert.updated:
            certified_eps.append(k)
        gap_stat[k - 1], raw_gap[k - 1] = gap_statistic(state)
        delta_v[k - 1] = cert.delta_v
        upper[k - 1] = state.V_up[0, :, spec.initial_state]
        lower[k - 1] = state.V_lo[0, :, spec.initial_state]
        if k in grid:
            snapshots.append((k, state.joint_policy()))
        act_and_record(state, rng)
    log.debug("run finished: K=%d solver=%s certified at episode %d (Delta_V=%.4g)",
              K, solver, cert.episode, cert.delta_v)
    return RunResult(snapshots, cert, state, delta_v, gap_stat, raw_gap, upper, lower,
                     certified_eps)


class MARSVI(BaseEstimator):
    """Self-play learner with the usual estimator surface.

    ``fit(game)`` runs ``n_episodes`` episodes on the given Markov game and
    exposes the certified policy and the per-episode policy snapshots as
    fitted attributes.
    """

    def __init__(self, n_episodes=1000, solver="cce", C=1.0, delta=0.1,
                 snapshot_stride=1, random_state=0):
        self.n_episodes = n_episodes
        self.solver = solver
        self.C = C
        self.delta = delta
        self.snapshot_stride = snapshot_stride
        self.random_state = random_state

    def _check_params(self):
        if int(self.n_episodes) < 1:
            raise ValueError("n_episodes must be >= 1")
        if self.solver not in KINDS:
            raise ValueError(f"solver must be one of {KINDS}, got {self.solver!r}")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if int(self.snapshot_stride) < 1:
            raise ValueError("snapshot_stride must be >= 1")

    def fit(self, game, y=None):
        self._check_params()
        spec = check_game(game)
        result = run(spec, int(self.n_episodes), self.solver, self.C, self.delta,
                     self.random_state, int(self.snapshot_stride))
        self.game_ = spec
        self.result_ = result
        self.state_ = result.state
        self.snapshots_ = result.snapshots
        self.certified_policy_ = result.certified.policy
        self.delta_v_ = result.certified.delta_v
        self.certified_episode_ = result.certified.episode
        return self

    def predict(self, h: int, s: int) -> np.ndarray:
        """Joint-action distribution of the certified policy at (h, s)."""
        check_is_fitted(self, "certified_policy_")
        return np.array(self.certified_policy_.dist[h, s])

    def regret(self, kind: str | None = None):
        """Regret ledger of the recorded snapshots (see :mod:`mars_games.regret`)."""
        from .regret import evaluate_snapshots

        check_is_fitted(self, "snapshots_")
        return evaluate_snapshots(self.game_, self.snapshots_, kind or self.solver,
                                  K=int(self.n_episodes))
