"""Tabular Markov game model, joint policies and environment stepping.

Indices are zero-based throughout: steps ``h = 0..H-1``, states ``0..S-1``.
Joint actions are flattened with a mixed-radix encoding in which agent 1 is
the most significant digit, which is exactly numpy's C-order
``ravel_multi_index`` over ``action_sizes``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import ZeroMarginal

ENCODING = "agent1_most_significant"
MAX_ABS_BETA_H = 30.0
ROW_SUM_TOL = 1e-12


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MGSpec:
    """Immutable description of a finite-horizon general-sum Markov game.

    ``transitions`` has shape ``(H, S, A, S)`` and ``rewards`` has shape
    ``(H, M, S, A)``; ``A`` is the size of the flattened joint action space.
    """

    H: int
    S: int
    action_sizes: tuple
    transitions: np.ndarray
    rewards: np.ndarray
    betas: np.ndarray
    initial_state: int = 0

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.action_sizes)
        object.__setattr__(self, "action_sizes", sizes)
        object.__setattr__(self, "H", int(self.H))
        object.__setattr__(self, "S", int(self.S))
        object.__setattr__(self, "initial_state", int(self.initial_state))
        object.__setattr__(self, "transitions", _frozen(self.transitions))
        object.__setattr__(self, "rewards", _frozen(self.rewards))
        object.__setattr__(self, "betas", _frozen(np.atleast_1d(self.betas)))
        H, S, M, A = self.H, self.S, self.M, self.A
        if self.transitions.shape != (H, S, A, S):
            raise ValueError(
                f"transitions shape {self.transitions.shape} != {(H, S, A, S)}")
        if self.rewards.shape != (H, M, S, A):
            raise ValueError(f"rewards shape {self.rewards.shape} != {(H, M, S, A)}")
        if self.betas.shape != (M,):
            raise ValueError(f"expected {M} betas, got {self.betas.shape}")

    @property
    def M(self) -> int:
        return len(self.action_sizes)

    @property
    def A(self) -> int:
        return int(np.prod(self.action_sizes))

    def encode(self, profile: Sequence[int]) -> int:
        return encode_joint(profile, self.action_sizes)

    def decode(self, a: int) -> tuple:
        return decode_joint(a, self.action_sizes)

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "S": self.S,
            "action_sizes": list(self.action_sizes),
            "betas": [float(b) for b in self.betas],
            "initial_state": self.initial_state,
            "encoding": ENCODING,
            "transitions": self.transitions.tolist(),
            "rewards": self.rewards.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MGSpec":
        enc = doc.get("encoding", ENCODING)
        if enc != ENCODING:
            raise ValueError(f"unsupported joint-action encoding {enc!r}")
        return cls(
            H=doc["H"],
            S=doc["S"],
            action_sizes=tuple(doc["action_sizes"]),
            transitions=np.asarray(doc["transitions"], dtype=float),
            rewards=np.asarray(doc["rewards"], dtype=float),
            betas=np.asarray(doc["betas"], dtype=float),
            initial_state=doc.get("initial_state", 0),
        )

    def to_json(self, path=None, indent=None) -> str:
        text = json.dumps(self.to_dict(), indent=indent)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, text_or_path) -> "MGSpec":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text_or_path) as fh:
                text = fh.read()
        return cls.from_dict(json.loads(text))


def encode_joint(profile: Sequence[int], action_sizes: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(int(a) for a in profile), tuple(action_sizes)))


def decode_joint(a: int, action_sizes: Sequence[int]) -> tuple:
    return tuple(int(x) for x in np.unravel_index(int(a), tuple(action_sizes)))


def validate_spec(spec: MGSpec) -> list[str]:
    """Return every violated game invariant; an empty list means valid."""
    problems = []
    sums = spec.transitions.sum(axis=-1)
    for h, s, a in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)):
        problems.append(
            f"transition row (h={h}, s={s}, a={a}) sums to {sums[h, s, a]!r}")
    for h, s, a, s2 in zip(*np.nonzero(spec.transitions < 0)):
        problems.append(f"negative transition probability at (h={h}, s={s}, a={a}, s'={s2})")
    bad = (spec.rewards < 0) | (spec.rewards > 1) | ~np.isfinite(spec.rewards)
    for h, m, s, a in zip(*np.nonzero(bad)):
        problems.append(
            f"reward {spec.rewards[h, m, s, a]!r} outside [0,1] at (h={h}, m={m}, s={s}, a={a})")
    for m, beta in enumerate(spec.betas):
        if beta == 0 or not np.isfinite(beta):
            problems.append(f"agent {m}: beta must be nonzero")
        elif abs(beta) * spec.H > MAX_ABS_BETA_H:
            problems.append(
                f"agent {m}: |beta|*H = {abs(beta) * spec.H:g} exceeds {MAX_ABS_BETA_H:g}")
    if spec.H < 1:
        problems.append("horizon must be positive")
    if any(n < 1 for n in spec.action_sizes):
        problems.append("every agent needs at least one action")
    if not 0 <= spec.initial_state < spec.S:
        problems.append(f"initial_state {spec.initial_state} out of range")
    return problems


@dataclass(frozen=True, eq=False)
class JointPolicy:
    """Per-(h, s) distribution over flattened joint actions, shape ``(H, S, A)``."""

    dist: np.ndarray
    action_sizes: tuple
    is_product: bool = False

    def __post_init__(self):
        object.__setattr__(self, "action_sizes", tuple(int(n) for n in self.action_sizes))
        object.__setattr__(self, "dist", _frozen(self.dist))
        if self.dist.ndim != 3 or self.dist.shape[-1] != int(np.prod(self.action_sizes)):
            raise ValueError(f"policy shape {self.dist.shape} does not match {self.action_sizes}")

    @property
    def H(self) -> int:
        return self.dist.shape[0]

    @property
    def S(self) -> int:
        return self.dist.shape[1]

    def tensor(self, h: int, s: int) -> np.ndarray:
        """The (h, s) distribution reshaped to one axis per agent."""
        return self.dist[h, s].reshape(self.action_sizes)

    @classmethod
    def from_marginals(cls, marginals: Sequence[np.ndarray]) -> "JointPolicy":
        """Product policy from per-agent marginals, each of shape ``(H, S, A_m)``."""
        marginals = [np.asarray(p, dtype=float) for p in marginals]
        H, S = marginals[0].shape[:2]
        sizes = tuple(p.shape[-1] for p in marginals)
        dist = np.empty((H, S, int(np.prod(sizes))))
        for h in range(H):
            for s in range(S):
                joint = marginals[0][h, s]
                for p in marginals[1:]:
                    joint = np.multiply.outer(joint, p[h, s])
                dist[h, s] = joint.ravel()
        return cls(dist, sizes, is_product=True)

    @classmethod
    def uniform(cls, H: int, S: int, action_sizes: Sequence[int]) -> "JointPolicy":
        A = int(np.prod(action_sizes))
        return cls(np.full((H, S, A), 1.0 / A), action_sizes, is_product=True)

    @classmethod
    def pure(cls, H: int, S: int, action_sizes: Sequence[int], profile) -> "JointPolicy":
        """Every (h, s) plays the same pure joint profile."""
        dist = np.zeros((H, S, int(np.prod(action_sizes))))
        dist[:, :, encode_joint(profile, action_sizes)] = 1.0
        return cls(dist, action_sizes, is_product=True)

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "S": self.S,
            "action_sizes": list(self.action_sizes),
            "encoding": ENCODING,
            "is_product": bool(self.is_product),
            "dist": self.dist.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "JointPolicy":
        return cls(np.asarray(doc["dist"], dtype=float), tuple(doc["action_sizes"]),
                   bool(doc.get("is_product", False)))


def own_marginal(policy: JointPolicy, h: int, s: int, m: int) -> np.ndarray:
    t = policy.tensor(h, s)
    axes = tuple(i for i in range(t.ndim) if i != m)
    return t.sum(axis=axes)


def factorizes(joint: np.ndarray, tol: float = 1e-10) -> bool:
    """Whether a joint tensor equals the outer product of its marginals."""
    prod = None
    for m in range(joint.ndim):
        marg = joint.sum(axis=tuple(i for i in range(joint.ndim) if i != m))
        prod = marg if prod is None else np.multiply.outer(prod, marg)
    return bool(np.max(np.abs(prod - joint)) <= tol)


def validate_policy(policy: JointPolicy, spec: MGSpec | None = None) -> list[str]:
    problems = []
    d = policy.dist
    if spec is not None and (policy.H, policy.S) != (spec.H, spec.S):
        problems.append(f"policy covers (H={policy.H}, S={policy.S}), game has ({spec.H}, {spec.S})")
    if spec is not None and policy.action_sizes != spec.action_sizes:
        problems.append("policy action sizes differ from the game")
    for h, s in zip(*np.nonzero(np.any(d < 0, axis=-1))):
        problems.append(f"negative probability at (h={h}, s={s})")
    sums = d.sum(axis=-1)
    for h, s in zip(*np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)):
        problems.append(f"policy row (h={h}, s={s}) sums to {sums[h, s]!r}")
    if policy.is_product:
        for h in range(policy.H):
            for s in range(policy.S):
                if not factorizes(policy.tensor(h, s)):
                    problems.append(f"policy flagged product but (h={h}, s={s}) is correlated")
    return problems


def marginal_of_others(policy: JointPolicy, h: int, s: int, m: int) -> np.ndarray:
    """Distribution of the other agents' joint action, flattened over ``A_{-m}``."""
    t = policy.tensor(h, s)
    return t.sum(axis=m).ravel()


def conditional_given_own(policy: JointPolicy, h: int, s: int, m: int, a_m: int) -> np.ndarray:
    """Distribution of ``a_{-m}`` given that agent m was recommended ``a_m``."""
    t = np.moveaxis(policy.tensor(h, s), m, 0)
    row = t[a_m].ravel()
    mass = row.sum()
    if mass <= 0:
        raise ZeroMarginal(f"agent {m} action {a_m} has zero probability at (h={h}, s={s})")
    return row / mass


class Transition(NamedTuple):
    h: int
    state: int
    action: int
    rewards: np.ndarray
    next_state: int


@dataclass
class Trajectory:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw for a uniform ``u`` in [0, 1)."""
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    if i >= len(probs):
        i = int(np.flatnonzero(probs > 0)[-1])
    return i


def step(spec: MGSpec, h: int, s: int, a: int, rng: np.random.Generator):
    """Read the reward vector for (h, s, a) and draw the successor state."""
    if not (0 <= h < spec.H and 0 <= s < spec.S and 0 <= a < spec.A):
        raise IndexError(f"(h={h}, s={s}, a={a}) out of range")
    rewards = spec.rewards[h, :, s, a].copy()
    s_next = sample_index(spec.transitions[h, s, a], rng.random())
    return rewards, s_next


def check_game(spec) -> MGSpec:
    """Accept an MGSpec, dict or JSON path/text and return a validated MGSpec."""
    if isinstance(spec, dict):
        spec = MGSpec.from_dict(spec)
    elif not isinstance(spec, MGSpec):
        spec = MGSpec.from_json(spec)
    problems = validate_spec(spec)
    if problems:
        raise ValueError("invalid game: " + "; ".join(problems[:5]))
    return spec
