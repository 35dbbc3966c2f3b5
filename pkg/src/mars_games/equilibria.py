"""One-step normal-form equilibrium solvers (NE, CE, CCE) and a verifier.

Payoffs are maximized as given; the learner passes signed exponential values
so that maximizing them maximizes each agent's entropic value.
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import SolverFailure, Unsupported
from .game import encode_joint, factorizes
from .lp import lp_solve

Kind = Literal["ne", "ce", "cce"]
KINDS = ("ne", "ce", "cce")
EQ_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GameMatrix:
    """Per-agent payoffs ``payoffs[m, a]`` over flattened joint actions."""

    payoffs: np.ndarray
    action_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.action_sizes)
        object.__setattr__(self, "action_sizes", sizes)
        u = np.array(self.payoffs, dtype=float).reshape(len(sizes), -1)
        if u.shape[1] != int(np.prod(sizes)):
            raise ValueError(f"payoff width {u.shape[1]} does not match {sizes}")
        if not np.all(np.isfinite(u)):
            raise ValueError("payoffs must be finite")
        object.__setattr__(self, "payoffs", u)

    @property
    def M(self) -> int:
        return len(self.action_sizes)

    @property
    def A(self) -> int:
        return self.payoffs.shape[1]

    def tensor(self, m: int) -> np.ndarray:
        return self.payoffs[m].reshape(self.action_sizes)

    @classmethod
    def from_tensors(cls, *tensors) -> "GameMatrix":
        sizes = np.shape(tensors[0])
        return cls(np.stack([np.asarray(t, dtype=float).ravel() for t in tensors]), sizes)

    def to_json(self) -> str:
        return json.dumps({"M": self.M, "action_sizes": list(self.action_sizes),
                           "payoffs": self.payoffs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GameMatrix":
        doc = json.loads(text)
        return cls(np.asarray(doc["payoffs"], dtype=float), tuple(doc["action_sizes"]))


@dataclass(frozen=True, eq=False)
class EquilibriumDist:
    x: np.ndarray
    kind: str
    violation: float


@functools.lru_cache(maxsize=None)
def _deviation_index(sizes: tuple, m: int, b: int) -> np.ndarray:
    """Flat index of ``(b, a_{-m})`` for every joint action ``a``."""
    digits = np.indices(sizes).reshape(len(sizes), -1).copy()
    digits[m] = b
    idx = np.ravel_multi_index(tuple(digits), sizes)
    idx.setflags(write=False)
    return idx


def _deviation_payoffs(g: GameMatrix, m: int, b: int) -> np.ndarray:
    """``u_m(b, a_{-m})`` laid out over the full joint index ``a``."""
    return g.payoffs[m][_deviation_index(g.action_sizes, m, b)]


@functools.lru_cache(maxsize=None)
def _own_actions(sizes: tuple, m: int) -> np.ndarray:
    own = np.indices(sizes)[m].ravel()
    own.setflags(write=False)
    return own


def _own_index(g: GameMatrix, m: int) -> np.ndarray:
    return _own_actions(g.action_sizes, m)


def cce_constraints(g: GameMatrix) -> np.ndarray:
    """Rows ``r`` with ``r @ x <= 0`` iff no fixed deviation is profitable."""
    rows = []
    for m in range(g.M):
        for b in range(g.action_sizes[m]):
            rows.append(_deviation_payoffs(g, m, b) - g.payoffs[m])
    return np.array(rows)


def ce_constraints(g: GameMatrix) -> np.ndarray:
    """Rows ``r`` with ``r @ x <= 0`` iff no recommendation swap is profitable."""
    rows = []
    for m in range(g.M):
        own = _own_index(g, m)
        for rec in range(g.action_sizes[m]):
            mask = own == rec
            for b in range(g.action_sizes[m]):
                if b == rec:
                    continue
                rows.append(np.where(mask, _deviation_payoffs(g, m, b) - g.payoffs[m], 0.0))
    return np.array(rows).reshape(-1, g.A)


def _agent_scales(g: GameMatrix) -> np.ndarray:
    spread = g.payoffs.max(axis=1) - g.payoffs.min(axis=1)
    return np.where(spread > 0, spread, 1.0)


def _solve_lp(g: GameMatrix, kind: str) -> EquilibriumDist:
    if kind == "cce":
        rows, owners = cce_constraints(g), np.repeat(np.arange(g.M), g.action_sizes)
    else:
        rows = ce_constraints(g)
        owners = np.repeat(np.arange(g.M), [n * (n - 1) for n in g.action_sizes])
    # each agent's rows are rescaled by its payoff spread; positive scaling keeps the polytope
    if len(rows):
        rows = rows / _agent_scales(g)[owners][:, None]
    welfare = g.payoffs.sum(axis=0)
    top = np.abs(welfare).max()
    c = welfare / top if top > 0 else welfare
    res = lp_solve(c, A_ub=rows if len(rows) else None,
                   b_ub=np.zeros(len(rows)) if len(rows) else None,
                   A_eq=np.ones((1, g.A)), b_eq=np.ones(1))
    x = res.x / res.x.sum()
    if not np.all(np.isfinite(x)):
        raise SolverFailure(f"{kind} LP produced non-finite weights for game {g.to_json()}")
    return EquilibriumDist(x, kind, verify(g, x, kind))


def solve_cce(g: GameMatrix) -> EquilibriumDist:
    """Welfare-maximizing coarse correlated equilibrium."""
    return _solve_lp(g, "cce")


def solve_ce(g: GameMatrix) -> EquilibriumDist:
    """Welfare-maximizing correlated equilibrium."""
    return _solve_lp(g, "ce")


def _pure_ne(g: GameMatrix, tol: float):
    best = None
    for profile in itertools.product(*(range(n) for n in g.action_sizes)):
        a = encode_joint(profile, g.action_sizes)
        x = np.zeros(g.A)
        x[a] = 1.0
        if _unilateral_gain(g, x) <= tol:
            w = g.payoffs[:, a].sum()
            if best is None or w > best[0]:
                best = (w, x)
    return None if best is None else best[1]


def _support_enumeration(g: GameMatrix, tol: float):
    A, B = g.tensor(0), g.tensor(1)
    n1, n2 = g.action_sizes
    sizes = sorted(itertools.product(range(1, n1 + 1), range(1, n2 + 1)),
                   key=lambda k: (max(k), abs(k[0] - k[1]), k))
    for k1, k2 in sizes:
        for I in itertools.combinations(range(n1), k1):
            for J in itertools.combinations(range(n2), k2):
                y = _indifferent_mix(A[np.ix_(I, J)], tol)
                x = _indifferent_mix(B[np.ix_(I, J)].T, tol)
                if x is None or y is None:
                    continue
                px, py = np.zeros(n1), np.zeros(n2)
                px[list(I)], py[list(J)] = x, y
                joint = np.outer(px, py).ravel()
                if _unilateral_gain(g, joint) <= tol:
                    return joint
    return None


def _indifferent_mix(P: np.ndarray, tol: float):
    """Mix over columns of ``P`` that makes every row earn the same payoff."""
    k_rows, k_cols = P.shape
    lhs = np.zeros((k_rows + 1, k_cols + 1))
    lhs[:k_rows, :k_cols] = P
    lhs[:k_rows, -1] = -1.0
    lhs[-1, :k_cols] = 1.0
    rhs = np.zeros(k_rows + 1)
    rhs[-1] = 1.0
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if np.max(np.abs(lhs @ sol - rhs)) > 1e-10:
        return None
    mix = sol[:k_cols]
    if np.any(mix < -tol):
        return None
    mix = np.clip(mix, 0.0, None)
    return mix / mix.sum()


def solve_ne(g: GameMatrix, max_pure: int = 64, max_mixed_actions: int = 8) -> EquilibriumDist:
    """Pure-strategy search for any M, then support enumeration for two agents."""
    scale = float(_agent_scales(g).max())
    tol = 1e-12 * scale
    x = _pure_ne(g, tol) if g.A <= max_pure else None
    if x is None and g.M == 1:
        raise SolverFailure("single-agent game without a maximizer")
    if x is None:
        if g.M != 2 or max(g.action_sizes) > max_mixed_actions:
            raise Unsupported(f"no pure NE and mixed search unsupported for sizes {g.action_sizes}")
        x = _support_enumeration(g, EQ_TOL * 1e-2 * scale)
        if x is None:
            raise SolverFailure(f"support enumeration found no NE for game {g.to_json()}")
    return EquilibriumDist(x, "ne", verify(g, x, "ne"))


def solve(g: GameMatrix, kind: str) -> EquilibriumDist:
    if kind == "cce":
        return solve_cce(g)
    if kind == "ce":
        return solve_ce(g)
    if kind == "ne":
        return solve_ne(g)
    raise ValueError(f"unknown equilibrium kind {kind!r}")


def _unilateral_gain(g: GameMatrix, x: np.ndarray) -> float:
    current = g.payoffs @ x
    gain = -np.inf
    for m in range(g.M):
        for b in range(g.action_sizes[m]):
            gain = max(gain, _deviation_payoffs(g, m, b) @ x - current[m])
    return float(gain)


def verify(g: GameMatrix, x, kind: str) -> float:
    """Largest incentive-constraint violation of ``x`` for the given kind (0 = exact)."""
    x = np.asarray(x, dtype=float)
    if kind == "cce":
        worst = float(np.max(cce_constraints(g) @ x))
    elif kind == "ce":
        rows = ce_constraints(g)
        worst = float(np.max(rows @ x)) if len(rows) else 0.0
    elif kind == "ne":
        joint = x.reshape(g.action_sizes)
        product = None
        for m in range(g.M):
            marg = joint.sum(axis=tuple(i for i in range(g.M) if i != m))
            product = marg if product is None else np.multiply.outer(product, marg)
        worst = _unilateral_gain(g, product.ravel())
        if not factorizes(joint, tol=0.0):
            worst = max(worst, float(np.max(np.abs(product - joint))))
    else:
        raise ValueError(f"unknown equilibrium kind {kind!r}")
    return max(0.0, worst)
