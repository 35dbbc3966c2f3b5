"""Naive and risk-balanced regret, per-agent gaps and approximate-equilibrium certificates."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, NotProductPolicy
from .game import JointPolicy, MGSpec, validate_policy
from .risk_dp import best_modification, best_response, eval_policy, to_value

CSV_BASE = ["episode", "kind", "naive_inc", "balanced_inc", "naive_cum", "balanced_cum"]


def phi(u: float, beta: float) -> float:
    """Risk-dependent factor ``(e^{|beta| u} - 1) / (|beta| u)``."""
    if not u > 0:
        raise DomainError(f"u must be positive, got {u!r}")
    if beta == 0:
        raise DomainError("beta must be nonzero")
    x = abs(beta) * u
    return float(np.expm1(x) / x)


def most_risk_sensitive(betas) -> int:
    """Index of the largest |beta|; ties go to the lowest index."""
    return int(np.argmax(np.abs(np.asarray(betas, dtype=float))))


def episode_gaps(spec: MGSpec, policy: JointPolicy, kind: str) -> np.ndarray:
    """Per-agent log-domain value gaps at (h=1, s_1) for the given equilibrium kind."""
    if kind == "ne" and not policy.is_product:
        raise NotProductPolicy("NE regret is defined for product policies only")
    if kind == "ne":
        problems = [p for p in validate_policy(policy) if "correlated" in p]
        if problems:
            raise NotProductPolicy(problems[0])
    s1 = spec.initial_state
    gaps = np.empty(spec.M)
    for m in range(spec.M):
        base = to_value(eval_policy(spec, policy, m), 0, s1)
        if kind == "ce":
            dev = best_modification(spec, policy, m).value(s1)
        elif kind in ("ne", "cce"):
            dev = best_response(spec, policy, m).value(s1)
        else:
            raise ValueError(f"unknown equilibrium kind {kind!r}")
        gaps[m] = dev - base
    return gaps


@dataclass
class RegretLedger:
    kind: str
    betas: np.ndarray
    H: int
    episodes: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    naive_inc: list = field(default_factory=list)
    balanced_inc: list = field(default_factory=list)
    naive_cum: list = field(default_factory=list)
    balanced_cum: list = field(default_factory=list)
    agent_cum: list = field(default_factory=list)   # normalized per-agent cumulative regret
    subsampled: bool = False

    @property
    def phis(self) -> np.ndarray:
        return np.array([phi(self.H, b) for b in self.betas])

    @property
    def phi_star(self) -> float:
        return phi(self.H, self.betas[most_risk_sensitive(self.betas)])

    def series(self, column: str) -> np.ndarray:
        return np.asarray(getattr(self, column), dtype=float)


def accumulate(ledger: RegretLedger, k: int, gaps, betas=None, H=None, weight: int = 1) -> RegretLedger:
    """Fold one episode's gaps into the ledger.

    ``weight`` > 1 extends a subsampled snapshot piecewise-constantly over the
    episodes it stands for.
    """
    gaps = np.asarray(gaps, dtype=float)
    phis = ledger.phis if betas is None else np.array([phi(H or ledger.H, b) for b in betas])
    naive = float(np.max(gaps))
    normalized = gaps / phis
    balanced = float(np.max(normalized))
    prev_n = ledger.naive_cum[-1] if ledger.naive_cum else 0.0
    prev_b = ledger.balanced_cum[-1] if ledger.balanced_cum else 0.0
    prev_a = ledger.agent_cum[-1] if ledger.agent_cum else np.zeros_like(gaps)
    ledger.episodes.append(int(k))
    ledger.weights.append(int(weight))
    ledger.gaps.append(gaps)
    ledger.naive_inc.append(naive)
    ledger.balanced_inc.append(balanced)
    ledger.naive_cum.append(prev_n + weight * naive)
    ledger.balanced_cum.append(prev_b + weight * balanced)
    ledger.agent_cum.append(prev_a + weight * normalized)
    if weight != 1:
        ledger.subsampled = True
    return ledger


def certify_approx(spec: MGSpec, policy: JointPolicy, kind: str, betas=None, H=None) -> float:
    """Smallest eps for which the policy is a (beta, eps)-approximate equilibrium of that kind."""
    betas = spec.betas if betas is None else betas
    H = spec.H if H is None else H
    gaps = episode_gaps(spec, policy, kind)
    return float(np.max(gaps / np.array([phi(H, b) for b in betas])))


def evaluate_snapshots(spec: MGSpec, snapshots, kind: str, K: int | None = None) -> RegretLedger:
    """Regret over ``(episode, policy)`` snapshots; gaps between snapshots are filled forward."""
    ledger = RegretLedger(kind, np.asarray(spec.betas, dtype=float), spec.H)
    prev = 0
    for k, policy in snapshots:
        accumulate(ledger, k, episode_gaps(spec, policy, kind), weight=k - prev)
        prev = k
    return ledger


def evaluate_static(spec: MGSpec, policy: JointPolicy, kind: str, K: int) -> RegretLedger:
    """Regret of a fixed policy played for K episodes."""
    gaps = episode_gaps(spec, policy, kind)
    ledger = RegretLedger(kind, np.asarray(spec.betas, dtype=float), spec.H)
    for k in range(1, K + 1):
        accumulate(ledger, k, gaps)
    return ledger


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(ledger: RegretLedger, fh=None, eps_certified: dict | None = None,
              delta_v: dict | None = None) -> str:
    """Write the ledger as CSV (one row per recorded episode) and return the text."""
    eps_certified = eps_certified or {}
    delta_v = delta_v or {}
    M = len(ledger.betas)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_BASE + [f"gap_agent_{m + 1}" for m in range(M)] + ["eps_certified", "delta_v"])
    for i, k in enumerate(ledger.episodes):
        w.writerow([k, ledger.kind, _fmt(ledger.naive_inc[i]), _fmt(ledger.balanced_inc[i]),
                    _fmt(ledger.naive_cum[i]), _fmt(ledger.balanced_cum[i])]
                   + [_fmt(g) for g in ledger.gaps[i]]
                   + [_fmt(eps_certified[k]) if k in eps_certified else "",
                      _fmt(delta_v[k]) if k in delta_v else ""])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_csv_column(path, column: str):
    """Return ``(episodes, values)`` for one numeric CSV column."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and column not in rows[0]:
        raise KeyError(f"column {column!r} not in {list(rows[0])}")
    ks = np.array([int(r["episode"]) for r in rows])
    vals = np.array([float(r[column]) for r in rows])
    return ks, vals
