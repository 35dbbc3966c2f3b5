"""Brute-force oracles, independent of the dynamic-programming code paths.

Everything here enumerates complete H-step trajectories (or complete
deviation tables) explicitly; nothing is computed by backward recursion.
"""
import itertools

import numpy as np


def trajectories(spec):
    """All (states, joint actions) paths from the initial state: arrays (n, H+1), (n, H)."""
    H, S, A = spec.H, spec.S, spec.A
    states, actions = [], []
    for seq in itertools.product(range(A), range(S), repeat=H):
        acts = seq[0::2]
        nxt = seq[1::2]
        states.append((spec.initial_state,) + nxt)
        actions.append(acts)
    return np.array(states), np.array(actions)


def path_weights(spec, paths, m):
    """Per path: transition probability product and exp(beta * total reward) of agent m."""
    states, actions = paths
    H = spec.H
    hs = np.arange(H)
    trans = spec.transitions[hs, states[:, :-1], actions, states[:, 1:]].prod(axis=1)
    total = spec.rewards[hs, m, states[:, :-1], actions].sum(axis=1)
    return trans, np.exp(spec.betas[m] * total)


def brute_eval(spec, dist, m, paths=None):
    """Entropic value of agent m at the initial state by summing over every trajectory."""
    paths = trajectories(spec) if paths is None else paths
    states, actions = paths
    hs = np.arange(spec.H)
    prob = dist[hs, states[:, :-1], actions].prod(axis=1)
    trans, growth = path_weights(spec, paths, m)
    return float(np.log(np.sum(prob * trans * growth)) / spec.betas[m])


def _split(spec, m):
    """Per flat joint action: own action of agent m and flat index of the others."""
    digits = np.indices(spec.action_sizes).reshape(spec.M, -1)
    own = digits[m]
    others_sizes = tuple(n for i, n in enumerate(spec.action_sizes) if i != m)
    rest = np.delete(digits, m, axis=0)
    other = np.ravel_multi_index(tuple(rest), others_sizes) if rest.size else np.zeros_like(own)
    return own, other


def brute_best_response(spec, dist, m):
    """Max over every deterministic Markov policy of agent m against the others' marginal."""
    paths = trajectories(spec)
    own, other = _split(spec, m)
    Am = spec.action_sizes[m]
    n_other = spec.A // Am
    marg = np.zeros((spec.H, spec.S, n_other))
    for a in range(spec.A):
        marg[:, :, other[a]] += dist[:, :, a]
    best = -np.inf
    cells = spec.H * spec.S
    for choice in itertools.product(range(Am), repeat=cells):
        table = np.array(choice).reshape(spec.H, spec.S)
        new = np.where(own[None, None, :] == table[:, :, None],
                       marg[:, :, other], 0.0)
        best = max(best, brute_eval(spec, new, m, paths))
    return best


def brute_best_modification(spec, dist, m):
    """Max over every strategy modification of agent m (all maps A_m -> A_m per (h, s))."""
    paths = trajectories(spec)
    states, actions = paths
    own, _ = _split(spec, m)
    Am = spec.action_sizes[m]
    sizes = spec.action_sizes
    maps = list(itertools.product(range(Am), repeat=Am))
    # flat joint action after agent m replaces its recommendation r by maps[o][r]
    digits = np.indices(sizes).reshape(spec.M, -1)
    played = np.empty((len(maps), spec.A), dtype=int)
    for o, mp in enumerate(maps):
        d = digits.copy()
        d[m] = np.array(mp)[own]
        played[o] = np.ravel_multi_index(tuple(d), sizes)
    H, S = spec.H, spec.S
    hs = np.arange(H)
    prob = dist[hs, states[:, :-1], actions].prod(axis=1)
    beta = spec.betas[m]
    # per (h, path, option) factor exp(beta r) * P along the modified action
    factor = np.empty((H, len(states), len(maps)))
    for h in range(H):
        s, s2 = states[:, h], states[:, h + 1]
        b = played[:, actions[:, h]].T                  # (paths, options)
        factor[h] = (np.exp(beta * spec.rewards[h, m, s[:, None], b])
                     * spec.transitions[h, s[:, None], b, s2[:, None]])
    best = -np.inf
    n_opt = len(maps)
    for choice in itertools.product(range(n_opt), repeat=H * S):
        table = np.array(choice).reshape(H, S)
        opts = table[hs[None, :], states[:, :-1]]        # (paths, H)
        val = prob * np.prod(factor[hs[None, :], np.arange(len(states))[:, None], opts], axis=1)
        best = max(best, float(np.log(val.sum()) / beta))
    return best


def pure_equilibria(g, kind="ne", tol=1e-12):
    """Pure profiles with no profitable unilateral deviation (for M-agent matrix games)."""
    found = []
    for profile in itertools.product(*(range(n) for n in g.action_sizes)):
        ok = True
        for m in range(g.M):
            base = g.tensor(m)[profile]
            for b in range(g.action_sizes[m]):
                alt = list(profile)
                alt[m] = b
                if g.tensor(m)[tuple(alt)] > base + tol:
                    ok = False
        if ok:
            found.append(profile)
    return found


def tiny_games(n, seed=2024, max_cells=None):
    """Seeded tiny two-agent 2x2 games with S, H <= 3 (optionally S*H <= max_cells)."""
    from mars_games.instances import random_mg

    rng = np.random.default_rng(seed)
    pairs = [(S, H) for S in (1, 2, 3) for H in (1, 2, 3)
             if max_cells is None or S * H <= max_cells]
    out = []
    for i in range(n):
        S, H = pairs[rng.integers(len(pairs))]
        betas = rng.choice([-1, 1], size=2) * rng.uniform(0.2, 2.0, size=2)
        out.append(random_mg(int(rng.integers(1 << 30)), S, H, (2, 2), betas).spec)
    return out


def random_policy(spec, rng, product=False):
    if product:
        from mars_games.game import JointPolicy

        margs = [rng.dirichlet(np.ones(n), size=(spec.H, spec.S)) for n in spec.action_sizes]
        return JointPolicy.from_marginals(margs)
    from mars_games.game import JointPolicy

    return JointPolicy(rng.dirichlet(np.ones(spec.A), size=(spec.H, spec.S)), spec.action_sizes)
