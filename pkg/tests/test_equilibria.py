import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mars_games.equilibria import (GameMatrix, ce_constraints, cce_constraints, solve,
                                   solve_cce, solve_ce, solve_ne, verify)
from mars_games.exceptions import Unsupported
from oracles import pure_equilibria

PD = GameMatrix.from_tensors([[3, 0], [5, 1]], [[3, 5], [0, 1]])
PENNIES = GameMatrix.from_tensors([[1, -1], [-1, 1]], [[-1, 1], [1, -1]])
CHICKEN = GameMatrix.from_tensors([[6, 2], [7, 0]], [[6, 7], [2, 0]])


def random_game(rng, sizes):
    return GameMatrix(rng.uniform(-1, 1, size=(len(sizes), int(np.prod(sizes)))), sizes)


def test_prisoners_dilemma_collapses_to_defection():
    for kind in ("ne", "ce", "cce"):
        eq = solve(PD, kind)
        np.testing.assert_allclose(eq.x, [0, 0, 0, 1], atol=1e-9)


def test_matching_pennies_uniform():
    eq = solve_ne(PENNIES)
    np.testing.assert_allclose(eq.x, 0.25, atol=1e-12)
    for kind in ("ce", "cce"):
        np.testing.assert_allclose(solve(PENNIES, kind).x, 0.25, atol=1e-9)


def test_chicken():
    ne = solve_ne(CHICKEN)
    assert ne.violation <= 1e-12
    # the welfare-best pure NE earns 9; (chicken, chicken) = 12 is not an equilibrium
    assert CHICKEN.payoffs.sum(axis=0) @ ne.x == pytest.approx(9)
    ce = solve_ce(CHICKEN)
    assert CHICKEN.payoffs.sum(axis=0) @ ce.x >= 9 - 1e-9
    cce = solve_cce(CHICKEN)
    assert CHICKEN.payoffs.sum(axis=0) @ cce.x >= CHICKEN.payoffs.sum(axis=0) @ ce.x - 1e-9


def test_pure_ne_agrees_with_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = random_game(rng, (2, 3))
        pure = pure_equilibria(g)
        x = solve_ne(g).x
        if pure:
            assert np.unravel_index(np.argmax(x), g.action_sizes) in pure


def test_constraint_shapes():
    g = random_game(np.random.default_rng(1), (2, 3))
    assert cce_constraints(g).shape == (5, 6)
    assert ce_constraints(g).shape == (2 * 1 + 3 * 2, 6)


def test_ne_unsupported_without_pure_for_three_agents():
    # three-agent pennies variant: agent 3 wants to match agent 1, agent 1 to mismatch agent 3
    u = np.zeros((3, 2, 2, 2))
    for a in np.ndindex(2, 2, 2):
        u[0][a] = 1.0 if a[0] != a[2] else 0.0
        u[1][a] = 1.0 if a[1] == a[0] else 0.0
        u[2][a] = 1.0 if a[2] == a[1] else 0.0
    g = GameMatrix.from_tensors(*u)
    if not pure_equilibria(g):
        with pytest.raises(Unsupported):
            solve_ne(g)


def test_verify_flags_violations():
    x = np.array([1.0, 0, 0, 0])          # (cooperate, cooperate) in the dilemma
    assert verify(PD, x, "cce") == pytest.approx(2.0)
    assert verify(PD, x, "ce") == pytest.approx(2.0)
    assert verify(PD, np.array([0, 0, 0, 1.0]), "ne") == 0.0
    # correlated point mass mixture is not a product
    assert verify(PENNIES, np.array([0.5, 0, 0, 0.5]), "ne") > 0


def test_json_roundtrip():
    back = GameMatrix.from_json(CHICKEN.to_json())
    np.testing.assert_array_equal(back.payoffs, CHICKEN.payoffs)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(2, 2), (2, 3), (3, 3), (2, 2, 2)]))
def test_solutions_verify_and_nest(seed, sizes):
    g = random_game(np.random.default_rng(seed), sizes)
    for kind in ("ce", "cce"):
        assert solve(g, kind).violation <= 1e-8
    try:
        ne = solve_ne(g)
    except Unsupported:
        return
    for kind in ("ne", "ce", "cce"):
        assert verify(g, ne.x, kind) <= 1e-8
    assert verify(g, solve_ce(g).x, "cce") <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_invariant_to_positive_affine_payoffs(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng, (2, 2))
    scale, shift = rng.uniform(0.5, 3, size=2), rng.uniform(-2, 2, size=2)
    h = GameMatrix(g.payoffs * scale[:, None] + shift[:, None], g.action_sizes)
    for kind in ("ce", "cce"):
        assert verify(h, solve(g, kind).x, kind) <= 1e-8 * scale.max()


def test_degenerate_cce_regression():
    # every incentive row has rhs 0; an unguarded degenerate pivot once blew up phase 1 here
    g = GameMatrix(np.random.default_rng(23).uniform(-1, 1, size=(2, 6)), (2, 3))
    assert solve_cce(g).violation <= 1e-8
