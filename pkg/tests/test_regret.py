import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mars_games.exceptions import DomainError, NotProductPolicy
from mars_games.game import JointPolicy
from mars_games.regret import (CSV_BASE, RegretLedger, accumulate, certify_approx, episode_gaps,
                               evaluate_snapshots, evaluate_static, most_risk_sensitive, phi,
                               read_csv_column, write_csv)
from oracles import random_policy, tiny_games


def test_phi_values():
    assert phi(1, 1) == pytest.approx(np.e - 1, abs=1e-15)
    assert phi(2, 0.5) == pytest.approx(np.e - 1, abs=1e-15)
    assert phi(3, 1e-12) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DomainError):
        phi(0, 1)
    with pytest.raises(DomainError):
        phi(1, 0)


@given(st.floats(0.01, 10), st.floats(1e-6, 3))
def test_phi_even_and_increasing(u, b):
    assert phi(u, b) == phi(u, -b)
    assert phi(u, b) >= 1.0
    assert phi(u * 1.1, b) >= phi(u, b)


def test_most_risk_sensitive_ties_lowest():
    assert most_risk_sensitive([0.5, -2, 2]) == 1


def test_gaps_nonnegative_and_kind_order():
    spec = tiny_games(1, seed=8)[0]
    pol = random_policy(spec, np.random.default_rng(0))
    cce, ce = episode_gaps(spec, pol, "cce"), episode_gaps(spec, pol, "ce")
    assert np.all(ce >= -1e-12)
    assert np.all(ce >= cce - 1e-10)
    with pytest.raises(NotProductPolicy):
        episode_gaps(spec, pol, "ne")


def test_ne_gap_on_product_policy():
    spec = tiny_games(1, seed=8)[0]
    pol = random_policy(spec, np.random.default_rng(0), product=True)
    np.testing.assert_allclose(episode_gaps(spec, pol, "ne"), episode_gaps(spec, pol, "cce"))
    assert np.all(episode_gaps(spec, pol, "ne") >= -1e-12)


@given(st.lists(st.tuples(st.floats(0, 3), st.floats(0, 3)), min_size=1, max_size=20),
       st.floats(0.05, 3), st.floats(-3, -0.05))
def test_pathwise_naive_balanced_inequality(gaps, b1, b2):
    betas = np.array([b1, b2])
    ledger = RegretLedger("cce", betas, 3)
    for k, g in enumerate(gaps, 1):
        accumulate(ledger, k, g)
    for n, b in zip(ledger.naive_cum, ledger.balanced_cum):
        assert b <= n + 1e-12
        assert n <= ledger.phi_star * b + 1e-9


def test_weighted_accumulation_matches_expansion():
    betas = np.array([1.0, -0.5])
    a = RegretLedger("cce", betas, 2)
    accumulate(a, 3, [0.2, 0.4], weight=3)
    b = RegretLedger("cce", betas, 2)
    for k in (1, 2, 3):
        accumulate(b, k, [0.2, 0.4])
    assert a.naive_cum[-1] == pytest.approx(b.naive_cum[-1])
    assert a.balanced_cum[-1] == pytest.approx(b.balanced_cum[-1])
    assert a.subsampled and not b.subsampled


def test_static_and_snapshot_evaluation_agree():
    spec = tiny_games(1, seed=3)[0]
    pol = random_policy(spec, np.random.default_rng(5))
    static = evaluate_static(spec, pol, "cce", 6)
    snaps = evaluate_snapshots(spec, [(2, pol), (6, pol)], "cce")
    assert snaps.balanced_cum[-1] == pytest.approx(static.balanced_cum[-1])
    assert certify_approx(spec, pol, "cce") == pytest.approx(static.balanced_inc[0])


def test_csv_roundtrip(tmp_path):
    spec = tiny_games(1, seed=3)[0]
    ledger = evaluate_static(spec, JointPolicy.uniform(spec.H, spec.S, (2, 2)), "cce", 4)
    buf = io.StringIO()
    write_csv(ledger, buf, {2: 0.5}, {1: 3.0, 4: 1.0})
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",") == CSV_BASE + ["gap_agent_1", "gap_agent_2", "eps_certified", "delta_v"]
    assert lines[2].split(",")[-2:] == ["0.5", ""]
    path = tmp_path / "r.csv"
    path.write_text(buf.getvalue())
    ks, vals = read_csv_column(path, "balanced_cum")
    assert ks.tolist() == [1, 2, 3, 4]
    np.testing.assert_array_equal(vals, ledger.balanced_cum)
    with pytest.raises(KeyError):
        read_csv_column(path, "nope")
