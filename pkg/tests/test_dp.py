import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsmpi.benchmarks import GarnetSpec, garnet_mdp
from nsmpi.dp import (
    INF,
    ConvergenceFailure,
    NsmpiConfig,
    evaluate_periodic,
    evaluate_stationary,
    format_m,
    nsmpi_run,
    optimal_value,
    parse_m,
    reference_pi,
    reference_vi,
    run_trace,
)
from nsmpi.mdp import FiniteMdp, InvalidInput, PeriodicPolicy, apply_bellman_op, greedy_policy

from conftest import garnets, random_policy


def self_loop(r=1.0, gamma=0.5):
    return FiniteMdp.from_dense([[[1.0]]], [[r]], gamma)


def two_state_chain():
    # action 0 stays, action 1 swaps
    P = [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]]]
    return FiniteMdp.from_dense(P, [[1.0, 0.0], [0.0, 2.0]], 0.5)


def rollout_value(mdp, periodic, steps=200):
    """Propagate the state distribution through the cycle, newest member first."""
    S, g = mdp.num_states, mdp.discount
    D = mdp.dense_kernel()
    out = np.zeros(S)
    for s0 in range(S):
        dist = np.zeros(S)
        dist[s0] = 1.0
        total = 0.0
        for t in range(steps):
            pi = periodic.cycle[t % periodic.ell]
            total += g**t * sum(dist[s] * mdp.rewards[s, pi[s]] for s in range(S))
            dist = sum(dist[s] * D[s, pi[s]] for s in range(S))
        out[s0] = total
    return out


def test_parse_m():
    assert parse_m("inf") == INF and parse_m(math.inf) == INF and parse_m(3) == 3
    assert format_m(INF) == "inf" and format_m(2) == "2"
    for bad in (-1, 1.5, "x", True):
        with pytest.raises((InvalidInput, ValueError)):
            parse_m(bad)


def test_single_state_value():
    v = evaluate_stationary(self_loop(), [0])
    assert v[0] == pytest.approx(2.0, abs=1e-12)
    v = evaluate_stationary(self_loop(), [0], method="iterative")
    assert v[0] == pytest.approx(2.0, abs=1e-11)


def test_vi_on_single_state_has_geometric_iterates():
    vs = reference_vi(self_loop(), [0.0], 6)
    for K, v in enumerate(vs):
        assert v[0] == pytest.approx(2 * (1 - 0.5**K), abs=1e-15)
    recs = nsmpi_run(self_loop(), NsmpiConfig(m=0, iterations=6))
    for r in recs:
        assert r.value[0] == pytest.approx(2 * (1 - 0.5**r.k), abs=1e-15)


def test_periodic_value_matches_rollout():
    mdp = two_state_chain()
    for cycle in [([0, 1], [1, 0]), ([1, 1], [0, 0], [1, 0]), ([0, 0],)]:
        per = PeriodicPolicy(tuple(np.array(c) for c in cycle))
        want = rollout_value(mdp, per)
        for method in ("direct", "iterative"):
            np.testing.assert_allclose(evaluate_periodic(mdp, per, method=method), want,
                                       atol=1e-10)


def test_periodic_order_is_newest_first():
    mdp = two_state_chain()
    a, b = np.array([1, 1]), np.array([0, 0])
    v_ab = evaluate_periodic(mdp, PeriodicPolicy((a, b)))
    v_ba = evaluate_periodic(mdp, PeriodicPolicy((b, a)))
    # phase-0 values differ, and each one is the other shifted by one step
    assert not np.allclose(v_ab, v_ba)
    np.testing.assert_allclose(apply_bellman_op(mdp, a, v_ba), v_ab, atol=1e-12)


def test_iterative_evaluation_budget():
    mdp = FiniteMdp.from_dense([[[1.0]]], [[1.0]], 0.999)
    with pytest.raises(ConvergenceFailure) as err:
        evaluate_stationary(mdp, [0], method="iterative", max_iters=10)
    assert err.value.residual > 0
    with pytest.raises(InvalidInput):
        evaluate_stationary(mdp, [0], method="magic")


@settings(max_examples=40, deadline=None)
@given(garnets(max_states=8, max_actions=3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_direct_and_iterative_periodic_agree(mdp, ell, seed):
    rng = np.random.default_rng(seed)
    per = PeriodicPolicy(tuple(random_policy(rng, mdp) for _ in range(ell)))
    d = evaluate_periodic(mdp, per, method="direct")
    it = evaluate_periodic(mdp, per, method="iterative", tolerance=1e-13)
    assert np.max(np.abs(d - it)) <= 1e-10


def test_config_validation():
    with pytest.raises(InvalidInput):
        NsmpiConfig(m=1, ell=0)
    with pytest.raises(InvalidInput):
        NsmpiConfig(m=1, ell=3, initial_policies=[np.zeros(2, int)])
    with pytest.raises(InvalidInput):
        NsmpiConfig(m=-2)
    with pytest.raises(InvalidInput):
        nsmpi_run(self_loop(), NsmpiConfig(m=1, diagnostics=True))


def test_m_zero_is_value_iteration():
    mdp = garnet_mdp(GarnetSpec(12, 3, 4, seed=5))
    v0 = np.linspace(-1, 1, 12)
    recs = nsmpi_run(mdp, NsmpiConfig(m=0, iterations=30, v0=v0))
    ref = reference_vi(mdp, v0, 30)
    for r in recs:
        assert np.max(np.abs(r.value - ref[r.k])) <= 1e-12


def test_m_inf_is_policy_iteration():
    mdp = garnet_mdp(GarnetSpec(15, 4, 3, seed=9))
    v0 = np.zeros(15)
    _, _, hist = reference_pi(mdp, greedy_policy(mdp, v0), return_history=True)
    recs = nsmpi_run(mdp, NsmpiConfig(m=INF, iterations=len(hist) + 2, v0=v0))
    for r, p in zip(recs, hist):
        np.testing.assert_array_equal(r.policy, p)
    np.testing.assert_array_equal(recs[-1].policy, hist[-1])


def test_policy_buffer_and_padding():
    mdp = garnet_mdp(GarnetSpec(6, 3, 2, seed=1))
    pads = [np.full(6, 2), np.full(6, 1)]
    recs = nsmpi_run(mdp, NsmpiConfig(m=1, ell=3, iterations=5, initial_policies=pads))
    for got, pad in zip(recs[0].periodic.cycle[1:], pads):
        np.testing.assert_array_equal(got, pad)
    for r in recs[2:]:
        want = [recs[r.k - 1 - j].policy for j in range(3)]
        for got, exp in zip(r.periodic.cycle, want):
            np.testing.assert_array_equal(got, exp)
    # default padding repeats greedy(v0)
    recs = nsmpi_run(mdp, NsmpiConfig(m=1, ell=3, iterations=3))
    g0 = greedy_policy(mdp, np.zeros(6))
    np.testing.assert_array_equal(recs[0].periodic.cycle[1], g0)
    np.testing.assert_array_equal(recs[0].periodic.cycle[2], g0)
    assert [r.default_padding for r in recs] == [True, True, False]


def test_m_inf_value_is_periodic_value_plus_error():
    mdp = garnet_mdp(GarnetSpec(10, 3, 3, seed=2))

    class Shift:
        def draw(self, k, n):
            return np.full(n, 0.01 * k)

    recs = nsmpi_run(mdp, NsmpiConfig(m=INF, ell=2, iterations=6, error_model=Shift()))
    for r in recs:
        np.testing.assert_allclose(r.value, r.periodic_value + 0.01 * r.k, atol=1e-12)


@pytest.mark.parametrize("m", [0, 1, 3, INF])
@pytest.mark.parametrize("ell", [1, 2, 3])
def test_exact_runs_converge_to_optimum(m, ell):
    mdp = garnet_mdp(GarnetSpec(10, 3, 3, seed=11, discount=0.8))
    v_star = optimal_value(mdp)
    recs = nsmpi_run(mdp, NsmpiConfig(m=m, ell=ell, iterations=200), v_star=v_star)
    assert recs[-1].loss_sup <= 1e-9
    assert np.max(np.abs(recs[-1].value - v_star)) <= 1e-9


def test_optimal_value_is_fixed_point():
    mdp = garnet_mdp(GarnetSpec(20, 4, 5, seed=3, discount=0.95))
    v = optimal_value(mdp)
    pi = greedy_policy(mdp, v)
    np.testing.assert_allclose(apply_bellman_op(mdp, pi, v), v, atol=1e-10)


def test_run_is_reproducible_and_traceable():
    from nsmpi.benchmarks import UniformErrorModel

    mdp = garnet_mdp(GarnetSpec(8, 2, 3, seed=4))
    cfg = NsmpiConfig(m=2, ell=2, iterations=5, error_model=UniformErrorModel(0.1, seed=3))
    a = run_trace(cfg, nsmpi_run(mdp, cfg, v_star=optimal_value(mdp)))
    b = run_trace(cfg, nsmpi_run(mdp, cfg, v_star=optimal_value(mdp)))
    assert json.dumps(a) == json.dumps(b)
    assert len(a["records"]) == 5 and a["config"]["m"] == "2"
    assert len(a["records"][0]["periodic"]) == 2
