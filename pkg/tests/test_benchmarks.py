import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsmpi.benchmarks import (
    DynamicLocationSpec,
    GarnetSpec,
    UniformErrorModel,
    draw_error,
    dynamic_location_mdp,
    dynloc_index,
    garnet_mdp,
)
from nsmpi.mdp import InvalidInput


@pytest.fixture(scope="module")
def dynloc():
    return dynamic_location_mdp(DynamicLocationSpec())


def succ(mdp, s, a):
    nxt, p = mdp.row(s, a)
    return dict(zip(nxt.tolist(), p.tolist()))


def test_dynloc_shape(dynloc):
    assert (dynloc.num_states, dynloc.num_actions, dynloc.discount) == (64, 8, 0.98)
    assert dynloc_index(1, 1, 8) == 0 and dynloc_index(8, 8, 8) == 63


def test_dynloc_rewards(dynloc):
    assert dynloc.rewards[dynloc_index(3, 5, 8), 0] == -4.0
    assert dynloc.rewards[dynloc_index(4, 4, 8), 3] == 0.0
    assert dynloc.rewards.max() == 0.0
    assert dynloc.rewards.min() == -(7 + 3.5)


def test_dynloc_transitions(dynloc):
    # repairman at 6 of 8 moves uniformly to 6, 7, 8; the trailer goes to the action
    got = succ(dynloc, dynloc_index(6, 2, 8), 4)
    assert got == pytest.approx({dynloc_index(j, 5, 8): 1 / 3 for j in (6, 7, 8)})
    # at the last site: back to 1 w.p. 0.75, stay w.p. 0.25
    got = succ(dynloc, dynloc_index(8, 3, 8), 0)
    assert got == pytest.approx({dynloc_index(1, 1, 8): 0.75, dynloc_index(8, 1, 8): 0.25})
    # repairman at site 1 reaches every site
    assert len(succ(dynloc, dynloc_index(1, 1, 8), 0)) == 8


def test_dynloc_small_n():
    mdp = dynamic_location_mdp(DynamicLocationSpec(n=3, gamma=0.5))
    assert mdp.num_states == 9 and mdp.num_actions == 3
    with pytest.raises(InvalidInput):
        DynamicLocationSpec(n=1)


def test_garnet_determinism_and_shape():
    a = garnet_mdp(GarnetSpec(10, 3, 4, seed=42))
    b = garnet_mdp(GarnetSpec(10, 3, 4, seed=42))
    c = garnet_mdp(GarnetSpec(10, 3, 4, seed=43))
    assert a.to_json() == b.to_json() != c.to_json()
    nnz = np.diff(a.transitions.indptr)
    assert np.all(nnz == 4)
    assert np.all(np.abs(a.rewards) <= 1)


def test_garnet_full_branching_and_sparsity():
    mdp = garnet_mdp(GarnetSpec(5, 2, 5, seed=1, reward_sparsity=1.0))
    assert np.all(np.diff(mdp.transitions.indptr) == 5)
    assert np.all(mdp.rewards == 0)
    with pytest.raises(InvalidInput):
        GarnetSpec(5, 2, 6, seed=0)


@settings(max_examples=30)
@given(st.integers(1, 30), st.integers(1, 4), st.data())
def test_garnet_rows_are_distributions(S, A, data):
    b = data.draw(st.integers(1, S))
    mdp = garnet_mdp(GarnetSpec(S, A, b, seed=data.draw(st.integers(0, 2**63))))
    sums = np.asarray(mdp.transitions.sum(axis=1)).ravel()
    assert np.all(np.abs(sums - 1) <= 1e-12)
    assert np.all(mdp.transitions.data > 0)


def test_uniform_errors():
    m = UniformErrorModel(0.2, seed=7)
    e = m.draw(3, 50)
    np.testing.assert_array_equal(e, draw_error(m, 3, 50))
    np.testing.assert_array_equal(e, UniformErrorModel(0.2, seed=7).draw(3, 50))
    assert not np.array_equal(e, m.draw(4, 50))
    assert np.all((e >= 0) & (e < 0.2))
    assert np.all(UniformErrorModel(0.0, 1).draw(1, 5) == 0)
    with pytest.raises(InvalidInput):
        UniformErrorModel(-0.1)


def test_uniform_error_mean():
    m = UniformErrorModel(4.0, seed=123)
    draws = np.concatenate([m.draw(k, 1000) for k in range(1, 201)])
    assert abs(draws.mean() - 2.0) <= 0.02
