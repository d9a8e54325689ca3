import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from looprc.reservoir import LoopSpec, StateVector, run_loop, mask_for
from looprc.topology import (
    LoopBank,
    TopologySpec,
    combine,
    even_bank,
    run_topology,
    single_loop_topology,
    split_datapoint,
)


def loop(n=4, seed=0, **kw):
    kw.setdefault("loop_gain", 0.8)
    kw.setdefault("input_gain", 1.3)
    return LoopSpec(n_nodes=n, mask_seed=seed, **kw)


# --- split ---


def test_split_definition():
    pieces = split_datapoint(np.array([1.0, 2.0, 3.0, 4.0]), 2)
    assert [p.tolist() for p in pieces] == [[1.0, 2.0], [3.0, 4.0]]


def test_split_eightfold_1024():
    pieces = split_datapoint(np.arange(1024.0), 8)
    assert len(pieces) == 8
    assert all(p.size == 128 for p in pieces)


def test_split_divisibility_contract():
    with pytest.raises(ValueError):
        split_datapoint(np.arange(1024.0), 3)
    with pytest.raises(ValueError):
        split_datapoint(np.arange(8.0), 0)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 4, 8]))
@settings(max_examples=30, deadline=None)
def test_split_concat_round_trip(seed, k):
    x = np.random.default_rng(seed).normal(size=32)
    assert np.array_equal(np.concatenate(split_datapoint(x, k)), x)


# --- combine ---


def test_sum_golden():
    assert combine([[1.0, 2.0], [3.0, 4.0]], "sum").values.tolist() == [4.0, 6.0]


def test_normalized_product_golden():
    out = combine([[1.0, 0.0], [2.0, 5.0]], "normalized_product")
    assert out.values == pytest.approx([1.0, 0.0])


def test_concat_preserves_lengths():
    out = combine([np.ones(750), np.zeros(250)], "concat")
    assert out.values.shape == (1000,)


def test_zero_product_vector_stays_zero():
    out = combine([[1.0, 0.0], [0.0, 3.0]], "normalized_product")
    assert out.values.tolist() == [0.0, 0.0]


def test_combine_validation():
    with pytest.raises(ValueError):
        combine([[1.0, 2.0], [3.0]], "sum")
    with pytest.raises(ValueError):
        combine([[1.0]], "mean")
    with pytest.raises(ValueError):
        combine([], "sum")


def test_single_state_degeneracy():
    v = np.array([3.0, 4.0])
    assert combine([v], "sum").values.tolist() == [3.0, 4.0]
    assert combine([v], "concat").values.tolist() == [3.0, 4.0]
    assert combine([v], "normalized_product").values.tolist() == [0.6, 0.8]


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_sum_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    states = [rng.normal(size=6) for _ in range(4)]
    base = combine(states, "sum").values
    perm = combine([states[i] for i in rng.permutation(4)], "sum").values
    assert np.allclose(base, perm, rtol=1e-12, atol=0)


# --- bank / topology construction ---


def test_bank_slice_coverage_enforced():
    with pytest.raises(ValueError):
        LoopBank(loops=(loop(),), slices=((1, 5),))  # gap before first slice
    with pytest.raises(ValueError):
        LoopBank(loops=(loop(), loop()), slices=((0, 4), (5, 8)))  # hole
    with pytest.raises(ValueError):
        LoopBank(loops=(loop(),), slices=((0, 0),))  # empty slice
    with pytest.raises(ValueError):
        LoopBank(loops=(), slices=())


def test_sum_requires_equal_final_sizes():
    bank = LoopBank(loops=(loop(4), loop(6, seed=1)), slices=((0, 2), (2, 4)))
    with pytest.raises(ValueError):
        TopologySpec(layers=(bank,), combiner="sum")
    # concat accepts heterogeneous loop sizes
    topo = TopologySpec(layers=(bank,), combiner="concat")
    assert topo.output_length == 10


def test_layer_dimension_chain_is_checked():
    first = even_bank(2, 8, n_nodes=4, loop_gain=0.5, input_gain=1.0)
    good = LoopBank(loops=(loop(3, seed=7),), slices=((0, 8),))
    TopologySpec(layers=(first, good))  # 2*4 produced, 8 consumed
    bad = LoopBank(loops=(loop(3, seed=7),), slices=((0, 9),))
    with pytest.raises(ValueError):
        TopologySpec(layers=(first, bad))


def test_even_bank_mask_seeds_are_distinct():
    bank = even_bank(4, 16, n_nodes=5, loop_gain=0.5, input_gain=1.0, mask_seed_base=10)
    assert [sp.mask_seed for sp in bank.loops] == [10, 11, 12, 13]
    masks = TopologySpec(layers=(bank,), combiner="sum").masks()
    flat = [tuple(m.values) for m in masks[0]]
    assert len(set(flat)) == len(flat)


# --- run_topology ---


def test_k1_topology_is_run_loop_bit_identical():
    rng = np.random.default_rng(2)
    dp = rng.normal(size=12)
    spec = loop(8, seed=3)
    direct = run_loop(dp, spec, mask_for(spec))
    for combiner in ("sum", "concat"):
        topo = single_loop_topology(spec, 12, combiner=combiner)
        assert np.array_equal(run_topology(dp, topo).values, direct.values)
    topo = single_loop_topology(spec, 12, combiner="normalized_product")
    expect = direct.values / np.linalg.norm(direct.values)
    assert np.allclose(run_topology(dp, topo).values, expect, rtol=1e-12)


@pytest.mark.parametrize("nonlinearity", ["identity", "sine"])
def test_sum_combiner_matches_independent_loop_oracle(nonlinearity):
    """Split loops share no state, so the joint vector must equal the sum
    of per-loop runs done completely outside the topology code."""
    rng = np.random.default_rng(4)
    dp = rng.normal(size=24)
    bank = even_bank(
        3, 24, n_nodes=5, loop_gain=0.7, input_gain=0.9, nonlinearity=nonlinearity
    )
    topo = TopologySpec(layers=(bank,), combiner="sum")
    joint = run_topology(dp, topo).values

    oracle = np.zeros(5)
    for spec, piece in zip(bank.loops, split_datapoint(dp, 3)):
        oracle += run_loop(piece, spec, mask_for(spec)).values
    assert np.allclose(joint, oracle, rtol=1e-12, atol=0)


def test_concat_blocks_recover_per_loop_states():
    rng = np.random.default_rng(5)
    dp = rng.normal(size=20)
    bank = even_bank(4, 20, n_nodes=6, loop_gain=0.6, input_gain=1.1)
    topo = TopologySpec(layers=(bank,), combiner="concat")
    joint = run_topology(dp, topo).values
    for j, (spec, piece) in enumerate(zip(bank.loops, split_datapoint(dp, 4))):
        block = joint[j * 6 : (j + 1) * 6]
        assert np.array_equal(block, run_loop(piece, spec, mask_for(spec)).values)


def test_two_layer_routing_matches_manual_chain():
    rng = np.random.default_rng(6)
    dp = rng.normal(size=16)
    first = even_bank(2, 16, n_nodes=4, loop_gain=0.5, input_gain=1.0)
    second = LoopBank(loops=(loop(3, seed=20),), slices=((0, 8),))
    topo = TopologySpec(layers=(first, second), combiner="sum")
    joint = run_topology(dp, topo).values

    mid = np.concatenate(
        [
            run_loop(piece, spec, mask_for(spec)).values
            for spec, piece in zip(first.loops, split_datapoint(dp, 2))
        ]
    )
    expect = run_loop(mid, second.loops[0], mask_for(second.loops[0])).values
    assert np.array_equal(joint, expect)


def test_run_topology_validates_input():
    topo = single_loop_topology(loop(4), 8)
    with pytest.raises(ValueError):
        run_topology(np.ones(9), topo)
    with pytest.raises(ValueError):
        run_topology(np.ones((2, 4)), topo)


def test_noise_streams_are_reproducible_and_per_loop():
    dp = np.tile(np.arange(4.0), 2)  # both halves identical
    specs = tuple(
        LoopSpec(n_nodes=3, loop_gain=0.5, input_gain=1.0, noise_std=0.1, mask_seed=9)
        for _ in range(2)
    )
    bank = LoopBank(loops=specs, slices=((0, 4), (4, 8)))
    topo = TopologySpec(layers=(bank,), combiner="concat")
    a = run_topology(dp, topo, noise_seed=77).values
    b = run_topology(dp, topo, noise_seed=77).values
    assert np.array_equal(a, b)
    # same spec, same mask, same input halves -- only the per-loop noise
    # stream can make the two blocks differ
    assert not np.array_equal(a[:3], a[3:])
    c = run_topology(dp, topo, noise_seed=78).values
    assert not np.array_equal(a, c)


def test_output_length_property():
    bank = even_bank(4, 32, n_nodes=7, loop_gain=0.5, input_gain=1.0)
    assert TopologySpec(layers=(bank,), combiner="sum").output_length == 7
    assert TopologySpec(layers=(bank,), combiner="concat").output_length == 28
    assert TopologySpec(layers=(bank,), combiner="sum").input_length == 32
