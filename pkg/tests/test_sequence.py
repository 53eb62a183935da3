import pytest

from composable_ledger.compose import (
    SequenceDelta,
    decode_sequence,
    encode_multiproof,
    encode_sequence,
    merge_tree,
    naive_transfer_size,
    split_tree,
)
from composable_ledger.errors import EmptySequenceError, RootMismatchError
from composable_ledger.merkle import build_tree, verify_proof
from oracles import oracle_root, random_map, rng_for


def full(vmap):
    return merge_tree(split_tree(vmap, build_tree(vmap)))


def derivative(vmap, keys):
    t = build_tree(vmap)
    return merge_tree(split_tree({k: vmap[k] for k in keys}, t))


def evolve(vmap, rng, steps, per_step=1):
    states = [dict(vmap)]
    for _ in range(steps):
        nxt = dict(states[-1])
        for k in rng.sample(list(nxt), per_step):
            nxt[k] = rng.randbytes(32)
        states.append(nxt)
    return states


def test_empty_sequence():
    with pytest.raises(EmptySequenceError):
        encode_sequence([])


def test_single_state_has_no_deltas():
    t = full(random_map(10, rng_for("single")))
    seq = encode_sequence([(0, t)])
    assert seq.deltas == []
    assert seq.base == encode_multiproof(t)
    assert [d.source_root for d in decode_sequence(seq)] == [t.source_root]


def test_identical_states():
    t = full(random_map(10, rng_for("same")))
    seq = encode_sequence([(0, t), (1, t)])
    assert seq.deltas[0].changed == []
    assert seq.deltas[0].new_root == t.source_root
    assert decode_sequence(seq) == [t, t]


def test_three_steps_one_change_each():
    rng = rng_for("three")
    states = evolve(random_map(64, rng), rng, 2)
    trees = [(i, full(s)) for i, s in enumerate(states)]
    seq = encode_sequence(trees)
    for step, (prev, cur) in zip(seq.deltas, zip(states, states[1:])):
        diff = {k for k in cur if prev.get(k) != cur[k]}
        assert {e.key for e in step.changed} == diff
        assert step.new_root == oracle_root(cur)
        for e in step.changed:
            assert verify_proof(step.new_root, e.key, e.value, e.proof)
    decoded = decode_sequence(seq)
    assert [d.source_root for d in decoded] == [oracle_root(s) for s in states]
    assert decoded == [t for _, t in trees]


def test_changes_outside_a_derivative_refresh_its_stubs():
    rng = rng_for("outside")
    states = evolve(random_map(64, rng), rng, 4)
    keep = rng.sample(list(states[0]), 8)
    trees = [(i, derivative(s, keep)) for i, s in enumerate(states)]
    seq = encode_sequence(trees)
    assert decode_sequence(seq) == [t for _, t in trees]
    restated = sum(len(t.keys()) for _, t in trees[1:])
    assert sum(len(d.changed) for d in seq.deltas) <= restated


def test_growing_and_shrinking_key_sets():
    rng = rng_for("grow")
    vmap = random_map(48, rng)
    keys = list(vmap)
    s1 = dict(vmap)
    s2 = dict(vmap)
    for _ in range(5):
        s2[rng.randbytes(32)] = rng.randbytes(32)
    s3 = dict(s2)
    s3[keys[0]] = rng.randbytes(32)
    trees = [
        (0, derivative(s1, keys[:20])),
        (1, derivative(s2, keys[:20] + [k for k in s2 if k not in s1])),
        (2, derivative(s3, keys[5:30])),
    ]
    seq = encode_sequence(trees)
    added = [k for k in s2 if k not in s1]
    assert seq.deltas[1].removed == sorted(keys[:5] + added)
    assert decode_sequence(seq) == [t for _, t in trees]


def test_randomized_evolutions_replay_exactly():
    rng = rng_for("random-evolve")
    for _ in range(30):
        state = random_map(rng.randint(2, 80), rng)
        trees = []
        for block in range(4):
            if block:
                state = dict(state)
                for k in rng.sample(list(state), rng.randint(0, 3)):
                    state[k] = rng.randbytes(32)
                for _ in range(rng.randint(0, 3)):
                    state[rng.randbytes(32)] = rng.randbytes(32)
            keys = rng.sample(list(state), rng.randint(1, len(state)))
            trees.append((block, derivative(state, keys)))
        seq = encode_sequence(trees)
        assert decode_sequence(seq) == [t for _, t in trees]
        again = SequenceDelta.from_json(seq.to_json())
        assert decode_sequence(again) == [t for _, t in trees]


def test_payload_scales_with_changes_not_ledger_size():
    rng = rng_for("payload")
    vmap = random_map(512, rng)
    states = evolve(vmap, rng, 5, per_step=2)
    seq = encode_sequence([(i, full(s)) for i, s in enumerate(states)])
    assert all(len(d.changed) == 2 for d in seq.deltas)
    for d in seq.deltas:
        assert d.payload_size() == 32 + naive_transfer_size(d.changed)
        assert d.payload_size() < len(seq.base) / 40


def test_tampered_root_detected():
    rng = rng_for("tamper")
    states = evolve(random_map(16, rng), rng, 2)
    seq = encode_sequence([(i, full(s)) for i, s in enumerate(states)])
    seq.deltas[1].new_root = bytes(32)
    with pytest.raises(RootMismatchError):
        decode_sequence(seq)
