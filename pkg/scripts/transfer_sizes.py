#!/usr/bin/env python3
"""Transfer-size table: naive entry list vs multiproof vs sequence deltas.

For a ledger of n entries, exports m random keys both ways and reports bytes.
Then evolves the ledger a few blocks and reports the per-block delta size.
"""

import argparse
import random

from composable_ledger.compose import (
    encode_multiproof,
    encode_sequence,
    merge_tree,
    naive_transfer_size,
    split_tree,
)
from composable_ledger.merkle import build_tree, count_nodes


def random_map(n, rng):
    out = {}
    while len(out) < n:
        out[rng.randbytes(32)] = rng.randbytes(32)
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("-n", type=int, default=1024)
    p.add_argument("--subsets", default="1,4,16,64,256,1024")
    p.add_argument("--blocks", type=int, default=5)
    p.add_argument("--changes", type=int, default=2, help="values changed per block")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = random.Random(args.seed)
    vmap = random_map(args.n, rng)
    entries = split_tree(vmap, build_tree(vmap))

    print(f"n = {args.n}")
    print(f"{'m':>6} {'naive B':>10} {'multiproof B':>13} {'ratio':>7} {'stubs':>6}")
    for m in (int(x) for x in args.subsets.split(",")):
        if m > args.n:
            continue
        subset = rng.sample(entries, m)
        d = merge_tree(subset)
        naive = naive_transfer_size(subset)
        enc = len(encode_multiproof(d))
        print(f"{m:>6} {naive:>10} {enc:>13} {naive / enc:>7.2f} {count_nodes(d.root)['stub']:>6}")

    trees = []
    state = dict(vmap)
    for block in range(args.blocks):
        if block:
            state = dict(state)
            for k in rng.sample(list(state), args.changes):
                state[k] = rng.randbytes(32)
        trees.append((block, merge_tree(split_tree(state, build_tree(state)))))
    seq = encode_sequence(trees)
    print(f"\nsequence of {args.blocks} full ledgers, {args.changes} changes per block")
    print(f"base multiproof: {len(seq.base)} B")
    for step in seq.deltas:
        print(f"block {step.block_index}: {len(step.changed)} entries, {step.payload_size()} B")
    print(f"restating every block: {len(seq.base) * args.blocks} B, sequence: {seq.payload_size()} B")


if __name__ == "__main__":
    main()
