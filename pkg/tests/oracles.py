"""Brute-force reference computations, deliberately naive.

Nothing here imports the package: keys are handled as '0'/'1' strings and
hashing goes straight through hashlib.
"""

import hashlib
import random

ZERO = bytes(32)


def H(data):
    return hashlib.sha256(data).digest()


def bits(key):
    return "".join(format(b, "08b") for b in key)


def subtree_hash(group, depth):
    """Hash of the trie over ``group`` [(bitstring, key, value)] rooted at ``depth``."""
    if not group:
        return ZERO
    if len(group) == 1:
        _, k, v = group[0]
        return H(b"\x00" + k + v)
    zeros = [g for g in group if g[0][depth] == "0"]
    ones = [g for g in group if g[0][depth] == "1"]
    return H(b"\x01" + subtree_hash(zeros, depth + 1) + subtree_hash(ones, depth + 1))


def _groups(vmap):
    return [(bits(k), k, v) for k, v in vmap.items()]


def oracle_root(vmap):
    return subtree_hash(_groups(vmap), 0)


def common_prefix(a, b):
    n = 0
    while n < len(a) and a[n] == b[n]:
        n += 1
    return n


def oracle_depths(vmap):
    """Leaf depth by the pairwise law: 1 + longest shared prefix, 0 if alone."""
    keys = [bits(k) for k in vmap]
    out = {}
    for k, kb in zip(vmap, keys):
        others = [common_prefix(kb, o) for o in keys if o != kb]
        out[k] = 1 + max(others) if others else 0
    return out


def oracle_proof(vmap, key, depths=None):
    depths = depths or oracle_depths(vmap)
    group = _groups(vmap)
    kb = bits(key)
    proof = []
    for d in range(depths[key]):
        sib_prefix = kb[:d] + ("1" if kb[d] == "0" else "0")
        sib = [g for g in group if g[0].startswith(sib_prefix)]
        proof.append(subtree_hash(sib, d + 1))
    return tuple(proof)


def oracle_boundary_positions(vmap, subset_keys):
    """Tree positions that must appear as stubs when only ``subset_keys`` are kept.

    A position is a sibling of some kept key's path that contains no kept key.
    """
    depths = oracle_depths(vmap)
    kept = [bits(k) for k in subset_keys]
    out = set()
    for k, kb in zip(subset_keys, kept):
        for d in range(depths[k]):
            sib = kb[:d] + ("1" if kb[d] == "0" else "0")
            if not any(o.startswith(sib) for o in kept):
                out.add(sib)
    return out


def random_map(n, rng):
    out = {}
    while len(out) < n:
        out[rng.randbytes(32)] = rng.randbytes(32)
    return out


def clustered_map(n, rng, prefix_bytes=1):
    """Keys forced to share leading bytes, so leaves sit deep and EMPTY siblings appear."""
    head = rng.randbytes(prefix_bytes)
    out = {}
    while len(out) < n:
        out[head + rng.randbytes(32 - prefix_bytes)] = rng.randbytes(32)
    return out


def rng_for(*parts):
    return random.Random(":".join(map(str, parts)))
