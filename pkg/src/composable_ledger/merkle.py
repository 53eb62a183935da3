"""Sparse binary Merkle trie backing a verifiable map.

Keys are 32-byte digests read MSB-first as a 256-bit path (bit ``d`` picks
the child at depth ``d``: 0 left, 1 right). The trie branches at every
depth without path compression, so a key's leaf sits one level below the
longest bit-prefix it shares with any other key, and a proof's length is
the leaf depth.

Hashing::

    leaf      H(0x00 || key || value)
    internal  H(0x01 || left.hash || right.hash)
    empty     32 zero bytes
"""

from __future__ import annotations

import hashlib
from bisect import bisect_left
from typing import Mapping, NamedTuple, Union

from .errors import EmptyMapError, KeyNotFoundError, PrunedPathError

DIGEST_SIZE = 32
KEY_BITS = 256
EMPTY = bytes(DIGEST_SIZE)

LEAF_PREFIX = b"\x00"
INTERNAL_PREFIX = b"\x01"

_sha256 = hashlib.sha256

Digest = bytes
Key = bytes
Value = bytes
Proof = tuple  # tuple[Digest, ...], root-to-leaf
VerifiableMap = Mapping[Key, Value]


class Leaf(NamedTuple):
    key: Key
    value: Value
    hash: Digest


class Internal(NamedTuple):
    left: "Node"
    right: "Node"
    hash: Digest


class Stub(NamedTuple):
    """Hash-only stand-in for a pruned (or empty) subtree."""

    hash: Digest


Node = Union[Leaf, Internal, Stub]

EMPTY_STUB = Stub(EMPTY)


def sha256(data: bytes) -> Digest:
    return _sha256(data).digest()


def leaf_hash(key: Key, value: Value) -> Digest:
    return _sha256(LEAF_PREFIX + key + value).digest()


def node_hash(left: Digest, right: Digest) -> Digest:
    return _sha256(INTERNAL_PREFIX + left + right).digest()


def make_leaf(key: Key, value: Value) -> Leaf:
    return Leaf(key, value, leaf_hash(key, value))


def make_internal(left: Node, right: Node) -> Internal:
    return Internal(left, right, node_hash(left.hash, right.hash))


def digest_key(name: bytes | str) -> Key:
    """Map a user-facing name (URL, path, ...) to a fixed-width trie key."""
    if isinstance(name, str):
        name = name.encode("utf-8")
    return sha256(name)


def key_bit(key: Key, depth: int) -> int:
    return (key[depth >> 3] >> (7 - (depth & 7))) & 1


def prefix_threshold(key_int: int, depth: int) -> int:
    """Smallest key value sharing ``key_int``'s first ``depth`` bits with bit ``depth`` set.

    Over a sorted run of keys with a common ``depth``-bit prefix, bisecting
    on this value splits the run into its 0-side and 1-side.
    """
    shift = KEY_BITS - depth
    return ((key_int >> shift) << shift) | (1 << (shift - 1))


def build_tree(vmap: VerifiableMap) -> Node:
    """Build the trie for a nonempty map; the root hash ignores insertion order."""
    if not vmap:
        raise EmptyMapError("cannot build a tree over an empty map")
    items = sorted(vmap.items())
    for k, v in items:
        if len(k) != DIGEST_SIZE or len(v) != DIGEST_SIZE:
            raise ValueError(f"keys and values must be {DIGEST_SIZE} bytes")
    ints = [int.from_bytes(k, "big") for k, _ in items]

    def build(lo: int, hi: int, depth: int) -> Node:
        if hi - lo == 1:
            k, v = items[lo]
            return Leaf(k, v, _sha256(LEAF_PREFIX + k + v).digest())
        mid = bisect_left(ints, prefix_threshold(ints[lo], depth), lo, hi)
        left = build(lo, mid, depth + 1) if mid > lo else EMPTY_STUB
        right = build(mid, hi, depth + 1) if hi > mid else EMPTY_STUB
        return Internal(left, right, _sha256(INTERNAL_PREFIX + left.hash + right.hash).digest())

    return build(0, len(items), 0)


def lookup(tree: Node, key: Key) -> tuple[Value, Proof]:
    """Return ``(value, proof)`` for ``key``.

    Raises KeyNotFoundError when the key is absent and PrunedPathError when
    its path runs into a non-empty stub.
    """
    node = tree
    siblings = []
    depth = 0
    while True:
        if isinstance(node, Leaf):
            if node.key != key:
                raise KeyNotFoundError(key.hex())
            return node.value, tuple(siblings)
        if isinstance(node, Stub):
            if node.hash == EMPTY:
                raise KeyNotFoundError(key.hex())
            raise PrunedPathError(f"{key.hex()} is pruned at depth {depth}")
        if key_bit(key, depth):
            siblings.append(node.left.hash)
            node = node.right
        else:
            siblings.append(node.right.hash)
            node = node.left
        depth += 1


def get_proof(tree: Node, key: Key) -> Proof:
    return lookup(tree, key)[1]


def verify_proof(root: Digest, key: Key, value: Value, proof) -> bool:
    """Fold ``proof`` from the deepest sibling up and compare with ``root``."""
    if len(proof) > KEY_BITS or len(key) != DIGEST_SIZE:
        return False
    h = leaf_hash(key, value)
    for depth in range(len(proof) - 1, -1, -1):
        sibling = proof[depth]
        if key_bit(key, depth):
            h = node_hash(sibling, h)
        else:
            h = node_hash(h, sibling)
    return h == root


def iter_leaves(tree: Node) -> list[tuple[Leaf, Proof]]:
    """Every leaf with its proof, in key order."""
    out: list[tuple[Leaf, Proof]] = []
    path: list[Digest] = []

    def walk(node: Node) -> None:
        if isinstance(node, Leaf):
            out.append((node, tuple(path)))
        elif isinstance(node, Internal):
            path.append(node.right.hash)
            walk(node.left)
            path[-1] = node.left.hash
            walk(node.right)
            path.pop()

    walk(tree)
    return out


def leaf_depths(tree: Node) -> dict[Key, int]:
    return {leaf.key: len(proof) for leaf, proof in iter_leaves(tree)}


def count_nodes(tree: Node) -> dict[str, int]:
    counts = {"leaf": 0, "internal": 0, "stub": 0}
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, Internal):
            counts["internal"] += 1
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Leaf):
            counts["leaf"] += 1
        else:
            counts["stub"] += 1
    return counts
