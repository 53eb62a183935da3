"""Splitting verifiable maps into proof-carrying entries and merging them back.

``split_tree`` turns a tree into independent ``Entry`` records. ``merge_tree``
rebuilds a derivative tree from any subset of them: real leaves for the
included keys and stubs for everything else, with the source root intact.
Derivatives travel either as entry lists or as a multiproof, which is the
pruned tree serialized in pre-order so shared path hashes appear once.
"""

from __future__ import annotations

import base64
import binascii
import json
import struct
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    ConflictError,
    DecodeError,
    DuplicateKeyError,
    EmptyMapError,
    EmptySequenceError,
    KeyNotFoundError,
    MalformedProofError,
    RootMismatchError,
)
from .merkle import (
    DIGEST_SIZE,
    EMPTY,
    INTERNAL_PREFIX,
    KEY_BITS,
    LEAF_PREFIX,
    Digest,
    Internal,
    Key,
    Leaf,
    Node,
    Stub,
    VerifiableMap,
    iter_leaves,
    lookup,
    make_internal,
    make_leaf,
    prefix_threshold,
    _sha256,
)

TAG_LEAF = 0x00
TAG_INTERNAL = 0x01
TAG_STUB = 0x02


@dataclass(frozen=True)
class Entry:
    key: Key
    value: Digest
    proof: tuple

    def to_json(self) -> dict:
        return {
            "key": self.key.hex(),
            "value": self.value.hex(),
            "proof": [h.hex() for h in self.proof],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Entry":
        try:
            key = bytes.fromhex(obj["key"])
            value = bytes.fromhex(obj["value"])
            proof = tuple(bytes.fromhex(h) for h in obj["proof"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"bad entry record: {exc}") from exc
        if len(key) != DIGEST_SIZE or len(value) != DIGEST_SIZE:
            raise DecodeError("entry key and value must be 32 bytes")
        if any(len(h) != DIGEST_SIZE for h in proof) or len(proof) > KEY_BITS:
            raise DecodeError("bad proof in entry record")
        return cls(key, value, proof)


@dataclass
class DerivativeTree:
    """A possibly pruned tree together with the root it reproduces."""

    root: Node
    source_root: Digest
    hash_calls: int = field(default=0, compare=False)

    def keys(self) -> list[Key]:
        return [leaf.key for leaf, _ in iter_leaves(self.root)]

    def entries(self) -> list[Entry]:
        return [Entry(leaf.key, leaf.value, proof) for leaf, proof in iter_leaves(self.root)]


# -- entry lists --------------------------------------------------------------

def entries_to_json(entries: Iterable[Entry]) -> list[dict]:
    return [e.to_json() for e in entries]


def entries_from_json(objs) -> list[Entry]:
    if not isinstance(objs, list):
        raise DecodeError("entry list must be a JSON array")
    return [Entry.from_json(o) for o in objs]


def dumps_entries(entries: Iterable[Entry]) -> str:
    return json.dumps(entries_to_json(entries))


def encode_entry(entry: Entry) -> bytes:
    """Standalone binary record: key, value, u16 sibling count, siblings."""
    return entry.key + entry.value + struct.pack(">H", len(entry.proof)) + b"".join(entry.proof)


def naive_transfer_size(entries: Iterable[Entry]) -> int:
    """Bytes needed to ship ``entries`` as independent binary records."""
    return sum(2 * DIGEST_SIZE + 2 + DIGEST_SIZE * len(e.proof) for e in entries)


# -- split / merge --------------------------------------------------------------

def split_tree(vmap: VerifiableMap, tree: Node) -> list[Entry]:
    """One entry per map pair, each carrying its proof in ``tree``."""
    found = {leaf.key: (leaf.value, proof) for leaf, proof in iter_leaves(tree)}
    out = []
    for key, value in vmap.items():
        hit = found.get(key)
        if hit is None:
            lookup(tree, key)  # raises the precise error (absent vs pruned)
            raise KeyNotFoundError(key.hex())
        if hit[0] != value:
            raise ConflictError(f"value for {key.hex()} differs from the tree leaf")
        out.append(Entry(key, value, hit[1]))
    return out


def _sorted_entries(entries: Iterable[Entry]) -> list[Entry]:
    ordered = sorted(entries, key=lambda e: e.key)
    if not ordered:
        raise EmptyMapError("merge needs at least one entry")
    for a, b in zip(ordered, ordered[1:]):
        if a.key == b.key:
            raise DuplicateKeyError(a.key.hex())
    return ordered


def _conflict(entry: Entry, depth: int) -> ConflictError:
    return ConflictError(f"entry {entry.key.hex()} disagrees with the tree at depth {depth}")


def merge_tree(entries: Iterable[Entry], expected_root: Digest | None = None) -> DerivativeTree:
    """Recompose entries into a derivative tree that reproduces the source root.

    Entries are partitioned by key bit depth by depth. A singleton whose
    proof ends at the current depth becomes a leaf; an empty side becomes a
    stub carrying the sibling hash the other side's proofs supply.

    Consistency is checked in two parts. Key-adjacent entries must carry
    identical siblings above the depth where their keys diverge, so every
    entry under a node shares that node's upper proof; one representative
    per side is then compared with the subtree actually built beside it.
    Together these mean every input entry verifies against the result.
    """
    ordered = _sorted_entries(entries)
    ints = [int.from_bytes(e.key, "big") for e in ordered]
    proofs = [e.proof for e in ordered]
    for i in range(len(ordered) - 1):
        split = KEY_BITS - (ints[i] ^ ints[i + 1]).bit_length()
        if proofs[i][:split] != proofs[i + 1][:split]:
            a, b = proofs[i], proofs[i + 1]
            depth = next((d for d in range(min(len(a), len(b), split)) if a[d] != b[d]), None)
            if depth is None:
                raise _malformed(ordered[i] if len(a) < len(b) else ordered[i + 1])
            raise _conflict(ordered[i + 1], depth)
    calls = 0

    def rec(lo: int, hi: int, depth: int) -> Node:
        nonlocal calls
        if hi - lo == 1:
            e = ordered[lo]
            proof = proofs[lo]
            if len(proof) < depth:
                raise _malformed(e)
            node = Leaf(e.key, e.value, _sha256(LEAF_PREFIX + e.key + e.value).digest())
            key = ints[lo]
            # lone entry above its leaf depth: its own proof supplies every stub
            for d in range(len(proof) - 1, depth - 1, -1):
                if (key >> (KEY_BITS - 1 - d)) & 1:
                    node = Internal(Stub(proof[d]), node, _sha256(INTERNAL_PREFIX + proof[d] + node.hash).digest())
                else:
                    node = Internal(node, Stub(proof[d]), _sha256(INTERNAL_PREFIX + node.hash + proof[d]).digest())
            calls += len(proof) - depth + 1
            return node
        mid = bisect_left(ints, prefix_threshold(ints[lo], depth), lo, hi)
        try:
            if mid == lo:
                left = Stub(proofs[mid][depth])
                right = rec(mid, hi, depth + 1)
            elif mid == hi:
                left = rec(lo, mid, depth + 1)
                right = Stub(proofs[lo][depth])
            else:
                left = rec(lo, mid, depth + 1)
                right = rec(mid, hi, depth + 1)
                if proofs[lo][depth] != right.hash:
                    raise _conflict(ordered[lo], depth)
                if proofs[mid][depth] != left.hash:
                    raise _conflict(ordered[mid], depth)
        except IndexError:
            raise _malformed(ordered[lo if mid > lo else mid]) from None
        calls += 1
        return Internal(left, right, _sha256(INTERNAL_PREFIX + left.hash + right.hash).digest())

    root = rec(0, len(ordered), 0)
    if expected_root is not None and root.hash != expected_root:
        raise RootMismatchError(f"merged root {root.hash.hex()} != expected {expected_root.hex()}")
    return DerivativeTree(root, root.hash, calls)


def _malformed(entry: Entry) -> MalformedProofError:
    return MalformedProofError(f"proof of {entry.key.hex()} ends before the key is separated")


def resplit(derivative: DerivativeTree, keys: Iterable[Key]) -> list[Entry]:
    """Split selected keys back out of a derivative tree."""
    out = []
    for key in keys:
        value, proof = lookup(derivative.root, key)
        out.append(Entry(key, value, proof))
    return out


# -- multiproof -------------------------------------------------------------------

def encode_multiproof(derivative: DerivativeTree | Node) -> bytes:
    """Pre-order serialization: 0x00 key value | 0x01 left right | 0x02 hash."""
    root = derivative.root if isinstance(derivative, DerivativeTree) else derivative
    out = bytearray()
    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, Internal):
            out.append(TAG_INTERNAL)
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Leaf):
            out.append(TAG_LEAF)
            out += node.key
            out += node.value
        else:
            out.append(TAG_STUB)
            out += node.hash
    return bytes(out)


def decode_multiproof(data: bytes) -> DerivativeTree:
    """Inverse of ``encode_multiproof``; every hash is recomputed.

    Leaves whose key does not match their position in the tree are
    rejected, so every decoded leaf is reachable by ``lookup``.
    """
    data = bytes(data)
    size = len(data)
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > size:
            raise DecodeError("truncated multiproof")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    def rec(depth: int, prefix: int) -> Node:
        tag = take(1)[0]
        if tag == TAG_LEAF:
            key = take(DIGEST_SIZE)
            value = take(DIGEST_SIZE)
            if depth and int.from_bytes(key, "big") >> (KEY_BITS - depth) != prefix:
                raise DecodeError(f"leaf {key.hex()} does not belong at its position")
            return make_leaf(key, value)
        if tag == TAG_INTERNAL:
            if depth >= KEY_BITS:
                raise DecodeError("multiproof deeper than the key width")
            left = rec(depth + 1, prefix << 1)
            right = rec(depth + 1, (prefix << 1) | 1)
            return make_internal(left, right)
        if tag == TAG_STUB:
            return Stub(take(DIGEST_SIZE))
        raise DecodeError(f"unknown tag 0x{tag:02x} at offset {pos - 1}")

    root = rec(0, 0)
    if pos != size:
        raise DecodeError(f"{size - pos} trailing bytes after multiproof")
    return DerivativeTree(root, root.hash)


# -- sequence compression ------------------------------------------------------------

@dataclass
class DeltaStep:
    block_index: int
    changed: list[Entry]
    new_root: Digest
    removed: list[Key] = field(default_factory=list)

    def payload_size(self) -> int:
        return DIGEST_SIZE + naive_transfer_size(self.changed) + DIGEST_SIZE * len(self.removed)


@dataclass
class SequenceDelta:
    base_index: int
    base: bytes
    deltas: list[DeltaStep] = field(default_factory=list)

    def payload_size(self) -> int:
        return len(self.base) + sum(d.payload_size() for d in self.deltas)

    def to_json(self) -> dict:
        return {
            "base_index": self.base_index,
            "base": base64.b64encode(self.base).decode("ascii"),
            "deltas": [
                {
                    "block_index": d.block_index,
                    "changed": entries_to_json(d.changed),
                    "removed": [k.hex() for k in d.removed],
                    "new_root": d.new_root.hex(),
                }
                for d in self.deltas
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SequenceDelta":
        try:
            deltas = [
                DeltaStep(
                    int(d["block_index"]),
                    entries_from_json(d["changed"]),
                    bytes.fromhex(d["new_root"]),
                    [bytes.fromhex(k) for k in d.get("removed", [])],
                )
                for d in obj["deltas"]
            ]
            return cls(int(obj["base_index"]), base64.b64decode(obj["base"], validate=True), deltas)
        except (KeyError, TypeError, ValueError, binascii.Error) as exc:
            raise DecodeError(f"bad sequence record: {exc}") from exc


def _prune(node: Node, removed: set[Key]) -> Node:
    """Turn leaves for ``removed`` keys into stubs, collapsing leafless subtrees."""
    if not removed:
        return node
    if isinstance(node, Leaf):
        return Stub(node.hash) if node.key in removed else node
    if isinstance(node, Stub):
        return node
    left = _prune(node.left, removed)
    right = _prune(node.right, removed)
    if isinstance(left, Stub) and isinstance(right, Stub):
        return Stub(node.hash)
    if left is node.left and right is node.right:
        return node
    return Internal(left, right, node.hash)


def _has_leaf(node: Node) -> bool:
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Leaf):
            return True
        if isinstance(n, Internal):
            stack.append(n.left)
            stack.append(n.right)
    return False


def _has_other_leaf(node: Node | None, key: Key) -> bool:
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Leaf):
            if n.key != key:
                return True
        elif isinstance(n, Internal):
            stack.append(n.left)
            stack.append(n.right)
    return False


def graft(base: Node, entries: Iterable[Entry]) -> Node:
    """Overlay updated entries onto an existing derivative tree.

    Subtrees no entry touches are kept as they are. Stubs beside an entry's
    path take the sibling hash the entry supplies; real subtrees there must
    match it. Retained leaves displaced by a new neighbour move down.
    """
    ordered = sorted(entries, key=lambda e: e.key)
    if not ordered:
        return base
    for a, b in zip(ordered, ordered[1:]):
        if a.key == b.key:
            raise DuplicateKeyError(a.key.hex())
    ints = [int.from_bytes(e.key, "big") for e in ordered]
    proofs = [e.proof for e in ordered]
    keyset = {e.key for e in ordered}

    def rec(node: Node | None, lo: int, hi: int, depth: int) -> Node:
        if hi - lo == 1 and len(proofs[lo]) == depth:
            e = ordered[lo]
            if _has_other_leaf(node, e.key):
                raise _conflict(e, depth)
            return make_leaf(e.key, e.value)
        for i in range(lo, hi):
            if len(proofs[i]) <= depth:
                raise MalformedProofError(f"proof of {ordered[i].key.hex()} too short")
        if isinstance(node, Internal):
            lb, rb = node.left, node.right
        elif isinstance(node, Leaf) and node.key not in keyset:
            lb, rb = (None, node) if node.key[depth >> 3] >> (7 - (depth & 7)) & 1 else (node, None)
        else:
            lb = rb = None
        mid = bisect_left(ints, prefix_threshold(ints[lo], depth), lo, hi)
        left = rec(lb, lo, mid, depth + 1) if mid > lo else lb
        right = rec(rb, mid, hi, depth + 1) if hi > mid else rb
        if left is None or isinstance(left, Stub):
            left = Stub(proofs[mid][depth])
        if right is None or isinstance(right, Stub):
            right = Stub(proofs[lo][depth])
        for i in range(lo, mid):
            if proofs[i][depth] != right.hash:
                raise _conflict(ordered[i], depth)
        for i in range(mid, hi):
            if proofs[i][depth] != left.hash:
                raise _conflict(ordered[i], depth)
        return make_internal(left, right)

    return rec(base, 0, len(ordered), 0)


def _stub_covers(new: Node, prev: Node | None) -> set[Key]:
    """Keys whose proofs carry every stub hash of ``new`` that ``prev`` lacks."""
    need: set[Key] = set()

    def first_leaf(node: Node) -> Key | None:
        while isinstance(node, Internal):
            node = node.left if _has_leaf(node.left) else node.right
        return node.key if isinstance(node, Leaf) else None

    def walk(node: Node, old: Node | None) -> None:
        if not isinstance(node, Internal):
            return
        old_l = old.left if isinstance(old, Internal) else None
        old_r = old.right if isinstance(old, Internal) else None
        for child, old_child, sibling in ((node.left, old_l, node.right), (node.right, old_r, node.left)):
            if isinstance(child, Stub) and (old_child is None or old_child.hash != child.hash):
                k = first_leaf(sibling)
                if k is not None:
                    need.add(k)
            walk(child, old_child)

    walk(new, prev)
    return need


def _replay(prev: Node, step: DeltaStep) -> Node:
    return graft(_prune(prev, set(step.removed)), step.changed)


def _delta_candidates(prev: DerivativeTree, new: DerivativeTree):
    prev_entries = {e.key: e for e in prev.entries()}
    new_entries = new.entries()
    new_keys = {e.key for e in new_entries}
    removed = sorted(k for k in prev_entries if k not in new_keys)

    content = {
        e.key for e in new_entries
        if e.key not in prev_entries or prev_entries[e.key].value != e.value
    }
    # smallest first: changed content plus stub covers
    wanted = content | _stub_covers(new.root, prev.root)
    yield [e for e in new_entries if e.key in wanted], removed
    # every entry whose (key, value, proof) moved
    yield [e for e in new_entries if prev_entries.get(e.key) != e], removed
    # full restatement; replay degenerates to a plain merge
    yield new_entries, sorted(prev_entries)


def encode_sequence(trees: Sequence[tuple[int, DerivativeTree]]) -> SequenceDelta:
    """Encode successive states of one ledger as a base plus per-block deltas.

    Each delta lists the entries whose content changed since the previous
    state (plus entries whose proofs are needed to refresh changed stubs)
    and the new root. Every candidate delta is replayed before it is
    accepted; a larger restatement is used if the small one does not
    reproduce the next tree exactly.
    """
    if not trees:
        raise EmptySequenceError("nothing to encode")
    base_index, base_tree = trees[0]
    seq = SequenceDelta(base_index, encode_multiproof(base_tree))
    prev = base_tree
    for index, tree in trees[1:]:
        for changed, removed in _delta_candidates(prev, tree):
            step = DeltaStep(index, changed, tree.root.hash, list(removed))
            try:
                if _replay(prev.root, step) == tree.root:
                    break
            except ConflictError:
                continue
        else:  # pragma: no cover - the full restatement always replays
            raise RuntimeError(f"could not encode block {index}")
        seq.deltas.append(step)
        prev = tree
    return seq


def decode_sequence(seq: SequenceDelta) -> list[DerivativeTree]:
    """Replay a sequence; every replayed root is checked against its record."""
    trees = [decode_multiproof(seq.base)]
    for step in seq.deltas:
        node = _replay(trees[-1].root, step)
        if node.hash != step.new_root:
            raise RootMismatchError(
                f"block {step.block_index}: replayed root {node.hash.hex()} "
                f"!= recorded {step.new_root.hex()}"
            )
        trees.append(DerivativeTree(node, node.hash))
    return trees


__all__ = [
    "Entry",
    "DerivativeTree",
    "DeltaStep",
    "SequenceDelta",
    "split_tree",
    "merge_tree",
    "resplit",
    "encode_multiproof",
    "decode_multiproof",
    "encode_sequence",
    "decode_sequence",
    "graft",
    "encode_entry",
    "naive_transfer_size",
    "entries_to_json",
    "entries_from_json",
    "dumps_entries",
    "EMPTY",
]
