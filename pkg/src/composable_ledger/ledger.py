"""Notaries, journals and the transfer workflows between archives.

A notary keeps a hash-chained list of Ed25519-signed blocks; each block
commits one verifiable-map root at a discrete index. A journal owns the
map, rebuilds its tree on every commit and has the notary seal the new
root. Commitments, transfer packages and nested proofs are what leaves a
journal and what a verifier checks.
"""

from __future__ import annotations

import base64
import binascii
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)

from .compose import (
    DerivativeTree,
    Entry,
    decode_multiproof,
    encode_multiproof,
    entries_from_json,
    entries_to_json,
    merge_tree,
    split_tree,
)
from .errors import (
    BlockNotFoundError,
    DecodeError,
    KeyNotFoundError,
    RootMismatchError,
    SignatureError,
)
from .merkle import (
    DIGEST_SIZE,
    EMPTY,
    Digest,
    Key,
    Node,
    Value,
    build_tree,
    digest_key,
    lookup,
    sha256,
    verify_proof,
)

FORMAT_VERSION = 1
SIGNATURE_SIZE = 64


# -- blocks and notaries -----------------------------------------------------------

def signing_message(index: int, root: Digest, prev_hash: Digest) -> bytes:
    return sha256(struct.pack(">Q", index) + root + prev_hash)


@dataclass(frozen=True)
class Block:
    index: int
    root: Digest
    prev_hash: Digest
    signature: bytes

    def record(self) -> bytes:
        return struct.pack(">Q", self.index) + self.root + self.prev_hash + self.signature

    def hash(self) -> Digest:
        return sha256(self.record())

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "root": self.root.hex(),
            "prev_hash": self.prev_hash.hex(),
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Block":
        try:
            block = cls(
                int(obj["index"]),
                bytes.fromhex(obj["root"]),
                bytes.fromhex(obj["prev_hash"]),
                bytes.fromhex(obj["signature"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"bad block record: {exc}") from exc
        if (
            block.index < 0
            or len(block.root) != DIGEST_SIZE
            or len(block.prev_hash) != DIGEST_SIZE
            or len(block.signature) != SIGNATURE_SIZE
        ):
            raise DecodeError("block fields have the wrong width")
        return block


def _public_key(pubkey: bytes | str | Ed25519PublicKey) -> Ed25519PublicKey | None:
    if isinstance(pubkey, Ed25519PublicKey):
        return pubkey
    try:
        raw = bytes.fromhex(pubkey) if isinstance(pubkey, str) else bytes(pubkey)
        return Ed25519PublicKey.from_public_bytes(raw)
    except ValueError:
        return None


def check_signature(pubkey, message: bytes, signature: bytes) -> bool:
    key = _public_key(pubkey)
    if key is None:
        return False
    try:
        key.verify(signature, message)
    except InvalidSignature:
        return False
    return True


@dataclass
class Notary:
    private_key: Ed25519PrivateKey
    notary_id: str = ""
    chain: list[Block] = field(default_factory=list)

    def __post_init__(self):
        if not self.notary_id:
            self.notary_id = self.public_key.hex()

    @classmethod
    def generate(cls, notary_id: str = "", seed: bytes | None = None) -> "Notary":
        if seed is None:
            key = Ed25519PrivateKey.generate()
        else:
            key = Ed25519PrivateKey.from_private_bytes(sha256(seed))
        return cls(key, notary_id)

    @property
    def public_key(self) -> bytes:
        return self.private_key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    @property
    def seed(self) -> bytes:
        return self.private_key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption())

    def block(self, index: int) -> Block:
        if not 0 <= index < len(self.chain):
            raise BlockNotFoundError(index)
        return self.chain[index]


def notary_append(notary: Notary, root: Digest) -> Block:
    if len(root) != DIGEST_SIZE:
        raise ValueError("root must be 32 bytes")
    index = len(notary.chain)
    prev_hash = notary.chain[-1].hash() if notary.chain else EMPTY
    signature = notary.private_key.sign(signing_message(index, root, prev_hash))
    block = Block(index, root, prev_hash, signature)
    notary.chain.append(block)
    return block


def verify_block(block: Block, pubkey, prev: Block | None = None) -> bool:
    if not check_signature(pubkey, signing_message(block.index, block.root, block.prev_hash), block.signature):
        return False
    if prev is None:
        return block.index == 0 and block.prev_hash == EMPTY
    return block.index == prev.index + 1 and block.prev_hash == prev.hash()


def verify_chain(chain: Sequence[Block], pubkey) -> bool:
    prev = None
    for block in chain:
        if not verify_block(block, pubkey, prev):
            return False
        prev = block
    return True


# -- journals ------------------------------------------------------------------

@dataclass
class Journal:
    notary: Notary
    current: dict[Key, Value] = field(default_factory=dict)
    tree: Node | None = None
    history: dict[int, tuple[Digest, dict[Key, Value]]] = field(default_factory=dict)
    _trees: dict[int, Node] = field(default_factory=dict, repr=False)

    def snapshot(self, index: int) -> dict[Key, Value]:
        if index not in self.history:
            raise BlockNotFoundError(index)
        return self.history[index][1]

    def tree_at(self, index: int) -> Node:
        if index not in self._trees:
            self._trees[index] = build_tree(self.snapshot(index))
        return self._trees[index]

    def block(self, index: int) -> Block:
        if index not in self.history:
            raise BlockNotFoundError(index)
        return self.notary.block(index)

    @property
    def head(self) -> Block:
        return self.notary.chain[-1]

    def save(self, directory: str | Path) -> None:
        """Persist as ``chain.json``, ``notary.json`` and ``snapshots/<index>.json``."""
        d = Path(directory)
        (d / "snapshots").mkdir(parents=True, exist_ok=True)
        (d / "notary.json").write_text(json.dumps({
            "notary_id": self.notary.notary_id,
            "public_key": self.notary.public_key.hex(),
            "private_seed": self.notary.seed.hex(),
        }, indent=2))
        (d / "chain.json").write_text(json.dumps([b.to_json() for b in self.notary.chain], indent=2))
        for index, (_, snap) in self.history.items():
            path = d / "snapshots" / f"{index}.json"
            if not path.exists():
                path.write_text(json.dumps({k.hex(): v.hex() for k, v in sorted(snap.items())}, indent=1))

    @classmethod
    def load(cls, directory: str | Path) -> "Journal":
        d = Path(directory)
        try:
            meta = json.loads((d / "notary.json").read_text())
            key = Ed25519PrivateKey.from_private_bytes(bytes.fromhex(meta["private_seed"]))
            chain = [Block.from_json(b) for b in json.loads((d / "chain.json").read_text())]
        except (OSError, KeyError, ValueError) as exc:
            raise DecodeError(f"cannot load journal from {d}: {exc}") from exc
        notary = Notary(key, meta["notary_id"], chain)
        journal = cls(notary)
        for block in chain:
            path = d / "snapshots" / f"{block.index}.json"
            if not path.exists():
                continue
            snap = {bytes.fromhex(k): bytes.fromhex(v) for k, v in json.loads(path.read_text()).items()}
            journal.history[block.index] = (block.root, snap)
            journal.current = snap
        if journal.current:
            journal.tree = build_tree(journal.current)
        return journal


def journal_commit(journal: Journal, updates: Mapping[Key, Value] | Iterable[tuple[Key, Value]]) -> Block:
    """Apply inserts/overwrites, rebuild the tree and notarize its root."""
    new_map = dict(journal.current)
    new_map.update(updates)
    tree = build_tree(new_map)  # raises before anything is mutated
    block = notary_append(journal.notary, tree.hash)
    journal.current = new_map
    journal.tree = tree
    journal.history[block.index] = (tree.hash, new_map)
    journal._trees[block.index] = tree
    return block


# -- commitments -----------------------------------------------------------------

@dataclass(frozen=True)
class Commitment:
    entry: Entry
    notary_id: str
    block_index: int
    root: Digest
    prev_hash: Digest
    signature: bytes

    def to_json(self) -> dict:
        return {
            "notary_id": self.notary_id,
            "block_index": self.block_index,
            "root": self.root.hex(),
            "prev_hash": self.prev_hash.hex(),
            "signature": self.signature.hex(),
            **self.entry.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Commitment":
        try:
            return cls(
                Entry.from_json(obj),
                str(obj["notary_id"]),
                int(obj["block_index"]),
                bytes.fromhex(obj["root"]),
                bytes.fromhex(obj["prev_hash"]),
                bytes.fromhex(obj["signature"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"bad commitment record: {exc}") from exc


def make_commitments(notary_id: str, block: Block, entries: Iterable[Entry]) -> list[Commitment]:
    return [
        Commitment(e, notary_id, block.index, block.root, block.prev_hash, block.signature)
        for e in entries
    ]


def journal_commitments(journal: Journal, block_index: int, keys: Iterable[Key]) -> list[Commitment]:
    block = journal.block(block_index)
    tree = journal.tree_at(block_index)
    entries = []
    for key in keys:
        value, proof = lookup(tree, key)
        entries.append(Entry(key, value, proof))
    return make_commitments(journal.notary.notary_id, block, entries)


def verify_commitment(c: Commitment, pubkey) -> bool:
    e = c.entry
    if len(c.root) != DIGEST_SIZE or len(c.prev_hash) != DIGEST_SIZE or c.block_index < 0:
        return False
    if not verify_proof(c.root, e.key, e.value, e.proof):
        return False
    return check_signature(pubkey, signing_message(c.block_index, c.root, c.prev_hash), c.signature)


# -- transfer packages -------------------------------------------------------------

@dataclass
class TransferPackage:
    notary_id: str
    block: Block
    payload: list[Entry] | bytes
    format_version: int = FORMAT_VERSION

    @property
    def payload_kind(self) -> str:
        return "multiproof" if isinstance(self.payload, (bytes, bytearray)) else "entries"

    def derivative(self) -> DerivativeTree:
        """Decode the payload and check it reproduces the block root."""
        if self.payload_kind == "multiproof":
            tree = decode_multiproof(self.payload)
            if tree.source_root != self.block.root:
                raise RootMismatchError("multiproof root differs from the block root")
            return tree
        return merge_tree(self.payload, self.block.root)

    def to_json(self) -> dict:
        if self.payload_kind == "multiproof":
            payload = base64.b64encode(self.payload).decode("ascii")
        else:
            payload = entries_to_json(self.payload)
        return {
            "format_version": self.format_version,
            "notary_id": self.notary_id,
            "block": self.block.to_json(),
            "payload_kind": self.payload_kind,
            "payload": payload,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TransferPackage":
        try:
            version = int(obj["format_version"])
            kind = obj["payload_kind"]
            notary_id = str(obj["notary_id"])
            block = Block.from_json(obj["block"])
            raw = obj["payload"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"bad package: {exc}") from exc
        if version != FORMAT_VERSION:
            raise DecodeError(f"unsupported package version {version}")
        if kind == "entries":
            payload = entries_from_json(raw)
        elif kind == "multiproof":
            try:
                payload = base64.b64decode(raw, validate=True)
            except (TypeError, binascii.Error) as exc:
                raise DecodeError(f"bad multiproof payload: {exc}") from exc
        else:
            raise DecodeError(f"unknown payload kind {kind!r}")
        return cls(notary_id, block, payload, version)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "TransferPackage":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DecodeError(f"package is not JSON: {exc}") from exc
        return cls.from_json(obj)


def export_package(
    journal: Journal, block_index: int, keys: Iterable[Key], use_multiproof: bool = False
) -> TransferPackage:
    """Split selected keys of a notarized snapshot into a transfer package."""
    block = journal.block(block_index)
    snap = journal.snapshot(block_index)
    selected = {}
    for key in keys:
        if key not in snap:
            raise KeyNotFoundError(key.hex())
        selected[key] = snap[key]
    entries = split_tree(selected, journal.tree_at(block_index))
    if use_multiproof:
        payload = encode_multiproof(merge_tree(entries, block.root))
    else:
        payload = entries
    return TransferPackage(journal.notary.notary_id, block, payload)


# -- receiving side ------------------------------------------------------------------

@dataclass
class DerivativeStore:
    """Imported derivatives keyed by ``(notary_id, block_index)``."""

    trees: dict[tuple[str, int], DerivativeTree] = field(default_factory=dict)
    blocks: dict[tuple[str, int], Block] = field(default_factory=dict)

    def get(self, notary_id: str, block_index: int) -> DerivativeTree:
        return self.trees[(notary_id, block_index)]

    def commitments(self, notary_id: str, block_index: int) -> list[Commitment]:
        tree = self.trees[(notary_id, block_index)]
        return make_commitments(notary_id, self.blocks[(notary_id, block_index)], tree.entries())

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        records = [
            {
                "notary_id": nid,
                "block": self.blocks[(nid, idx)].to_json(),
                "multiproof": base64.b64encode(encode_multiproof(tree)).decode("ascii"),
            }
            for (nid, idx), tree in sorted(self.trees.items())
        ]
        (d / "store.json").write_text(json.dumps(records, indent=1))

    @classmethod
    def load(cls, directory: str | Path) -> "DerivativeStore":
        path = Path(directory) / "store.json"
        store = cls()
        if not path.exists():
            return store
        try:
            records = json.loads(path.read_text())
            for rec in records:
                block = Block.from_json(rec["block"])
                tree = decode_multiproof(base64.b64decode(rec["multiproof"], validate=True))
                store.trees[(rec["notary_id"], block.index)] = tree
                store.blocks[(rec["notary_id"], block.index)] = block
        except (KeyError, TypeError, ValueError, binascii.Error) as exc:
            raise DecodeError(f"corrupt store {path}: {exc}") from exc
        return store


def _resolve_pubkey(package: TransferPackage, pubkey) -> bytes | str:
    # notary ids default to the hex public key; fall back to that when no key is pinned
    return package.notary_id if pubkey is None else pubkey


def check_package(package: TransferPackage, pubkey=None) -> DerivativeTree:
    """Verify signature and payload; return the derivative it carries."""
    block = package.block
    key = _resolve_pubkey(package, pubkey)
    if not check_signature(key, signing_message(block.index, block.root, block.prev_hash), block.signature):
        raise SignatureError(f"block {block.index} signature does not verify for {package.notary_id}")
    return package.derivative()


def import_package(store: DerivativeStore, package: TransferPackage, notary_pubkey=None) -> DerivativeTree:
    """Verify a package and merge it into the store.

    A second import for the same block merges the union of old and new
    entries, which must still reproduce the block root.
    """
    incoming = check_package(package, notary_pubkey)
    slot = (package.notary_id, package.block.index)
    existing = store.trees.get(slot)
    if existing is not None:
        entries = {e.key: e for e in existing.entries()}
        entries.update((e.key, e) for e in incoming.entries())
        incoming = merge_tree(entries.values(), package.block.root)
    store.trees[slot] = incoming
    store.blocks[slot] = package.block
    return incoming


def adoption_key(notary_id: str, block_index: int) -> Key:
    return digest_key(notary_id.encode("utf-8") + struct.pack(">Q", block_index))


def adopt_package(journal: Journal, package: TransferPackage, notary_pubkey=None) -> Block:
    """Re-notarize a foreign root under the local chain."""
    check_package(package, notary_pubkey)
    key = adoption_key(package.notary_id, package.block.index)
    return journal_commit(journal, {key: package.block.root})


# -- hierarchy -------------------------------------------------------------------------

@dataclass(frozen=True)
class NestedProof:
    """Chain of ``(key, value, proof)`` segments, outermost map first.

    Each segment's value is the root the next segment verifies against;
    the last value is the content digest.
    """

    segments: tuple[Entry, ...]


def get_nested_proof(trees: Sequence[Node], path: Sequence[Key]) -> NestedProof:
    if not trees or len(trees) != len(path):
        raise ValueError("need one key per hierarchy level")
    segments = []
    for level, (tree, key) in enumerate(zip(trees, path)):
        value, proof = lookup(tree, key)
        if level + 1 < len(trees) and value != trees[level + 1].hash:
            raise ValueError(f"level {level} value is not the root of level {level + 1}")
        segments.append(Entry(key, value, proof))
    return NestedProof(tuple(segments))


def verify_nested(root: Digest, nested: NestedProof) -> bool:
    if not nested.segments:
        return False
    expected = root
    for seg in nested.segments:
        if not verify_proof(expected, seg.key, seg.value, seg.proof):
            return False
        expected = seg.value
    return True


def adopted_nested_proof(journal: Journal, block_index: int, package: TransferPackage, key: Key) -> NestedProof:
    """Two-segment proof of a foreign key against a local block root."""
    local_key = adoption_key(package.notary_id, package.block.index)
    foreign_root, local_proof = lookup(journal.tree_at(block_index), local_key)
    value, foreign_proof = lookup(package.derivative().root, key)
    return NestedProof((Entry(local_key, foreign_root, local_proof), Entry(key, value, foreign_proof)))
