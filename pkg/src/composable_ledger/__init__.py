"""Composable Merkle-backed ledgers: split commitments out of a verifiable
map, merge any subset into a derivative that keeps the original root, and
move them between notarized journals."""

from .compose import (
    DeltaStep,
    DerivativeTree,
    Entry,
    SequenceDelta,
    decode_multiproof,
    decode_sequence,
    encode_multiproof,
    encode_sequence,
    merge_tree,
    naive_transfer_size,
    resplit,
    split_tree,
)
from .errors import *  # noqa: F401,F403
from .ledger import (
    Block,
    Commitment,
    DerivativeStore,
    Journal,
    NestedProof,
    Notary,
    TransferPackage,
    adopt_package,
    export_package,
    get_nested_proof,
    import_package,
    journal_commit,
    notary_append,
    verify_block,
    verify_commitment,
    verify_nested,
)
from .merkle import EMPTY, build_tree, digest_key, get_proof, lookup, verify_proof

__version__ = "0.1.0"
