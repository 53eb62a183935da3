"""Exception hierarchy shared by every layer of the package."""


class LedgerError(Exception):
    pass


class EmptyMapError(LedgerError, ValueError):
    pass


class KeyNotFoundError(LedgerError, KeyError):
    pass


class PrunedPathError(LedgerError, LookupError):
    """The requested key lies under a stub of a derivative tree."""


class DuplicateKeyError(LedgerError, ValueError):
    pass


class ConflictError(LedgerError, ValueError):
    """Two entries disagree on the hash of one tree position."""


class MalformedProofError(ConflictError):
    """An entry's proof ends before its key is separated from the others.

    Raised for proofs that cannot belong to the same tree as their
    companions, hence a kind of conflict.
    """


class RootMismatchError(LedgerError, ValueError):
    pass


class DecodeError(LedgerError, ValueError):
    pass


class EmptySequenceError(LedgerError, ValueError):
    pass


class BlockNotFoundError(LedgerError, KeyError):
    pass


class SignatureError(LedgerError):
    pass


class ConfigError(LedgerError, ValueError):
    pass
