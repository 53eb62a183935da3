"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 malformed input,
3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import DEFAULT_SIZES, BenchConfig, fit_scaling, run_bench
from .errors import ConfigError, ConflictError, LedgerError, RootMismatchError, SignatureError
from .ledger import (
    Commitment,
    DerivativeStore,
    Journal,
    Notary,
    TransferPackage,
    adopt_package,
    export_package,
    import_package,
    journal_commit,
    journal_commitments,
    verify_commitment,
)
from .merkle import digest_key, sha256

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _names(spec: str) -> list[bytes]:
    return [digest_key(k) for k in spec.split(",") if k]


def cmd_init(args) -> int:
    d = Path(args.dir)
    if (d / "chain.json").exists():
        raise UsageError(f"{d} already holds a journal")
    journal = Journal(Notary.generate(args.notary_id or ""))
    journal.save(d)
    print(journal.notary.notary_id)
    return EXIT_OK


def cmd_commit(args) -> int:
    journal = Journal.load(args.dir)
    updates = {}
    for kv in args.kv:
        name, sep, path = kv.partition("=")
        if not sep or not name:
            raise UsageError(f"expected key=file, got {kv!r}")
        try:
            content = Path(path).read_bytes()
        except OSError as exc:
            raise UsageError(str(exc)) from exc
        updates[digest_key(name)] = sha256(content)
    block = journal_commit(journal, updates)
    journal.save(args.dir)
    print(json.dumps(block.to_json()))
    return EXIT_OK


def cmd_export(args) -> int:
    journal = Journal.load(args.dir)
    keys = list(journal.snapshot(args.block)) if args.all else _names(args.keys or "")
    if not keys:
        raise UsageError("no keys selected (use --keys or --all)")
    package = export_package(journal, args.block, keys, use_multiproof=args.multiproof)
    Path(args.output).write_text(package.dumps())
    return EXIT_OK


def _read_package(path: str) -> TransferPackage:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    return TransferPackage.loads(text)


def cmd_import(args) -> int:
    store = DerivativeStore.load(args.store)
    package = _read_package(args.package)
    tree = import_package(store, package, args.pubkey)
    store.save(args.store)
    print(f"{package.notary_id} block {package.block.index}: {len(tree.keys())} keys, root {tree.source_root.hex()}")
    return EXIT_OK


def cmd_adopt(args) -> int:
    journal = Journal.load(args.dir)
    package = _read_package(args.package)
    block = adopt_package(journal, package, args.pubkey)
    journal.save(args.dir)
    print(json.dumps(block.to_json()))
    return EXIT_OK


def cmd_commitment(args) -> int:
    journal = Journal.load(args.dir)
    [c] = journal_commitments(journal, args.block, [digest_key(args.key)])
    Path(args.output).write_text(json.dumps(c.to_json(), indent=1))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        obj = json.loads(Path(args.commitment).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from exc
    c = Commitment.from_json(obj)
    ok = verify_commitment(c, args.pubkey)
    print("valid" if ok else "INVALID")
    return EXIT_OK if ok else EXIT_VERIFY


def _floats(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in s.split(",") if x)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _ints(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.split(",") if x)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_bench(args) -> int:
    config = BenchConfig(
        ratios=_floats(args.ratios),
        sizes=_ints(args.sizes),
        trials=args.trials,
        seed=args.seed,
        time_phases=args.phases,
    )
    report = run_bench(config, progress=lambda msg: print(msg, file=sys.stderr))
    csv_text = report.to_csv()
    if args.output:
        Path(args.output).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    if len(config.sizes) >= 4:
        for ratio, slope in fit_scaling(report).items():
            print(f"ratio={ratio} log-log slope={slope:.3f}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="composable-ledger", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="create a journal with a fresh notary key")
    s.add_argument("dir")
    s.add_argument("--notary-id", default="")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("commit", help="commit content digests and notarize the new root")
    s.add_argument("dir")
    s.add_argument("--kv", action="append", required=True, metavar="KEY=FILE")
    s.set_defaults(func=cmd_commit)

    s = sub.add_parser("export", help="split commitments into a transfer package")
    s.add_argument("dir")
    s.add_argument("--block", type=int, required=True)
    s.add_argument("--keys", help="comma-separated key names")
    s.add_argument("--all", action="store_true", help="export every key of the block")
    s.add_argument("--multiproof", action="store_true")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("import", help="verify and merge a package into a derivative store")
    s.add_argument("store")
    s.add_argument("package")
    s.add_argument("--pubkey", help="notary public key (hex); defaults to the package notary id")
    s.set_defaults(func=cmd_import)

    s = sub.add_parser("adopt", help="re-notarize a foreign package root in a local journal")
    s.add_argument("dir")
    s.add_argument("package")
    s.add_argument("--pubkey")
    s.set_defaults(func=cmd_adopt)

    s = sub.add_parser("commitment", help="write one commitment from a journal")
    s.add_argument("dir")
    s.add_argument("--block", type=int, required=True)
    s.add_argument("--key", required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_commitment)

    s = sub.add_parser("verify", help="check a commitment against a notary key")
    s.add_argument("commitment")
    s.add_argument("--pubkey", required=True)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("bench", help="merge-scaling benchmark with CSV output")
    s.add_argument("--ratios", default="1,0.1,0.01")
    s.add_argument("--sizes", default=",".join(map(str, DEFAULT_SIZES)))
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--phases", action="store_true", help="also time build and split")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SignatureError, RootMismatchError, ConflictError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (UsageError, LedgerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
