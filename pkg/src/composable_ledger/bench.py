"""Merge-scaling benchmark: time merge_tree over m of n commitments."""

from __future__ import annotations

import csv
import gc
import io
import math
import random
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .compose import merge_tree, split_tree
from .errors import ConfigError, RootMismatchError
from .merkle import build_tree

DEFAULT_RATIOS = (1.0, 0.1, 0.01)
DEFAULT_SIZES = tuple(2 ** k for k in range(6, 13))


@dataclass
class BenchConfig:
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    sizes: tuple[int, ...] = DEFAULT_SIZES
    trials: int = 10
    seed: int = 42
    time_phases: bool = False  # also time tree build and split

    def validate(self) -> None:
        if not self.ratios or not self.sizes:
            raise ConfigError("need at least one ratio and one size")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        for r in self.ratios:
            if not 0 < r <= 1:
                raise ConfigError(f"ratio {r} outside (0, 1]")
        for m in self.sizes:
            if m < 1 or m & (m - 1):
                raise ConfigError(f"size {m} is not a power of two")
            for r in self.ratios:
                if source_size(m, r) < m:
                    raise ConfigError(f"m={m}, ratio={r} gives n < m")


def source_size(m: int, ratio: float) -> int:
    return int(round(m / ratio))


@dataclass
class BenchRow:
    ratio: float
    m: int
    n: int
    trial: int
    seconds: float
    root: bytes = b""
    build_seconds: float | None = None
    split_seconds: float | None = None


@dataclass
class BenchReport:
    config: BenchConfig
    rows: list[BenchRow] = field(default_factory=list)

    def cells(self) -> dict[tuple[float, int], list[BenchRow]]:
        out: dict[tuple[float, int], list[BenchRow]] = {}
        for row in self.rows:
            out.setdefault((row.ratio, row.m), []).append(row)
        return out

    def geomeans(self) -> dict[tuple[float, int], float]:
        return {k: statistics.geometric_mean([r.seconds for r in v]) for k, v in self.cells().items()}

    def means(self) -> dict[tuple[float, int], float]:
        return {k: statistics.fmean([r.seconds for r in v]) for k, v in self.cells().items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["ratio", "m", "n", "trial", "seconds"]
        if self.config.time_phases:
            header += ["build_seconds", "split_seconds"]
        w.writerow(header)
        for r in self.rows:
            row = [r.ratio, r.m, r.n, r.trial, f"{r.seconds:.9f}"]
            if self.config.time_phases:
                row += [f"{r.build_seconds:.9f}", f"{r.split_seconds:.9f}"]
            w.writerow(row)
        geo, mean = self.geomeans(), self.means()
        pad = [""] * (len(header) - 5)
        for (ratio, m), rows in self.cells().items():
            n = rows[0].n
            w.writerow([ratio, m, n, "geomean", f"{geo[(ratio, m)]:.9f}", *pad])
            w.writerow([ratio, m, n, "mean", f"{mean[(ratio, m)]:.9f}", *pad])
        return buf.getvalue()


def random_map(n: int, rng: random.Random) -> dict[bytes, bytes]:
    out: dict[bytes, bytes] = {}
    while len(out) < n:
        out[rng.randbytes(32)] = rng.randbytes(32)
    return out


def _trial_rng(seed: int, ratio: float, m: int, trial: int) -> random.Random:
    return random.Random(f"{seed}:{ratio!r}:{m}:{trial}")


def run_bench(config: BenchConfig, progress: Callable[[str], None] | None = None) -> BenchReport:
    """Run every (ratio, m) cell; each trial checks the merged root.

    Only ``merge_tree`` is timed. The collector is paused for the whole run,
    as ``timeit`` does, since every trial allocates a few hundred thousand
    tree nodes and collection pauses would otherwise dominate the timings.
    """
    config.validate()
    report = BenchReport(config)
    clock = time.perf_counter
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for ratio in config.ratios:
            for m in config.sizes:
                n = source_size(m, ratio)
                for trial in range(config.trials):
                    rng = _trial_rng(config.seed, ratio, m, trial)
                    vmap = random_map(n, rng)
                    t0 = clock()
                    tree = build_tree(vmap)
                    t1 = clock()
                    entries = split_tree(vmap, tree)
                    t2 = clock()
                    subset = entries if m == n else rng.sample(entries, m)
                    if trial == 0:
                        merge_tree(subset)  # untimed warm-up
                    t3 = clock()
                    merged = merge_tree(subset)
                    t4 = clock()
                    if merged.source_root != tree.hash:
                        raise RootMismatchError(f"ratio={ratio} m={m} trial={trial}: merged root differs")
                    # clamp keeps geometric means defined on coarse clocks
                    report.rows.append(BenchRow(
                        ratio, m, n, trial, max(t4 - t3, 1e-9), tree.hash,
                        t1 - t0 if config.time_phases else None,
                        t2 - t1 if config.time_phases else None,
                    ))
                    del vmap, tree, entries, subset, merged
                if progress is not None:
                    progress(f"ratio={ratio} m={m} n={n} geomean={report.geomeans()[(ratio, m)]:.6f}s")
    finally:
        if gc_was_enabled:
            gc.enable()
    return report


def fit_scaling(report: BenchReport | Iterable[BenchRow]) -> dict[float, float]:
    """Least-squares slope of log(geomean time) against log(m), per ratio."""
    rows = report.rows if isinstance(report, BenchReport) else list(report)
    cells: dict[tuple[float, int], list[float]] = {}
    for r in rows:
        cells.setdefault((r.ratio, r.m), []).append(r.seconds)
    by_ratio: dict[float, list[tuple[float, float]]] = {}
    for (ratio, m), secs in cells.items():
        by_ratio.setdefault(ratio, []).append((math.log(m), math.log(statistics.geometric_mean(secs))))
    slopes = {}
    for ratio, pts in by_ratio.items():
        if len(pts) < 4:
            raise ConfigError(f"ratio {ratio}: need at least 4 sizes, got {len(pts)}")
        xs, ys = zip(*sorted(pts))
        slopes[ratio] = statistics.linear_regression(xs, ys).slope
    return slopes
