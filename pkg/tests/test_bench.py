import csv
import io

import pytest

from composable_ledger.bench import BenchConfig, BenchRow, _trial_rng, fit_scaling, run_bench, source_size
from composable_ledger.errors import ConfigError
from oracles import oracle_root, random_map, rng_for


def test_degenerate_single_entry():
    report = run_bench(BenchConfig(ratios=(1.0,), sizes=(1,), trials=1))
    [row] = report.rows
    assert (row.ratio, row.m, row.n, row.trial) == (1.0, 1, 1, 0)
    assert row.seconds > 0


def test_two_ratios_ten_trials():
    config = BenchConfig(ratios=(1.0, 0.1), sizes=(1024,), trials=10, seed=7)
    report = run_bench(config)
    assert len(report.rows) == 20
    assert {r.n for r in report.rows} == {1024, 10240}
    assert set(report.geomeans()) == {(1.0, 1024), (0.1, 1024)}
    lines = list(csv.reader(io.StringIO(report.to_csv())))
    assert lines[0] == ["ratio", "m", "n", "trial", "seconds"]
    assert sum(1 for l in lines if l[3] == "geomean") == 2
    assert len(lines) == 1 + 20 + 2 + 2  # header, trials, geomeans, means


def test_roots_match_an_independent_build():
    config = BenchConfig(ratios=(1.0,), sizes=(8,), trials=3, seed=11)
    report = run_bench(config)
    for row in report.rows:
        vmap = random_map(row.n, _trial_rng(11, 1.0, 8, row.trial))
        assert row.root == oracle_root(vmap)


def test_seeded_reruns_agree_on_everything_but_time():
    config = BenchConfig(ratios=(1.0, 0.5), sizes=(16, 32), trials=3, seed=5)
    a, b = run_bench(config), run_bench(config)
    strip = lambda rep: [(r.ratio, r.m, r.n, r.trial, r.root) for r in rep.rows]
    assert strip(a) == strip(b)
    other = run_bench(BenchConfig(ratios=(1.0, 0.5), sizes=(16, 32), trials=3, seed=6))
    assert strip(other) != strip(a)


def test_phase_columns():
    report = run_bench(BenchConfig(ratios=(0.5,), sizes=(4,), trials=2, time_phases=True))
    header = report.to_csv().splitlines()[0]
    assert header == "ratio,m,n,trial,seconds,build_seconds,split_seconds"
    assert all(r.build_seconds is not None and r.split_seconds is not None for r in report.rows)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(ratios=(0.0,)),
        dict(ratios=(1.5,)),
        dict(ratios=()),
        dict(sizes=(3,)),
        dict(sizes=(0,)),
        dict(trials=0),
    ],
)
def test_config_errors(kwargs):
    with pytest.raises(ConfigError):
        run_bench(BenchConfig(**{"sizes": (4,), "trials": 1, **kwargs}))


def test_source_size_rounds():
    assert source_size(1024, 0.1) == 10240
    assert source_size(64, 0.01) == 6400
    assert source_size(3, 0.7) == 4


def synthetic(power, c=3e-6):
    return [
        BenchRow(1.0, m, m, t, c * m ** power)
        for m in (2 ** k for k in range(10, 18))
        for t in range(10)
    ]


def test_fit_linear():
    assert fit_scaling(synthetic(1))[1.0] == pytest.approx(1.0, abs=1e-9)


def test_fit_quadratic():
    assert fit_scaling(synthetic(2))[1.0] == pytest.approx(2.0, abs=1e-9)


def test_fit_needs_four_sizes():
    rows = [r for r in synthetic(1) if r.m < 2 ** 13]
    with pytest.raises(ConfigError):
        fit_scaling(rows)


def test_fit_on_small_real_run():
    report = run_bench(BenchConfig(ratios=(1.0,), sizes=(64, 128, 256, 512, 1024), trials=3))
    slope = fit_scaling(report)[1.0]
    assert 0.5 < slope < 2.0
