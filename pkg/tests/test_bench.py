import itertools

import numpy as np
import pytest

from cpekit.bench import (
    BenchScenario,
    FlopModel,
    crossover_threshold,
    flop_costs,
    time_callable,
    timed_rank_bench,
)
from cpekit.errors import InputError


def test_mosaic_cost_of_worked_example():
    model = FlopModel.from_lengths(2, 5, [14, 14], [7, 7, 6, 6, 5])
    assert model.total_mosaic_columns == 11
    costs = flop_costs(model)
    assert costs["mcpe"] == 1100
    assert costs["pe_repeated"] == 2000 > costs["mcpe"]


def test_single_trial_of_equal_size_costs_the_same():
    costs = flop_costs(FlopModel(2, 3, (8,), (8,)))
    assert costs["pe_repeated"] == costs["mcpe"]


@pytest.mark.parametrize("C, c_bar, expected", [(11, 10, 2), (10, 10, 1), (1, 10, 1), (0, 3, 0), (21, 10, 3)])
def test_threshold_values(C, c_bar, expected):
    assert crossover_threshold(C, c_bar) == expected


def test_threshold_monotonicity():
    for C in range(0, 40):
        for c in range(1, 15):
            assert crossover_threshold(C + 1, c) >= crossover_threshold(C, c)
            assert crossover_threshold(C, c + 1) <= crossover_threshold(C, c)


def test_repeated_cost_exceeds_mosaic_exactly_when_columns_do():
    for trials in itertools.product(range(1, 5), repeat=3):
        for mosaic in ([3, 3, 2], [5, 5], [12]):
            costs = flop_costs(FlopModel(2, 4, trials, mosaic))
            assert (costs["pe_repeated"] > costs["mcpe"]) == (sum(trials) > sum(mosaic))


def test_threshold_matches_cost_comparison():
    C, c_bar = 11, 10
    K = crossover_threshold(C, c_bar)
    assert K * c_bar >= C and (K - 1) * c_bar < C


@pytest.mark.parametrize("args", [(5, 0), (5, 1.5), (-1, 2)])
def test_threshold_rejects_bad_counts(args):
    with pytest.raises(InputError):
        crossover_threshold(*args)


def test_model_rejects_bad_counts():
    with pytest.raises(InputError):
        FlopModel(2, 5, (0,), (3,))
    with pytest.raises(InputError):
        FlopModel(2, 5, (), (3,))
    with pytest.raises(InputError):
        FlopModel(0, 5, (1,), (3,))


def test_tiny_matrices_are_inconclusive():
    rep = timed_rank_bench([BenchScenario("a", np.eye(2)), BenchScenario("b", np.eye(2))], repeats=5, min_ratio=50.0)
    assert not rep.conclusive
    assert set(rep.ordering) == {"a", "b"}


def test_report_csv(tmp_path):
    rep = timed_rank_bench([BenchScenario("x", np.ones((3, 4)))], repeats=3, warmups=0)
    rep.write_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "mode,rows,cols,median_seconds"
    assert lines[1].startswith("x,3,4,")
    assert rep.median("x") > 0
    with pytest.raises(KeyError):
        rep.median("y")


def test_bench_validation():
    with pytest.raises(InputError):
        timed_rank_bench([])
    with pytest.raises(InputError):
        timed_rank_bench([BenchScenario("x", np.eye(2))], min_ratio=0.5)
    with pytest.raises(InputError):
        time_callable(lambda: None, repeats=0)
