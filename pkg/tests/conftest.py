"""Shared fixtures: the benchmark dataset and a cross-module cache of
per-seed pipeline prep (baseline training + pseudo-labeling + quality
certification), which several empirical tests reuse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from intramix.data import NodeTable, SplitMasks, generate_sbm, make_split
from intramix.gcn import TrainConfig
from intramix.graph import Graph
from intramix.pipeline import PreparedSeed, benchmark_sbm_config, prepare_seed
from intramix.pseudolabel import EnsembleConfig

BENCH_TRAIN_CFG = TrainConfig()
BENCH_ENSEMBLE_CFG = EnsembleConfig()


@dataclass(frozen=True)
class Benchmark:
    graph: Graph
    table: NodeTable
    split: SplitMasks
    ground_truth: np.ndarray


@pytest.fixture(scope="session")
def benchmark() -> Benchmark:
    graph, table, ground_truth = generate_sbm(benchmark_sbm_config(seed=7))
    split = make_split(table, labels_per_class=5, val_size=500, seed=7)
    return Benchmark(graph, table, split, ground_truth)


@pytest.fixture(scope="session")
def prepared_cache() -> dict[int, PreparedSeed]:
    return {}


@pytest.fixture(scope="session")
def prepare(benchmark, prepared_cache):
    """Callable returning the cached PreparedSeed for a seed."""

    def _get(seed: int) -> PreparedSeed:
        if seed not in prepared_cache:
            prepared_cache[seed] = prepare_seed(
                benchmark.graph, benchmark.table, benchmark.split,
                benchmark.ground_truth, seed, BENCH_TRAIN_CFG, BENCH_ENSEMBLE_CFG,
            )
        return prepared_cache[seed]

    return _get
