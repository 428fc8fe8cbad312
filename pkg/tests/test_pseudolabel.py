import numpy as np
import pytest

from intramix.data import NodeTable, Provenance
from intramix.gcn import ModelParams, glorot_init, predict
from intramix.graph import build_graph
from intramix.metrics import accuracy
from intramix.pseudolabel import (
    EnsembleConfig,
    assign_pseudo_labels,
    corrupt_pseudo_labels,
    select_high_quality,
)


def tiny_setup(labels, provenance, num_classes=2, seed=0):
    n = len(labels)
    g = build_graph(n, [(i, i + 1) for i in range(n - 1)])
    rng = np.random.default_rng(seed)
    table = NodeTable(features=rng.standard_normal((n, 3)),
                      labels=np.asarray(labels, dtype=np.int64),
                      provenance=np.asarray(provenance, dtype=np.int8),
                      num_classes=num_classes)
    model = glorot_init(3, 4, num_classes, seed=seed)
    return g, table, model


class TestAssignPseudoLabels:
    def test_fully_labeled_table_unchanged(self):
        g, table, model = tiny_setup([0, 1, 0], [Provenance.GOLD] * 3)
        assert assign_pseudo_labels(model, g, table) is table

    def test_all_unlabeled_get_pseudo_tags(self):
        g, table, model = tiny_setup([-1] * 4, [Provenance.UNLABELED] * 4)
        out = assign_pseudo_labels(model, g, table)
        assert np.all(out.provenance == Provenance.PSEUDO)
        assert np.all(out.labels >= 0)
        assert out.tagged(Provenance.GOLD).size == 0

    def test_pseudo_labels_equal_plain_prediction(self):
        g, table, model = tiny_setup([0, -1, -1, 1],
                                     [Provenance.GOLD, Provenance.UNLABELED,
                                      Provenance.UNLABELED, Provenance.GOLD])
        out = assign_pseudo_labels(model, g, table)
        pred = predict(model, g, table)
        assert np.all(out.labels[[1, 2]] == pred[[1, 2]])
        assert np.all(out.labels[[0, 3]] == table.labels[[0, 3]])

    def test_benchmark_pseudo_accuracy_close_to_test_accuracy(self, benchmark, prepare):
        prep = prepare(0)
        pseudo = prep.table.tagged(Provenance.PSEUDO, Provenance.HIGH_QUALITY)
        pseudo_acc = accuracy(prep.table.labels, benchmark.ground_truth, pseudo)
        assert pseudo_acc >= prep.baseline_accuracy - 0.05


class TestSelectHighQuality:
    def test_single_trial_degenerate_ensemble(self):
        g, table, model = tiny_setup([-1] * 5, [Provenance.UNLABELED] * 5)
        labeled = assign_pseudo_labels(model, g, table)
        out = select_high_quality(model, g, labeled, EnsembleConfig((0.0,), seed=0))
        # dropout 0 reproduces the assignment pass exactly: all certified
        assert np.all(out.provenance == Provenance.HIGH_QUALITY)

    def test_zero_dropout_trial_equals_plain_agreement(self):
        g, table, model = tiny_setup([0, 1, -1, -1, -1],
                                     [Provenance.GOLD, Provenance.GOLD] + [Provenance.UNLABELED] * 3)
        labeled = assign_pseudo_labels(model, g, table)
        # overwrite one pseudo label so it disagrees with the prediction
        labels = labeled.labels.copy()
        labels[2] = 1 - labels[2]
        tampered = labeled.replace(labels=labels)
        out = select_high_quality(model, g, tampered, EnsembleConfig((0.0,), seed=0))
        assert out.provenance[2] == Provenance.PSEUDO
        assert np.all(out.provenance[[3, 4]] == Provenance.HIGH_QUALITY)

    def test_gold_nodes_count_as_high_quality(self):
        g, table, model = tiny_setup([0, -1], [Provenance.GOLD, Provenance.UNLABELED])
        labeled = assign_pseudo_labels(model, g, table)
        out = select_high_quality(model, g, labeled, EnsembleConfig((0.3, 0.5), seed=1))
        assert out.provenance[0] == Provenance.GOLD
        assert 0 in out.high_quality_indices()

    def test_labels_never_change(self, benchmark, prepare):
        prep = prepare(0)
        # prep.table went through selection already; rerun with another config
        out = select_high_quality(prep.params, benchmark.graph, prep.table,
                                  EnsembleConfig((0.2, 0.6), seed=5))
        assert np.array_equal(out.labels, prep.table.labels)

    def test_model_params_untouched(self):
        g, table, model = tiny_setup([-1] * 6, [Provenance.UNLABELED] * 6)
        snapshot = ModelParams([w.copy() for w in model.weights],
                               [b.copy() for b in model.biases])
        labeled = assign_pseudo_labels(model, g, table)
        select_high_quality(model, g, labeled, EnsembleConfig((0.3, 0.4, 0.5), seed=2))
        for a, b in zip(model.weights + model.biases, snapshot.weights + snapshot.biases):
            assert np.array_equal(a, b)

    def test_adding_trials_only_shrinks_the_set(self):
        g, table, model = tiny_setup([-1] * 40, [Provenance.UNLABELED] * 40,
                                     num_classes=3, seed=9)
        labeled = assign_pseudo_labels(model, g, table)
        small = select_high_quality(model, g, labeled, EnsembleConfig((0.5, 0.6), seed=3))
        big = select_high_quality(model, g, labeled, EnsembleConfig((0.5, 0.6, 0.7), seed=3))
        hq_small = set(small.tagged(Provenance.HIGH_QUALITY).tolist())
        hq_big = set(big.tagged(Provenance.HIGH_QUALITY).tolist())
        assert hq_big <= hq_small

    def test_benchmark_certified_accuracy_beats_pseudo(self, benchmark, prepare):
        prep = prepare(0)
        gt = benchmark.ground_truth
        hq = prep.table.tagged(Provenance.HIGH_QUALITY)
        pseudo_all = prep.table.tagged(Provenance.PSEUDO, Provenance.HIGH_QUALITY)
        assert hq.size > 0
        assert accuracy(prep.table.labels, gt, hq) >= accuracy(prep.table.labels, gt, pseudo_all)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EnsembleConfig(tuple(), seed=0)
        with pytest.raises(ValueError):
            EnsembleConfig((0.3, 0.3), seed=0)
        with pytest.raises(ValueError):
            EnsembleConfig((1.0,), seed=0)
        with pytest.raises(ValueError):
            EnsembleConfig(tuple(0.01 * i for i in range(17)), seed=0)


class TestCorruptPseudoLabels:
    def test_only_pseudo_nodes_touched_and_rate_respected(self):
        rng = np.random.default_rng(4)
        n = 2000
        labels = rng.integers(0, 4, n)
        prov = np.full(n, Provenance.PSEUDO, dtype=np.int8)
        prov[:100] = Provenance.GOLD
        table = NodeTable(features=np.zeros((n, 2)), labels=labels,
                          provenance=prov, num_classes=4)
        out = corrupt_pseudo_labels(table, rate=0.2, seed=0)
        assert np.array_equal(out.labels[:100], labels[:100])
        flipped = np.mean(out.labels[100:] != labels[100:])
        assert abs(flipped - 0.2) < 0.03
        assert np.all(out.labels < 4) and np.all(out.labels >= 0)
