import numpy as np
import pytest

from intramix.augment import (
    AugmentationConfig,
    LambdaLaw,
    apply_strategy,
    augmented_train_mask,
    generated_label_audit,
    mixup_generate,
    vanilla_mixup_generate,
    wire_neighbors,
    wiring_class_audit,
)
from intramix.data import NodeTable, Provenance, SplitMasks
from intramix.graph import build_graph, edge_pairs
from intramix.pseudolabel import corrupt_pseudo_labels
from intramix.rng import stream

# p = 0.01 critical values of the chi-square distribution
CHI2_CRIT = {9: 21.666}


def labeled_table(features, labels, provenance, num_classes):
    return NodeTable(features=np.asarray(features, dtype=np.float64),
                     labels=np.asarray(labels, dtype=np.int64),
                     provenance=np.asarray(provenance, dtype=np.int8),
                     num_classes=num_classes)


def two_class_table(per_class=6, hq_per_class=2, feature_dim=3, seed=0):
    """Pseudo-labeled table with a configurable certified pool per class."""
    rng = np.random.default_rng(seed)
    n = per_class * 2
    labels = np.repeat([0, 1], per_class)
    prov = np.full(n, Provenance.PSEUDO, dtype=np.int8)
    for cls in range(2):
        idx = np.flatnonzero(labels == cls)[:hq_per_class]
        prov[idx] = Provenance.HIGH_QUALITY
    return labeled_table(rng.standard_normal((n, feature_dim)), labels, prov, 2)


class TestMixupGenerate:
    def test_fixed_half_midpoint(self):
        table = labeled_table([[1.0, 0.0], [0.0, 1.0]], [0, 0],
                              [Provenance.PSEUDO] * 2, 1)
        cfg = AugmentationConfig(nodes_per_class=4, lambda_law=LambdaLaw.from_fixed(0.5))
        batch = mixup_generate(table, cfg)
        np.testing.assert_array_equal(batch.new_features,
                                      np.tile([0.5, 0.5], (4, 1)))
        assert np.all(batch.new_labels == 0)

    def test_fixed_one_copies_first_parent(self):
        rng = np.random.default_rng(1)
        table = labeled_table(rng.standard_normal((5, 4)), [0] * 5,
                              [Provenance.PSEUDO] * 5, 1)
        cfg = AugmentationConfig(nodes_per_class=8, lambda_law=LambdaLaw.from_fixed(1.0))
        batch = mixup_generate(table, cfg)
        np.testing.assert_array_equal(batch.new_features,
                                      table.features[batch.parent_pairs[:, 0]])

    def test_beta_22_sample_mean(self):
        rng = stream(0, "beta-check")
        draws = LambdaLaw.from_beta(2.0, 2.0).sample(rng, 10_000)
        assert 0.49 <= draws.mean() <= 0.51

    def test_label_purity_and_convexity(self):
        table = two_class_table(per_class=20, seed=2)
        cfg = AugmentationConfig(nodes_per_class=50, seed=3)
        batch = mixup_generate(table, cfg)
        p1 = table.features[batch.parent_pairs[:, 0]]
        p2 = table.features[batch.parent_pairs[:, 1]]
        assert np.all(table.labels[batch.parent_pairs[:, 0]] == batch.new_labels)
        assert np.all(table.labels[batch.parent_pairs[:, 1]] == batch.new_labels)
        lo, hi = np.minimum(p1, p2), np.maximum(p1, p2)
        eps = 1e-12
        assert np.all(batch.new_features >= lo - eps)
        assert np.all(batch.new_features <= hi + eps)

    def test_parents_are_distinct(self):
        table = two_class_table(per_class=4, seed=4)
        batch = mixup_generate(table, AugmentationConfig(nodes_per_class=30, seed=5))
        assert np.all(batch.parent_pairs[:, 0] != batch.parent_pairs[:, 1])

    def test_thin_class_skipped_with_warning(self, caplog):
        table = labeled_table([[0.0], [1.0], [2.0]], [0, 0, 1],
                              [Provenance.PSEUDO] * 3, 2)
        with caplog.at_level("WARNING"):
            batch = mixup_generate(table, AugmentationConfig(nodes_per_class=3))
        assert batch.skipped_classes == [1]
        assert np.all(batch.new_labels == 0)
        assert "class 1" in caplog.text

    def test_no_eligible_class_rejected(self):
        table = labeled_table([[0.0], [1.0]], [0, 1], [Provenance.PSEUDO] * 2, 2)
        with pytest.raises(ValueError):
            mixup_generate(table, AugmentationConfig(nodes_per_class=2))

    def test_deterministic_given_seed(self):
        table = two_class_table(per_class=10, seed=6)
        cfg = AugmentationConfig(nodes_per_class=20, seed=7)
        a = mixup_generate(table, cfg)
        b = mixup_generate(table, cfg)
        assert np.array_equal(a.new_features, b.new_features)
        assert np.array_equal(a.parent_pairs, b.parent_pairs)


class TestWireNeighbors:
    def test_two_anchor_class_forced_choice(self):
        table = two_class_table(per_class=6, hq_per_class=2)
        g = build_graph(table.num_nodes, [])
        cfg = AugmentationConfig(nodes_per_class=5, seed=0)
        batch = mixup_generate(table, cfg)
        wired = wire_neighbors(batch, table, g, cfg)
        for i in range(batch.size):
            cls = batch.new_labels[i]
            expected = set(np.flatnonzero(
                (table.labels == cls) & (table.provenance == Provenance.HIGH_QUALITY)
            ).tolist())
            assert set(batch.anchor_pairs[i].tolist()) == expected
        assert wired.edge_count == 2 * batch.size

    def test_single_anchor_class_gets_one_edge(self):
        table = two_class_table(per_class=6, hq_per_class=1)
        g = build_graph(table.num_nodes, [])
        cfg = AugmentationConfig(nodes_per_class=4, seed=1)
        batch = mixup_generate(table, cfg)
        wired = wire_neighbors(batch, table, g, cfg)
        assert np.all(batch.anchor_pairs[:, 0] >= 0)
        assert np.all(batch.anchor_pairs[:, 1] == -1)
        assert wired.edge_count == batch.size

    def test_zero_anchor_class_skipped_and_reported(self, caplog):
        table = two_class_table(per_class=6, hq_per_class=0)
        g = build_graph(table.num_nodes, [])
        cfg = AugmentationConfig(nodes_per_class=4, seed=2)
        batch = mixup_generate(table, cfg)
        with caplog.at_level("WARNING"):
            wired = wire_neighbors(batch, table, g, cfg)
        assert wired.edge_count == 0
        assert wired.num_nodes == table.num_nodes + batch.size
        assert "no anchor candidates" in caplog.text

    def test_anchor_usage_uniform_chi_square(self):
        # one class, 10 certified anchors, many generated nodes
        n = 40
        labels = np.zeros(n, dtype=np.int64)
        prov = np.full(n, Provenance.PSEUDO, dtype=np.int8)
        prov[:10] = Provenance.HIGH_QUALITY
        table = labeled_table(np.random.default_rng(0).standard_normal((n, 2)),
                              labels, prov, 1)
        g = build_graph(n, [])
        cfg = AugmentationConfig(nodes_per_class=100, seed=3)
        batch = mixup_generate(table, cfg)
        wire_neighbors(batch, table, g, cfg)
        counts = np.bincount(batch.anchor_pairs.ravel(), minlength=10)[:10]
        expected = counts.sum() / 10
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2 < CHI2_CRIT[9]  # p > 0.01

    def test_original_graph_untouched(self):
        table = two_class_table()
        g = build_graph(table.num_nodes, [(0, 1)])
        cfg = AugmentationConfig(nodes_per_class=3, seed=4)
        batch = mixup_generate(table, cfg)
        wire_neighbors(batch, table, g, cfg)
        assert g.num_nodes == table.num_nodes
        assert g.edge_count == 1


def pipeline_table(seed=0, per_class=25, num_classes=3, feature_dim=4):
    """A table that looks like post-certification pipeline state."""
    rng = np.random.default_rng(seed)
    n = per_class * num_classes
    labels = np.repeat(np.arange(num_classes), per_class)
    prov = np.full(n, Provenance.PSEUDO, dtype=np.int8)
    for cls in range(num_classes):
        idx = np.flatnonzero(labels == cls)
        prov[idx[:3]] = Provenance.GOLD
        prov[idx[3:8]] = Provenance.HIGH_QUALITY
    feats = rng.standard_normal((n, feature_dim)) + 2.0 * labels[:, None]
    table = labeled_table(feats, labels, prov, num_classes)
    g = build_graph(n, [(i, i + 1) for i in range(n - 1)])
    split = SplitMasks(train=np.arange(0, n, 5), validation=np.arange(1, n, 5),
                       test=np.arange(2, n, 5))
    return g, table, split


class TestApplyStrategy:
    def test_pl_only_leaves_graph_and_grows_mask(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="pl_only", nodes_per_class=10)
        result = apply_strategy(g, table, split, None, cfg)
        assert result.graph is g
        assert result.table is table
        mask = augmented_train_mask(result.table, split, "pl_only")
        d_p = table.tagged(Provenance.PSEUDO, Provenance.HIGH_QUALITY)
        assert mask.size == np.union1d(split.train, d_p).size

    def test_without_con_adds_nodes_not_edges(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="without_con", nodes_per_class=10)
        result = apply_strategy(g, table, split, None, cfg)
        assert result.graph.edge_count == g.edge_count
        assert result.graph.num_nodes == g.num_nodes + 30
        assert result.table.num_nodes == table.num_nodes + 30

    def test_zeros_and_ones_replace_features_but_wire_identically(self):
        g, table, split = pipeline_table()
        base = apply_strategy(g, table, split, None,
                              AugmentationConfig(strategy="intramix", nodes_per_class=10, seed=5))
        zeros = apply_strategy(g, table, split, None,
                               AugmentationConfig(strategy="zeros", nodes_per_class=10, seed=5))
        ones = apply_strategy(g, table, split, None,
                              AugmentationConfig(strategy="ones", nodes_per_class=10, seed=5))
        n = table.num_nodes
        assert np.all(zeros.table.features[n:] == 0.0)
        assert np.all(ones.table.features[n:] == 1.0)
        assert np.array_equal(zeros.batch.anchor_pairs, base.batch.anchor_pairs)
        assert np.array_equal(ones.batch.anchor_pairs, base.batch.anchor_pairs)
        assert zeros.graph.edge_count == base.graph.edge_count

    def test_direct_con_wires_to_parents(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="direct_con", nodes_per_class=6, seed=6)
        result = apply_strategy(g, table, split, None, cfg)
        assert np.array_equal(result.batch.anchor_pairs, result.batch.parent_pairs)
        new_edges = {tuple(e) for e in edge_pairs(result.graph)} - {tuple(e) for e in edge_pairs(g)}
        for u, v in new_edges:
            assert max(u, v) >= table.num_nodes  # one endpoint is generated

    def test_random_con_uses_original_nodes_of_any_class(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="random_con", nodes_per_class=20, seed=7)
        result = apply_strategy(g, table, split, None, cfg)
        anchors = result.batch.anchor_pairs
        assert np.all(anchors >= 0) and np.all(anchors < table.num_nodes)
        assert np.all(anchors[:, 0] != anchors[:, 1])
        anchor_labels = table.labels[anchors.ravel()]
        gen_labels = np.repeat(result.batch.new_labels, 2)
        assert np.any(anchor_labels != gen_labels)  # wiring ignores class

    def test_vanilla_mixup_soft_labels(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="mixup_w_con", nodes_per_class=10, seed=8)
        result = apply_strategy(g, table, split, None, cfg)
        batch = result.batch
        assert batch.soft_labels is not None
        np.testing.assert_allclose(batch.soft_labels.sum(axis=1), 1.0, atol=1e-12)
        assert np.array_equal(np.argmax(batch.soft_labels, axis=1), batch.new_labels)
        n = table.num_nodes
        assert result.soft_targets is not None
        assert np.all(np.isnan(result.soft_targets[:n]))
        np.testing.assert_array_equal(result.soft_targets[n:], batch.soft_labels)
        # wired to parents
        assert np.array_equal(batch.anchor_pairs, batch.parent_pairs)

    def test_mixup_no_con_isolated(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="mixup_no_con", nodes_per_class=10, seed=9)
        result = apply_strategy(g, table, split, None, cfg)
        assert result.graph.edge_count == g.edge_count

    def test_mixup_sim_con_tops_cosine(self):
        # one-hot corpus: nearest rows by cosine are unambiguous
        g, table, split = pipeline_table(feature_dim=6)
        cfg = AugmentationConfig(strategy="mixup_sim_con", nodes_per_class=5, seed=10)
        result = apply_strategy(g, table, split, None, cfg)
        batch = result.batch
        sims = (batch.new_features @ table.features.T) / np.outer(
            np.linalg.norm(batch.new_features, axis=1),
            np.linalg.norm(table.features, axis=1))
        for i in range(batch.size):
            top2 = set(np.argsort(-sims[i])[:2].tolist())
            assert set(batch.anchor_pairs[i].tolist()) == top2

    def test_edge_accounting_two_per_generated(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="intramix", nodes_per_class=10, seed=11)
        result = apply_strategy(g, table, split, None, cfg)
        audit = result.report["edge_audit"]
        assert audit["new_edges"] == 2 * result.batch.size - audit["nodes_with_one_anchor"] \
            - 2 * audit["nodes_unwired"]
        assert result.graph.edge_count == g.edge_count + audit["new_edges"]

    def test_validation_and_test_isolation(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="intramix", nodes_per_class=10, seed=12)
        result = apply_strategy(g, table, split, None, cfg)
        mask = augmented_train_mask(result.table, split, "intramix")
        assert np.all(split.validation < table.num_nodes)
        assert np.all(split.test < table.num_nodes)
        assert np.intersect1d(mask, split.validation).size == 0
        assert np.intersect1d(mask, split.test).size == 0


class TestAugmentedTrainMask:
    def test_no_generation_equals_train(self):
        g, table, split = pipeline_table()
        assert np.array_equal(augmented_train_mask(table, split), split.train)

    def test_generated_nodes_join(self):
        g, table, split = pipeline_table()
        cfg = AugmentationConfig(strategy="intramix", nodes_per_class=7, seed=13)
        result = apply_strategy(g, table, split, None, cfg)
        mask = augmented_train_mask(result.table, split, "intramix")
        assert mask.size == split.train.size + result.batch.size


class TestNoiseReductionProperty:
    def test_generated_labels_beat_sources_under_flip_noise(self):
        # ground truth known; corrupt the pseudo pool at 20% and audit
        wins = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            num_classes, per_class = 4, 100
            n = num_classes * per_class
            gt = np.repeat(np.arange(num_classes), per_class)
            table = labeled_table(rng.standard_normal((n, 3)), gt.copy(),
                                  np.full(n, Provenance.PSEUDO, dtype=np.int8),
                                  num_classes)
            noisy = corrupt_pseudo_labels(table, rate=0.2, seed=seed)
            batch = mixup_generate(noisy, AugmentationConfig(nodes_per_class=200, seed=seed))
            audit = generated_label_audit(batch, gt)
            if audit["generated_label_error"] <= audit["source_label_error"]:
                wins += 1
        assert wins >= 9


class TestWiringClassAudit:
    def test_perfect_anchors_give_fraction_one(self):
        table = two_class_table(per_class=10, hq_per_class=3, seed=14)
        g = build_graph(table.num_nodes, [])
        cfg = AugmentationConfig(nodes_per_class=20, seed=15)
        batch = mixup_generate(table, cfg)
        wire_neighbors(batch, table, g, cfg)
        audit = wiring_class_audit(batch, table.labels)  # labels are the truth here
        assert audit["same_class_fraction"] == 1.0
