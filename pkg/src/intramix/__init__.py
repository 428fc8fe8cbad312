"""Graph augmentation lab: intra-class mixup node synthesis, confidence
based neighbor wiring, a from-scratch GCN trainer, and Monte-Carlo
verification of the underlying noise-reduction claims."""

from .augment import (
    STRATEGIES,
    AugmentationConfig,
    AugmentationResult,
    GeneratedBatch,
    LambdaLaw,
    apply_strategy,
    augmented_train_mask,
    mixup_generate,
    vanilla_mixup_generate,
    wire_neighbors,
)
from .data import (
    NodeTable,
    Provenance,
    SbmConfig,
    SplitMasks,
    generate_sbm,
    load_container,
    make_split,
    mask_for_training,
    save_container,
)
from .gcn import (
    ForwardTrace,
    ModelParams,
    TrainConfig,
    forward,
    hidden_embeddings,
    load_params,
    loss_and_grad,
    predict,
    save_params,
    train,
)
from .graph import (
    Graph,
    NormalizedAdjacency,
    add_edges,
    build_graph,
    hop_distance_classes,
    normalized_adjacency,
)
from .metrics import MadGapConfig, accuracy, madgap
from .pseudolabel import EnsembleConfig, assign_pseudo_labels, select_high_quality
from .theory import (
    LinearGnnConfig,
    NoiseModel,
    bridge_ratio_candidates,
    bridge_ratio_mc,
    label_noise_exact,
    label_noise_mc,
)

__version__ = "0.1.0"
