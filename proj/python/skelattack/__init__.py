"""No-box adversarial attacks on skeletal motion sequences."""

from ._core import (
    Encoder,
    ManifoldIndex,
    SkelattackError,
    Victim,
    adversarial_loss,
    attack,
    bones,
    build_manifold,
    fit_tvar,
    fooling_rate,
    generate_synthetic_dataset,
    info_nce_loss,
    kmeans,
    perceptual_deviation,
    read_dataset,
    run_cli,
    second_difference,
    smi_first_order,
    smi_second_order,
    strategies,
    train_encoder,
    train_victim,
    write_dataset,
)

__all__ = [
    "Encoder",
    "ManifoldIndex",
    "SkelattackError",
    "Victim",
    "adversarial_loss",
    "attack",
    "bones",
    "build_manifold",
    "fit_tvar",
    "fooling_rate",
    "generate_synthetic_dataset",
    "info_nce_loss",
    "kmeans",
    "perceptual_deviation",
    "read_dataset",
    "run_cli",
    "second_difference",
    "smi_first_order",
    "smi_second_order",
    "strategies",
    "train_encoder",
    "train_victim",
    "write_dataset",
]
