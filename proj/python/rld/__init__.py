"""Re-label distillation: explain a classifier's prediction by sampling a
VAE neighborhood around the input, re-labeling it with the classifier, and
distilling the result into a two-class linear student whose weights form
the saliency map."""

from ._core import (
    Dataset,
    ExplainResult,
    FormatError,
    ParamError,
    Saliency,
    ShapeError,
    Teacher,
    TrainError,
    Vae,
    auc_trapezoid,
    deletion_curve,
    explain,
    insertion_curve,
    load_idx,
    occlusion_saliency,
    random_ordering,
    run_cli,
    synth_shapes,
    train_teacher,
    train_vae,
    write_idx,
    write_pgm,
)

__all__ = [
    "Dataset",
    "ExplainResult",
    "FormatError",
    "ParamError",
    "Saliency",
    "ShapeError",
    "Teacher",
    "TrainError",
    "Vae",
    "auc_trapezoid",
    "deletion_curve",
    "explain",
    "insertion_curve",
    "load_idx",
    "occlusion_saliency",
    "random_ordering",
    "run_cli",
    "synth_shapes",
    "train_teacher",
    "train_vae",
    "write_idx",
    "write_pgm",
]
