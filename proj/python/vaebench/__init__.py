"""Python access to the vaebench workbench."""

from ._vaebench import (
    ConfigError,
    ContractError,
    Dataset,
    FormatError,
    TrainingDiverged,
    apply_ctf,
    augment_probe,
    generate_dataset,
    kl_standard_normal,
    load_dataset,
    load_idx,
    make_phantom,
    project,
    rotate,
    run,
    save_dataset,
    selftest,
    train,
    translate,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "Dataset",
    "FormatError",
    "TrainingDiverged",
    "apply_ctf",
    "augment_probe",
    "generate_dataset",
    "kl_standard_normal",
    "load_dataset",
    "load_idx",
    "make_phantom",
    "project",
    "rotate",
    "run",
    "save_dataset",
    "selftest",
    "train",
    "translate",
]
