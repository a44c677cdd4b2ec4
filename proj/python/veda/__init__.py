"""Access-controlled vector search layouts (Python bindings)."""

from ._core import (
    AccessMatrix,
    Dataset,
    ExclusiveLattice,
    Layout,
    LayoutManifest,
    PolicySpec,
    Theta,
    brute_force_topk,
    c_theta,
    crossover_size,
    gen_dataset,
    gen_policy,
    global_manifest,
    load_fvecs,
    optimize,
    oracle_manifest,
    save_fvecs,
)

__all__ = [
    "AccessMatrix",
    "Dataset",
    "ExclusiveLattice",
    "Layout",
    "LayoutManifest",
    "PolicySpec",
    "Theta",
    "brute_force_topk",
    "c_theta",
    "crossover_size",
    "gen_dataset",
    "gen_policy",
    "global_manifest",
    "load_fvecs",
    "optimize",
    "oracle_manifest",
    "save_fvecs",
]
