from anisolab.services.aniso import aniso_norm, leafwise_besov_norm
from anisolab.services.experiments import (
    classify_boundedness,
    run_kernel_decay,
    run_lemma_suite,
    run_multiplier_scan,
    run_strichartz_scan,
)

__all__ = [
    "aniso_norm", "leafwise_besov_norm",
    "classify_boundedness", "run_kernel_decay", "run_lemma_suite", "run_multiplier_scan", "run_strichartz_scan",
]
