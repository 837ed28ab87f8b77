"""Empirical Bayes PCA.

Thin Python layer over the C++ core. Matrices are numpy arrays with rows as
samples; results come back as plain dicts.
"""

from ._core import (
    EbpcaError,
    __version__,
    accuracy,
    bulk_edges,
    critical_signal,
    denoise,
    diagnose,
    ebpca,
    estimate_signal,
    fit_npmle,
    generate,
    mean_field_vb,
    normalize,
    predict_observables,
    se_fixed_point,
    spike_singular_limit,
)

__all__ = [
    "EbpcaError",
    "__version__",
    "accuracy",
    "bulk_edges",
    "critical_signal",
    "denoise",
    "diagnose",
    "ebpca",
    "estimate_signal",
    "fit_npmle",
    "generate",
    "mean_field_vb",
    "normalize",
    "predict_observables",
    "se_fixed_point",
    "spike_singular_limit",
]
