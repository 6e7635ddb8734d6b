"""Python bindings for the numeric core.

The heavy lifting (frequency features, the single-center loss, ranking
metrics, the synthetic corpus generator) lives in the compiled `_core`
module; this package re-exports it under a stable name. Installed wheels
carry `_core` inside the package; in-tree test runs pick it up from the
build directory via PYTHONPATH.
"""

try:
    from ._core import (
        ChannelStats,
        block_dct2d,
        compute_stats,
        normalize,
        pauc,
        preprocess_image,
        rgb_to_ycbcr,
        roc_auc,
        scl_backward,
        scl_forward,
        synth_generate,
    )
except ImportError:
    from _core import (
        ChannelStats,
        block_dct2d,
        compute_stats,
        normalize,
        pauc,
        preprocess_image,
        rgb_to_ycbcr,
        roc_auc,
        scl_backward,
        scl_forward,
        synth_generate,
    )

__all__ = [
    "ChannelStats",
    "block_dct2d",
    "compute_stats",
    "normalize",
    "pauc",
    "preprocess_image",
    "rgb_to_ycbcr",
    "roc_auc",
    "scl_backward",
    "scl_forward",
    "synth_generate",
]
