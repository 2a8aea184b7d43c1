"""Global self-attention kernels, cost model and verification tools."""

from ._core import (
    ArgumentError,
    FormatError,
    GsaConfig,
    ShapeError,
    SpecError,
    axial_content_attention,
    build_reindex_tensor,
    content_attention,
    count_flops,
    count_params,
    describe,
    einsum,
    gsa_backward,
    gsa_forward,
    init_params,
    load_gsat,
    model_spec,
    num_threads,
    oracle_content_attention,
    oracle_gsa_forward,
    oracle_positional_axis,
    positional_attention_axis,
    preset_names,
    run_verify_suite,
    save_gsat,
    set_num_threads,
    softmax,
    train_toy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
