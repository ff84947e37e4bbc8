"""Training substrate: parameter vectors, quantization, models, data."""

from byzlab.model.vectors import p_norm, clip_to_norm
from byzlab.model.quantize import (
    QuantSpec,
    FixedVec,
    quantize,
    dequantize,
    signed_to_float,
    bits_for_bound,
    window_bound,
    clamp_to_window,
    to_committed,
    from_committed_sum,
)
from byzlab.model.nets import (
    ModelSpec,
    init_params,
    predict,
    predict_logits,
    loss,
    grad,
    local_train,
    evaluate,
    backdoor_eval,
)
from byzlab.model.data import (
    Dataset,
    gen_synthetic,
    split,
    shard,
    save_dataset,
    load_dataset,
    load_digits_dataset,
)

__all__ = [
    "p_norm",
    "clip_to_norm",
    "QuantSpec",
    "FixedVec",
    "quantize",
    "dequantize",
    "signed_to_float",
    "bits_for_bound",
    "window_bound",
    "clamp_to_window",
    "to_committed",
    "from_committed_sum",
    "ModelSpec",
    "init_params",
    "predict",
    "predict_logits",
    "loss",
    "grad",
    "local_train",
    "evaluate",
    "backdoor_eval",
    "Dataset",
    "gen_synthetic",
    "split",
    "shard",
    "save_dataset",
    "load_dataset",
    "load_digits_dataset",
]
