"""Python access to the visual-semantic embedding core: TensorFiles, manifests,
training, evaluation."""

from ._vse import (
    VseError,
    decode_tensor,
    encode_tensor,
    evaluate,
    gradcheck,
    load_manifest,
    manifest_line,
    read_tensor,
    recall_at_k,
    synth,
    train,
    write_tensor,
)

__all__ = [
    "VseError",
    "decode_tensor",
    "encode_tensor",
    "evaluate",
    "gradcheck",
    "load_manifest",
    "manifest_line",
    "read_tensor",
    "recall_at_k",
    "synth",
    "train",
    "write_tensor",
]
