"""Named-tensor binary container and the pre-trained weight import path.

Wire format (all integers little-endian, no padding):

    magic   8 bytes  ASCII "TDLAB001"
    count   uint32   number of tensors
    per tensor:
        name_len  uint16   UTF-8 byte length of the name
        name      bytes    UTF-8, unique within the file
        elem      uint8    element width in bytes: 4 (float32) or 8 (float64)
        rank      uint8
        dims      rank x uint32
        payload   elem * prod(dims) bytes, row-major little-endian reals

32-bit payloads are widened to 64-bit at import time; the dynamics are
always run in float64.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingParams
from .encoder import EncoderConfig, EncoderParams

MAGIC = b"TDLAB001"

_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


class ContainerFormatError(ValueError):
    """Corrupt or non-container file."""


class ManifestError(ValueError):
    """A required tensor name is absent."""


class ShapeError(ValueError):
    def __init__(self, name, expected, actual):
        super().__init__(f"tensor {name!r}: expected shape {tuple(expected)}, got {tuple(actual)}")
        self.name, self.expected, self.actual = name, tuple(expected), tuple(actual)


def write_container(path, tensors: dict) -> None:
    """Write name -> float32/float64 array pairs in insertion order."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            if arr.dtype == np.float32:
                elem = 4
            elif arr.dtype == np.float64:
                elem = 8
            else:
                raise ValueError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BB", elem, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=_DTYPES[elem]).tobytes())


def read_container(path) -> dict:
    """Parse a container file into name -> array (native element width)."""
    with open(path, "rb") as fh:
        data = fh.read()

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise ContainerFormatError(f"truncated file while reading {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    pos = 0
    if take(8, "magic") != MAGIC:
        raise ContainerFormatError(f"bad magic; expected {MAGIC.decode()}")
    (count,) = struct.unpack("<I", take(4, "tensor count"))
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        if name in tensors:
            raise ContainerFormatError(f"duplicate tensor name {name!r}")
        elem, rank = struct.unpack("<BB", take(2, "element/rank"))
        if elem not in _DTYPES:
            raise ContainerFormatError(f"tensor {name!r}: bad element width {elem}")
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        n_bytes = elem * int(np.prod(dims, dtype=np.int64)) if rank else elem
        payload = take(n_bytes, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype=_DTYPES[elem]).reshape(dims).copy()
    if pos != len(data):
        raise ContainerFormatError(f"{len(data) - pos} trailing bytes after last tensor")
    return tensors


# Required manifest, shapes in terms of (H, I, V, E, P) inferred from the file.
ENCODER_MANIFEST = {
    "attention.query.weight": ("H", "H"), "attention.query.bias": ("H",),
    "attention.key.weight": ("H", "H"), "attention.key.bias": ("H",),
    "attention.value.weight": ("H", "H"), "attention.value.bias": ("H",),
    "attention.output.weight": ("H", "H"), "attention.output.bias": ("H",),
    "layernorm1.gain": ("H",), "layernorm1.bias": ("H",),
    "layernorm2.gain": ("H",), "layernorm2.bias": ("H",),
    "ffn.intermediate.weight": ("H", "I"), "ffn.intermediate.bias": ("I",),
    "ffn.output.weight": ("I", "H"), "ffn.output.bias": ("H",),
}
EMBEDDING_MANIFEST = {
    "embedding.token_table": ("V", "E"),
    "embedding.projection": ("E", "H"),
    "embedding.positional": ("P", "H"),
}
MANIFEST = {**ENCODER_MANIFEST, **EMBEDDING_MANIFEST}


def import_weights(path, head_dim: int = 64, layernorm_epsilon: float = 1e-12):
    """Load a container into (EncoderParams, EmbeddingParams), widened to float64.

    The hidden dimension must be a multiple of head_dim (one head per
    head_dim columns, the standard geometry).
    """
    tensors = read_container(path)
    for name in MANIFEST:
        if name not in tensors:
            raise ManifestError(f"required tensor {name!r} missing from container")

    dims = {
        "H": tensors["attention.query.weight"].shape[0],
        "I": tensors["ffn.intermediate.bias"].shape[0],
        "V": tensors["embedding.token_table"].shape[0],
        "E": tensors["embedding.token_table"].shape[1],
        "P": tensors["embedding.positional"].shape[0],
    }
    for name, symbolic in MANIFEST.items():
        expected = tuple(dims[s] for s in symbolic)
        if tensors[name].shape != expected:
            raise ShapeError(name, expected, tensors[name].shape)

    h = int(dims["H"])
    if h % head_dim:
        raise ShapeError("attention.query.weight", (f"multiple of head_dim={head_dim}",), (h,))
    config = EncoderConfig(hidden_dim=h, num_heads=h // head_dim, head_dim=head_dim,
                           intermediate_dim=int(dims["I"]),
                           map_variant="standard_albert",
                           layernorm_epsilon=layernorm_epsilon)
    t = {name: arr.astype(np.float64) for name, arr in tensors.items()}
    encoder = EncoderParams(
        config=config,
        w_query=t["attention.query.weight"], b_query=t["attention.query.bias"],
        w_key=t["attention.key.weight"], b_key=t["attention.key.bias"],
        w_value=t["attention.value.weight"], b_value=t["attention.value.bias"],
        w_output=t["attention.output.weight"], b_output=t["attention.output.bias"],
        ln1_gain=t["layernorm1.gain"], ln1_bias=t["layernorm1.bias"],
        ln2_gain=t["layernorm2.gain"], ln2_bias=t["layernorm2.bias"],
        w_ff1=t["ffn.intermediate.weight"], b_ff1=t["ffn.intermediate.bias"],
        w_ff2=t["ffn.output.weight"], b_ff2=t["ffn.output.bias"],
    )
    embedding = EmbeddingParams(
        token_table=t["embedding.token_table"],
        projection=t["embedding.projection"],
        positional=t["embedding.positional"],
        use_positional=True,
    )
    return encoder, embedding


def export_params(path, encoder: EncoderParams, embedding: EmbeddingParams) -> None:
    """Inverse of import_weights (float64 payloads, bit-exact round trip)."""
    if encoder.config.map_variant != "standard_albert":
        raise ValueError("only standard_albert parameter sets are containerized")
    tensors = {
        "attention.query.weight": encoder.w_query, "attention.query.bias": encoder.b_query,
        "attention.key.weight": encoder.w_key, "attention.key.bias": encoder.b_key,
        "attention.value.weight": encoder.w_value, "attention.value.bias": encoder.b_value,
        "attention.output.weight": encoder.w_output, "attention.output.bias": encoder.b_output,
        "layernorm1.gain": encoder.ln1_gain, "layernorm1.bias": encoder.ln1_bias,
        "layernorm2.gain": encoder.ln2_gain, "layernorm2.bias": encoder.ln2_bias,
        "ffn.intermediate.weight": encoder.w_ff1, "ffn.intermediate.bias": encoder.b_ff1,
        "ffn.output.weight": encoder.w_ff2, "ffn.output.bias": encoder.b_ff2,
        "embedding.token_table": embedding.token_table,
        "embedding.projection": embedding.projection,
        "embedding.positional": embedding.positional,
    }
    write_container(path, tensors)
