"""Checkpoint container: named float32 tensors in a bit-exact binary format.

Layout (version 1):

    magic "DSWM0001" (8 bytes)
  | header length (u64, little-endian)
  | UTF-8 JSON header {"tensors": {name: {"dtype": "f32", "shape": [...],
        "offset": u64, "nbytes": u64}}} with names lexicographically sorted
        and offsets contiguous from 0
  | payload: little-endian IEEE-754 binary32, tensor by tensor

In memory a TensorMap holds float64 arrays so that delta arithmetic composes
exactly; values are quantized to float32 only at the container boundary.
Saving a freshly loaded map reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"DSWM0001"


class ContainerError(ValueError):
    """Raised for malformed container files."""


def _reject_duplicates(pairs):
    obj: dict = {}
    for key, value in pairs:
        if key in obj:
            raise ContainerError(f"duplicate name {key!r} in header")
        obj[key] = value
    return obj


@dataclass(frozen=True)
class TensorMap:
    """Immutable map of tensor name → float64 ndarray.

    The container stores float32; arrays are promoted on load (exactly) and
    rounded on save. Keeping float64 in memory lets checkpoint deltas carry
    exact differences, so base + delta(ckpt, base) reconstructs ckpt to the
    bit once both sides round back to float32.
    """

    tensors: dict

    def __post_init__(self):
        clean: dict[str, np.ndarray] = {}
        for name in sorted(self.tensors):
            arr = np.asarray(self.tensors[name], dtype=np.float64)
            if arr.ndim == 0:
                arr = arr.reshape(1)
            if arr.size == 0 or any(d <= 0 for d in arr.shape):
                raise ValueError(f"tensor {name!r} has a non-positive dimension")
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            clean[name] = arr
        object.__setattr__(self, "tensors", clean)

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def names(self) -> list[str]:
        return list(self.tensors)

    def astype_f32(self) -> dict:
        """Tensor values as float32, i.e. what the container would store."""
        return {k: v.astype(np.float32) for k, v in self.tensors.items()}

    def allclose(self, other: "TensorMap", rtol=1e-7, atol=0.0) -> bool:
        if self.names() != other.names():
            return False
        return all(
            np.allclose(self[k], other[k], rtol=rtol, atol=atol) for k in self
        )

    def bitwise_equal_f32(self, other: "TensorMap") -> bool:
        """True when both maps quantize to identical float32 bit patterns."""
        if self.names() != other.names():
            return False
        for k in self:
            a = self[k].astype(np.float32)
            b = other[k].astype(np.float32)
            if a.shape != b.shape or not np.array_equal(
                a.view(np.uint32), b.view(np.uint32)
            ):
                return False
        return True


def save_checkpoint(tensor_map: TensorMap, path) -> None:
    """Write a TensorMap to the version-1 container format."""
    entries: dict[str, dict] = {}
    payload = bytearray()
    for name in tensor_map.names():  # already lexicographically sorted
        arr32 = tensor_map[name].astype("<f4")
        raw = arr32.tobytes(order="C")
        entries[name] = {
            "dtype": "f32",
            "shape": list(arr32.shape),
            "offset": len(payload),
            "nbytes": len(raw),
        }
        payload.extend(raw)
    header = json.dumps(
        {"tensors": entries}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)


def load_checkpoint(path) -> TensorMap:
    """Read a version-1 container file into a TensorMap."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ContainerError(f"bad magic {blob[:8]!r}")
    if len(blob) < 16:
        raise ContainerError("truncated header length")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    header_end = 16 + header_len
    if len(blob) < header_end:
        raise ContainerError("truncated header")
    try:
        header = json.loads(
            blob[16:header_end].decode("utf-8"), object_pairs_hook=_reject_duplicates
        )
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"bad header JSON: {exc}") from exc
    entries = header.get("tensors")
    if not isinstance(entries, dict):
        raise ContainerError("header missing 'tensors' table")
    payload = blob[header_end:]
    tensors: dict[str, np.ndarray] = {}
    expect_offset = 0
    for name in sorted(entries):
        meta = entries[name]
        if meta.get("dtype") != "f32":
            raise ContainerError(f"tensor {name!r}: unsupported dtype {meta.get('dtype')!r}")
        shape = tuple(meta["shape"])
        offset, nbytes = meta["offset"], meta["nbytes"]
        if offset != expect_offset:
            raise ContainerError(f"tensor {name!r}: offsets not contiguous")
        count = int(np.prod(shape)) if shape else 1
        if nbytes != 4 * count:
            raise ContainerError(
                f"tensor {name!r}: shape/length mismatch ({nbytes} bytes for shape {shape})"
            )
        if offset + nbytes > len(payload):
            raise ContainerError(f"tensor {name!r}: payload length")
        raw = payload[offset : offset + nbytes]
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
        tensors[name] = arr.astype(np.float64)
        expect_offset += nbytes
    if expect_offset != len(payload):
        raise ContainerError("payload length disagrees with header")
    return TensorMap(tensors)
