"""Binary tensor fixture files.

Layout: the 8-byte magic ``EMIMTNSR``, a little-endian u32 rank, ``rank``
little-endian u64 extents, then the row-major float64 payload (little-endian).
"""

import struct
from pathlib import Path

import numpy as np

from core.errors import FixtureFormatError
from core.tensor.ops import Tensor, as_tensor

MAGIC = b"EMIMTNSR"


def encode_tensor(x: Tensor) -> bytes:
    x = as_tensor(x)
    if x.ndim == 0:
        x = x.reshape(1)
    header = MAGIC + struct.pack("<I", x.ndim) + struct.pack(f"<{x.ndim}Q", *x.shape)
    return header + np.ascontiguousarray(x, dtype="<f8").tobytes()


def decode_tensor(blob: bytes) -> Tensor:
    """Parse a fixture from raw bytes.

    Raises:
        FixtureFormatError: On a bad magic, truncated header or payload size mismatch.
    """
    if len(blob) < 12 or blob[:8] != MAGIC:
        raise FixtureFormatError("missing EMIMTNSR magic")
    (rank,) = struct.unpack_from("<I", blob, 8)
    offset = 12 + 8 * rank
    if len(blob) < offset:
        raise FixtureFormatError(f"truncated header for rank {rank}")
    shape = struct.unpack_from(f"<{rank}Q", blob, 12)
    if any(extent == 0 for extent in shape):
        raise FixtureFormatError(f"non-positive extent in {shape}")
    count = int(np.prod(shape)) if rank else 0
    payload = blob[offset:]
    if len(payload) != 8 * count:
        raise FixtureFormatError(f"payload holds {len(payload)} bytes, expected {8 * count} for shape {shape}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)


def write_tensor(path: Path, x: Tensor) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensor(x))


def read_tensor(path: Path) -> Tensor:
    return decode_tensor(Path(path).read_bytes())
