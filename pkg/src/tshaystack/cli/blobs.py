"""Binary series files: a 19-byte little-endian header followed by channel-major float32 samples."""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TSHS"
VERSION = 1
HEADER = struct.Struct("<4sHBfQ")  # magic, version, channels, rate, length


class BlobError(ValueError):
    pass


def encode_blob(series: np.ndarray, rate: float) -> bytes:
    data = np.ascontiguousarray(series, dtype="<f4")
    if data.ndim != 2:
        raise BlobError(f"series must be (channels, length), got shape {data.shape}")
    channels, length = data.shape
    if not 0 < channels < 256:
        raise BlobError(f"channel count {channels} does not fit one byte")
    return HEADER.pack(MAGIC, VERSION, channels, float(rate), length) + data.tobytes()


def decode_blob(raw: bytes) -> tuple[np.ndarray, float]:
    if len(raw) < HEADER.size:
        raise BlobError("blob shorter than its header")
    magic, version, channels, rate, length = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BlobError(f"bad magic {magic!r}")
    if version != VERSION:
        raise BlobError(f"unsupported blob version {version}")
    expected = HEADER.size + 4 * channels * length
    if len(raw) != expected:
        raise BlobError(f"blob is {len(raw)} bytes, header implies {expected}")
    series = np.frombuffer(raw, dtype="<f4", offset=HEADER.size).reshape(channels, length)
    return series, float(rate)


def write_blob(path: str | Path, series: np.ndarray, rate: float) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_bytes(encode_blob(series, rate))
    os.replace(tmp, path)


def read_blob(path: str | Path) -> tuple[np.ndarray, float]:
    return decode_blob(Path(path).read_bytes())
