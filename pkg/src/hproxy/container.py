"""Versioned binary container: magic, version, length-prefixed payload, sha256 checksum."""

import hashlib
import struct
from pathlib import Path


class ContainerError(ValueError):
    pass


class VersionError(ContainerError):
    pass


class ChecksumError(ContainerError):
    pass


def write_container(path, magic: bytes, version: int, payload: bytes) -> None:
    assert len(magic) == 4
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<IQ", version, len(payload)))
        fh.write(payload)
        fh.write(digest)


def read_container(path, magic: bytes, max_version: int) -> tuple[int, bytes]:
    data = Path(path).read_bytes()
    if len(data) < 4 + 12 + 32 or data[:4] != magic:
        raise ContainerError(f"{path}: not a {magic.decode('ascii', 'replace')} container")
    version, length = struct.unpack_from("<IQ", data, 4)
    if version < 1 or version > max_version:
        raise VersionError(f"{path}: unsupported container version {version}")
    payload = data[16 : 16 + length]
    digest = data[16 + length : 16 + length + 32]
    if len(payload) != length or len(digest) != 32:
        raise ChecksumError(f"{path}: truncated file")
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    return version, payload


class PayloadWriter:
    """Sequential little-endian scalar/array packing."""

    def __init__(self):
        self._parts: list[bytes] = []

    def scalar(self, fmt: str, value) -> "PayloadWriter":
        self._parts.append(struct.pack("<" + fmt, value))
        return self

    def array(self, arr, dtype) -> "PayloadWriter":
        import numpy as np

        self._parts.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())
        return self

    def bytes(self) -> bytes:
        return b"".join(self._parts)


class PayloadReader:
    """Sequential little-endian scalar/array unpacking with bounds checks."""

    def __init__(self, payload: bytes):
        self._buf = payload
        self._pos = 0

    def scalar(self, fmt: str):
        size = struct.calcsize("<" + fmt)
        if self._pos + size > len(self._buf):
            raise ChecksumError("payload underrun")
        (value,) = struct.unpack_from("<" + fmt, self._buf, self._pos)
        self._pos += size
        return value

    def array(self, count: int, dtype):
        import numpy as np

        dt = np.dtype(dtype)
        size = dt.itemsize * count
        if self._pos + size > len(self._buf):
            raise ChecksumError("payload underrun")
        arr = np.frombuffer(self._buf, dtype=dt, count=count, offset=self._pos).copy()
        self._pos += size
        return arr

    def done(self) -> bool:
        return self._pos == len(self._buf)
