"""Binary checkpoint for a MappingSet.

Layout (all integers little-endian)::

    magic      8 bytes  b"MWALIGN\\0"
    version    uint32
    dim        uint32
    n_langs    uint32
    target     uint32
    n_langs x (uint16 length, utf-8 language code)
    n_langs x (dim*dim float32, row-major)
"""
import struct

import numpy as np

from .errors import IoError, ParseError
from .mat import MappingSet

MAGIC = b"MWALIGN\0"
VERSION = 1
_HEADER = struct.Struct("<8sIIII")


def save_checkpoint(mappings, path):
    codes = [l.encode("utf-8") for l in mappings.langs]
    parts = [_HEADER.pack(MAGIC, VERSION, mappings.dim, len(codes), mappings.target)]
    for c in codes:
        if len(c) > 0xFFFF:
            raise IoError(f"language code too long: {c[:20]!r}...")
        parts.append(struct.pack("<H", len(c)) + c)
    for m in mappings.maps:
        parts.append(np.ascontiguousarray(m, dtype="<f4").tobytes())
    try:
        with open(path, "wb") as f:
            f.write(b"".join(parts))
    except OSError as e:
        raise IoError(f"cannot write checkpoint {path}: {e}") from e


def load_checkpoint(path):
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise IoError(f"cannot read checkpoint {path}: {e}") from e
    if len(data) < _HEADER.size:
        raise ParseError("truncated header", path)
    magic, version, dim, n, target = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ParseError("not a checkpoint file (bad magic)", path)
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", path)
    pos = _HEADER.size
    langs = []
    for _ in range(n):
        if pos + 2 > len(data):
            raise ParseError("truncated language table", path)
        (size,) = struct.unpack_from("<H", data, pos)
        pos += 2
        langs.append(data[pos:pos + size].decode("utf-8"))
        pos += size
    need = n * dim * dim * 4
    if len(data) - pos != need:
        raise ParseError(f"expected {need} bytes of matrices, found {len(data) - pos}", path)
    flat = np.frombuffer(data, dtype="<f4", offset=pos).astype(np.float64)
    maps = [flat[k * dim * dim:(k + 1) * dim * dim].reshape(dim, dim).copy() for k in range(n)]
    return MappingSet(langs, target, maps)
