"""Canonical length-prefixed encoding for values kept in the state store.

Each value is ``tag (1 byte) | length (uint32 big-endian) | payload``.
Containers nest encoded values; mapping entries are ordered by their encoded
key so equal mappings always produce equal bytes.
"""

import struct

_HEADER = struct.Struct(">cI")
_FLOAT = struct.Struct(">d")


class CodecError(ValueError):
    pass


def _frame(tag, payload):
    return _HEADER.pack(tag, len(payload)) + payload


def encode(value):
    if value is None:
        return _frame(b"N", b"")
    if value is True:
        return _frame(b"T", b"")
    if value is False:
        return _frame(b"F", b"")
    if isinstance(value, int):
        return _frame(b"I", str(value).encode("ascii"))
    if isinstance(value, float):
        return _frame(b"D", _FLOAT.pack(value))
    if isinstance(value, str):
        return _frame(b"S", value.encode("utf-8"))
    if isinstance(value, (bytes, bytearray)):
        return _frame(b"B", bytes(value))
    if isinstance(value, (list, tuple)):
        return _frame(b"L", b"".join(encode(v) for v in value))
    if isinstance(value, dict):
        items = sorted((encode(k), encode(v)) for k, v in value.items())
        return _frame(b"M", b"".join(k + v for k, v in items))
    raise CodecError("cannot encode %s" % type(value).__name__)


def _decode_at(buf, pos):
    if pos + _HEADER.size > len(buf):
        raise CodecError("truncated header at offset %d" % pos)
    tag, length = _HEADER.unpack_from(buf, pos)
    start = pos + _HEADER.size
    end = start + length
    if end > len(buf):
        raise CodecError("truncated payload at offset %d" % pos)
    payload = buf[start:end]
    if tag == b"N":
        return None, end
    if tag == b"T":
        return True, end
    if tag == b"F":
        return False, end
    if tag == b"I":
        return int(payload.decode("ascii")), end
    if tag == b"D":
        return _FLOAT.unpack(payload)[0], end
    if tag == b"S":
        return payload.decode("utf-8"), end
    if tag == b"B":
        return bytes(payload), end
    if tag in (b"L", b"M"):
        items = []
        i = start
        while i < end:
            v, i = _decode_at(buf, i)
            items.append(v)
        if i != end:
            raise CodecError("container overruns its frame")
        if tag == b"L":
            return items, end
        if len(items) % 2:
            raise CodecError("odd number of mapping entries")
        return dict(zip(items[::2], items[1::2])), end
    raise CodecError("unknown tag %r" % tag)


def decode(data):
    value, end = _decode_at(bytes(data), 0)
    if end != len(data):
        raise CodecError("trailing bytes after value")
    return value
