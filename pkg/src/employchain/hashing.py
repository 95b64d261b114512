"""Digest function, canonical byte encoding and addresses.

All digests in the package are SHA-256.  Values are hashed through
:func:`encode`, a length-prefixed concatenation of fields in declared order:

* every field is ``len(body).to_bytes(4, "big") + body``
* ``bytes`` and :class:`Address` contribute their raw bytes
* ``str`` contributes its UTF-8 encoding
* ``int`` contributes its ASCII decimal representation (``bool`` is refused)
* ``list``/``tuple`` contribute ``len(items).to_bytes(4, "big")`` followed by
  each item encoded as a field, the whole wrapped as one field
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Union

DIGEST_NAME = "sha256"
DIGEST_SIZE = 32
ADDRESS_SIZE = 20

Field = Union[bytes, str, int, "Address", list, tuple]


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _body(value) -> bytes:
    if isinstance(value, Address):
        return value.raw
    if isinstance(value, (bytes, bytearray)):
        return bytes(value)
    if isinstance(value, str):
        return value.encode("utf-8")
    if isinstance(value, bool):
        raise TypeError("booleans have no canonical encoding; use 0/1")
    if isinstance(value, int):
        return str(value).encode("ascii")
    if isinstance(value, (list, tuple)):
        return len(value).to_bytes(4, "big") + b"".join(_field(v) for v in value)
    raise TypeError(f"cannot encode {type(value).__name__}")


def _field(value) -> bytes:
    body = _body(value)
    return len(body).to_bytes(4, "big") + body


def encode(*fields: Field) -> bytes:
    """Canonical length-prefixed encoding of ``fields``."""
    return b"".join(_field(f) for f in fields)


def hash_fields(*fields: Field) -> bytes:
    return digest(encode(*fields))


@dataclass(frozen=True, order=True)
class Address:
    """20-byte account identifier; prints as lowercase hex."""

    raw: bytes

    def __post_init__(self):
        if not isinstance(self.raw, bytes) or len(self.raw) != ADDRESS_SIZE:
            raise ValueError(f"address must be {ADDRESS_SIZE} bytes")

    def __str__(self) -> str:
        return self.raw.hex()

    def __repr__(self) -> str:
        return f"Address({self.raw.hex()[:10]}..)"

    @property
    def hex(self) -> str:
        return self.raw.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Address":
        if len(text) != 2 * ADDRESS_SIZE or text != text.lower():
            raise ValueError(f"not a canonical address: {text!r}")
        return cls(bytes.fromhex(text))

    @classmethod
    def from_seed(cls, seed: bytes | str) -> "Address":
        if isinstance(seed, str):
            seed = seed.encode("utf-8")
        return cls(hash_fields("account", seed)[:ADDRESS_SIZE])

    @classmethod
    def derive(cls, *fields: Field) -> "Address":
        """Address for a system-created entity (contracts)."""
        return cls(hash_fields("contract", *fields)[:ADDRESS_SIZE])


ZERO_ADDRESS = Address(bytes(ADDRESS_SIZE))
ZERO_HASH = bytes(DIGEST_SIZE)
