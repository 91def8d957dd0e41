"""Self-authenticating labels for internal management datagrams.

Management traffic between infrastructure nodes skips deep inspection when it
can prove it is internal: 32 bits derived from the destination address and
the first 20 payload bytes are written into the identification, flags, and
fragment-offset fields of a modeled IPv4 header.  A checker on the receiving
side recomputes the label; sensed data frames never match the fixed internal
datagram size, so they always fall through to full inspection.

The header model covers only the fields this scheme touches (total length,
identification, flags, fragment offset, addresses); writing the label uses
all 32 bits including the reserved flag bit, which is a modeling choice, not
standards-conformant traffic.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .crypto import digest, select_label_bits

_HEADER = struct.Struct(">HHH4s4s")
HEADER_BYTES = _HEADER.size  # 14

INTERNAL_AUTHENTICATED = "internal_authenticated"
INTERNAL_FORGED = "internal_forged"
REQUIRES_IDS = "requires_ids"

HASH_PREFIX_BYTES = 20


@dataclass(frozen=True)
class Ipv4HeaderModel:
    src: bytes
    dst: bytes
    payload: bytes = b""
    identification: int = 0
    flags: int = 0
    fragment_offset: int = 0
    total_length: Optional[int] = None

    def __post_init__(self) -> None:
        if len(self.src) != 4 or len(self.dst) != 4:
            raise ValueError("addresses must be 4 bytes")
        if not 0 <= self.identification <= 0xFFFF:
            raise ValueError("identification must fit 16 bits")
        if not 0 <= self.flags <= 0x7:
            raise ValueError("flags must fit 3 bits")
        if not 0 <= self.fragment_offset <= 0x1FFF:
            raise ValueError("fragment offset must fit 13 bits")
        if self.total_length is None:
            object.__setattr__(self, "total_length",
                               HEADER_BYTES + len(self.payload))

    def to_bytes(self) -> bytes:
        packed = _HEADER.pack(
            self.total_length,
            self.identification,
            (self.flags << 13) | self.fragment_offset,
            self.src,
            self.dst,
        )
        return packed + self.payload

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ipv4HeaderModel":
        if len(data) < HEADER_BYTES:
            raise ValueError(f"datagram shorter than header ({len(data)} bytes)")
        total, ident, flags_frag, src, dst = _HEADER.unpack_from(data)
        return cls(
            src=src,
            dst=dst,
            payload=data[HEADER_BYTES:],
            identification=ident,
            flags=flags_frag >> 13,
            fragment_offset=flags_frag & 0x1FFF,
            total_length=total,
        )


def _hash_input(d: Ipv4HeaderModel) -> bytes:
    prefix = d.payload[:HASH_PREFIX_BYTES]
    if len(prefix) < HASH_PREFIX_BYTES:
        prefix = prefix + bytes(HASH_PREFIX_BYTES - len(prefix))
    return d.dst + prefix


def compute_label(d: Ipv4HeaderModel, mode: str = "lsb32",
                  seed: object = None) -> int:
    return select_label_bits(digest(_hash_input(d)), mode, seed)


def extract_label(d: Ipv4HeaderModel) -> int:
    return (d.identification << 16) | (d.flags << 13) | d.fragment_offset


def label_datagram(d: Ipv4HeaderModel, mode: str = "lsb32",
                   seed: object = None) -> Ipv4HeaderModel:
    """Write the 32 label bits into identification ∥ flags ∥ fragment offset,
    most significant bits first."""
    bits = compute_label(d, mode, seed)
    return replace(
        d,
        identification=bits >> 16,
        flags=(bits >> 13) & 0x7,
        fragment_offset=bits & 0x1FFF,
    )


def check_datagram(d: Ipv4HeaderModel,
                   is_internal: Callable[[bytes], bool],
                   expected_size: int,
                   mode: str = "lsb32",
                   seed: object = None) -> str:
    """Classify a datagram: authenticated internal, forged internal, or
    ordinary traffic that must go through the IDS."""
    if not (is_internal(d.src) and is_internal(d.dst)
            and d.total_length == expected_size):
        return REQUIRES_IDS
    if extract_label(d) == compute_label(d, mode, seed):
        return INTERNAL_AUTHENTICATED
    return INTERNAL_FORGED
