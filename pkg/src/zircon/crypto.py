"""Cryptographic primitives shared by the watermark codec and the
internal-datagram labeler.

Everything here is a pure function of its inputs: one fixed-size block
encryption, the payload digest, digest truncation, and the selection of 32
label bits out of a digest.  Key material is wrapped in SymmetricKey so the
rotation epoch travels with the bytes.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

KEY_BYTES = 16
PLAIN_BYTES = 8
CIPHER_BYTES = 16
DIGEST_BYTES = 32
TRUNCATED_BYTES = 8

# the 8-byte plaintext is padded to one cipher block with eight 0x08 bytes;
# the constant tail doubles as a decryption sanity check
_PADDING = bytes([CIPHER_BYTES - PLAIN_BYTES] * (CIPHER_BYTES - PLAIN_BYTES))

LABEL_MODE_LSB32 = "lsb32"
LABEL_MODE_PRNG = "prng"
LABEL_BITS = 32


class LengthError(ValueError):
    """An octet-string argument has the wrong size for the operation."""


class DecryptionError(ValueError):
    """Block decryption produced an invalid padding tail (wrong key,
    wrong epoch, or corrupted ciphertext)."""


class LabelModeError(ValueError):
    """Invalid label-selection mode or missing PRNG seed."""


@dataclass(frozen=True)
class SymmetricKey:
    """A 16-byte shared key tagged with its rotation epoch."""

    material: bytes
    epoch: int

    def __post_init__(self) -> None:
        if len(self.material) != KEY_BYTES:
            raise LengthError(
                f"key must be {KEY_BYTES} bytes, got {len(self.material)}"
            )
        if self.epoch < 0:
            raise ValueError("key epoch must be non-negative")


class Digest(bytes):
    """A 32-byte digest value; construction enforces the length."""

    def __new__(cls, data: bytes) -> "Digest":
        if len(data) != DIGEST_BYTES:
            raise LengthError(f"digest must be {DIGEST_BYTES} bytes, got {len(data)}")
        return super().__new__(cls, data)


def _aes_single_block(key: SymmetricKey, block: bytes, decrypt: bool) -> bytes:
    cipher = Cipher(algorithms.AES(key.material), modes.ECB())
    op = cipher.decryptor() if decrypt else cipher.encryptor()
    return op.update(block) + op.finalize()


def encrypt_block(key: SymmetricKey, plain: bytes) -> bytes:
    """Encrypt an 8-byte value into a single 16-byte cipher block."""
    if len(plain) != PLAIN_BYTES:
        raise LengthError(f"plaintext must be {PLAIN_BYTES} bytes, got {len(plain)}")
    return _aes_single_block(key, plain + _PADDING, decrypt=False)


def decrypt_block(key: SymmetricKey, cipher: bytes) -> bytes:
    """Invert encrypt_block, verifying and stripping the padding tail."""
    if len(cipher) != CIPHER_BYTES:
        raise LengthError(f"ciphertext must be {CIPHER_BYTES} bytes, got {len(cipher)}")
    block = _aes_single_block(key, cipher, decrypt=True)
    if block[PLAIN_BYTES:] != _PADDING:
        raise DecryptionError("padding check failed")
    return block[:PLAIN_BYTES]


def digest(data: bytes) -> Digest:
    """Full 32-byte digest of arbitrary input."""
    return Digest(hashlib.sha256(data).digest())


def truncate_digest(d: Digest) -> bytes:
    """First 8 bytes of a digest, in order."""
    if len(d) != DIGEST_BYTES:
        raise LengthError(f"digest must be {DIGEST_BYTES} bytes, got {len(d)}")
    return bytes(d[:TRUNCATED_BYTES])


def select_label_bits(d: Digest, mode: str = LABEL_MODE_LSB32,
                      seed: object = None) -> int:
    """Pick 32 bits out of a digest for header labeling.

    lsb32 reads the low 4 digest bytes as one big-endian value.  prng draws
    32 distinct bit positions (without replacement) from a generator seeded
    with `seed` and concatenates those bits in draw order, first drawn bit
    most significant.  Bit positions count from the most significant bit of
    byte 0.
    """
    if len(d) != DIGEST_BYTES:
        raise LengthError(f"digest must be {DIGEST_BYTES} bytes, got {len(d)}")
    if mode == LABEL_MODE_LSB32:
        return int.from_bytes(d[-4:], "big")
    if mode == LABEL_MODE_PRNG:
        if seed is None:
            raise LabelModeError("prng label mode requires a seed")
        rng = random.Random(seed)
        positions = rng.sample(range(DIGEST_BYTES * 8), LABEL_BITS)
        value = 0
        for i, pos in enumerate(positions):
            byte_index, bit_index = divmod(pos, 8)
            bit = (d[byte_index] >> (7 - bit_index)) & 1
            value |= bit << (LABEL_BITS - 1 - i)
        return value
    raise LabelModeError(f"unknown label mode {mode!r}")
