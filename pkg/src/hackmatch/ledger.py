"""Hash-chained game ledger with optional proof-of-work.

Each block binds a status-report-shaped record to the chain with
sha256(index || prev_hash || payload || nonce), where index and nonce are
8-byte big-endian integers, prev_hash is the raw 32-byte parent digest, and
payload is canonical JSON bytes. With a nonzero difficulty the digest must
start with that many zero bits, Bitcoin style. Matches run at difficulty 0;
proof-of-work exists for the decentralized mode and its tests.

Fork resolution is longest-valid-chain with ties broken by the lowest tip
hash, so every peer picks the same winner.
"""

import hashlib
import struct
from dataclasses import dataclass, replace

from .protocol import FrameDecoder, canonical_decode, canonical_encode, encode_frame

GENESIS_PREV = bytes(32)
MAX_DIFFICULTY_BITS = 24
_U64 = struct.Struct(">Q")
_NONCE_LIMIT = 2 ** 64


@dataclass(frozen=True)
class LedgerBlock:
    index: int
    prev_hash: bytes
    payload: bytes  # canonical JSON bytes, the exact hashing preimage
    nonce: int
    hash: bytes

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("index must be non-negative")
        if len(self.prev_hash) != 32:
            raise ValueError("prev_hash must be 32 bytes")
        if len(self.hash) != 32:
            raise ValueError("hash must be 32 bytes")
        if not 0 <= self.nonce < _NONCE_LIMIT:
            raise ValueError("nonce must fit in 64 bits")

    def record(self):
        """Decoded payload object."""
        return canonical_decode(self.payload)


def block_hash(index: int, prev_hash: bytes, payload: bytes, nonce: int) -> bytes:
    h = hashlib.sha256()
    h.update(_U64.pack(index))
    h.update(prev_hash)
    h.update(payload)
    h.update(_U64.pack(nonce))
    return h.digest()


def leading_zero_bits(digest: bytes) -> int:
    bits = 0
    for byte in digest:
        if byte == 0:
            bits += 8
            continue
        bits += 8 - byte.bit_length()
        break
    return bits


def meets_difficulty(digest: bytes, difficulty_bits: int) -> bool:
    return leading_zero_bits(digest) >= difficulty_bits


def _canonical_payload(payload) -> bytes:
    if isinstance(payload, bytes):
        return payload
    return canonical_encode(payload)


def _mine(index: int, prev_hash: bytes, payload: bytes, difficulty_bits: int) -> LedgerBlock:
    if not 0 <= difficulty_bits <= MAX_DIFFICULTY_BITS:
        raise ValueError(f"difficulty_bits must be in [0, {MAX_DIFFICULTY_BITS}]")
    for nonce in range(_NONCE_LIMIT):
        digest = block_hash(index, prev_hash, payload, nonce)
        if meets_difficulty(digest, difficulty_bits):
            return LedgerBlock(
                index=index, prev_hash=prev_hash, payload=payload, nonce=nonce, hash=digest
            )
    raise RuntimeError("nonce space exhausted")  # pragma: no cover


def make_genesis(payload, difficulty_bits: int = 0) -> LedgerBlock:
    return _mine(0, GENESIS_PREV, _canonical_payload(payload), difficulty_bits)


def make_block(prev: LedgerBlock, payload, difficulty_bits: int = 0) -> LedgerBlock:
    """Next block after ``prev``. Nonce search starts at 0, so output is a
    pure function of the inputs."""
    return _mine(prev.index + 1, prev.hash, _canonical_payload(payload), difficulty_bits)


def verify_block(block: LedgerBlock, prev: LedgerBlock | None, difficulty_bits: int = 0) -> bool:
    if prev is None:
        if block.index != 0 or block.prev_hash != GENESIS_PREV:
            return False
    else:
        if block.index != prev.index + 1 or block.prev_hash != prev.hash:
            return False
    if block.hash != block_hash(block.index, block.prev_hash, block.payload, block.nonce):
        return False
    return meets_difficulty(block.hash, difficulty_bits)


def verify_chain(blocks, difficulty_bits: int = 0) -> tuple[bool, int | None]:
    """(valid, first_bad_index). Checks linkage, recomputes every digest,
    enforces difficulty. Index is the position in the sequence."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("need at least one block")
    prev = None
    for i, block in enumerate(blocks):
        if not verify_block(block, prev, difficulty_bits):
            return False, i
        prev = block
    return True, None


def resolve(peers, difficulty_bits: int = 0) -> list[LedgerBlock]:
    """Pick the canonical chain among peers: longest valid one, ties broken
    by the lexically lowest tip hash. Raises when no peer chain verifies."""
    best = None
    for chain in peers:
        chain = list(chain)
        if not chain:
            continue
        ok, _ = verify_chain(chain, difficulty_bits)
        if not ok:
            continue
        if best is None:
            best = chain
            continue
        if len(chain) > len(best):
            best = chain
        elif len(chain) == len(best) and chain[-1].hash < best[-1].hash:
            best = chain
    if best is None:
        raise ValueError("no valid chain among peers")
    return best


def tamper_payload(block: LedgerBlock, byte_index: int, bit: int) -> LedgerBlock:
    """Copy of ``block`` with one payload bit flipped (hash left stale).
    Test helper for tamper-evidence checks."""
    flipped = bytearray(block.payload)
    flipped[byte_index] ^= 1 << bit
    return replace(block, payload=bytes(flipped))


# --- persistence ---------------------------------------------------------------

def _block_to_obj(block: LedgerBlock) -> dict:
    return {
        "index": block.index,
        "prev_hash": block.prev_hash.hex(),
        "payload": canonical_decode(block.payload),
        "nonce": block.nonce,
        "hash": block.hash.hex(),
    }


def _block_from_obj(obj: dict) -> LedgerBlock:
    return LedgerBlock(
        index=obj["index"],
        prev_hash=bytes.fromhex(obj["prev_hash"]),
        payload=canonical_encode(obj["payload"]),
        nonce=obj["nonce"],
        hash=bytes.fromhex(obj["hash"]),
    )


def block_frame(block: LedgerBlock) -> bytes:
    return encode_frame(canonical_encode(_block_to_obj(block)))


def append_block(path, block: LedgerBlock) -> None:
    with open(path, "ab") as fh:
        fh.write(block_frame(block))


def save_chain(path, blocks) -> None:
    with open(path, "wb") as fh:
        for block in blocks:
            fh.write(block_frame(block))


def load_chain(path) -> list[LedgerBlock]:
    decoder = FrameDecoder()
    with open(path, "rb") as fh:
        frames = decoder.feed(fh.read())
    if decoder.pending:
        raise ValueError(f"trailing {decoder.pending} bytes are not a whole block")
    return [_block_from_obj(canonical_decode(frame)) for frame in frames]
