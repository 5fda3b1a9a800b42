"""MinHash signatures and LSH banding for near-duplicate removal.

Each word shingle is hashed once with a 64-bit hash, then mapped through a
family of affine permutations over the Mersenne prime 2^61 - 1, all derived
from a single seed. Documents sharing any LSH band become candidate pairs
and are unioned into clusters; the lexicographically smallest doc id is the
cluster representative, so results do not depend on input order.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus_io import Decision, Document, StageAnnotation
from .stats import StageStats

MERSENNE_61 = np.uint64((1 << 61) - 1)
_MASK30 = np.uint64((1 << 30) - 1)
_MASK31 = np.uint64((1 << 31) - 1)


@dataclass
class MinHashParams:
    shingle_size: int = 5
    num_perms: int = 112
    bands: int = 14
    rows: int = 8
    jaccard_threshold: float = 0.8  # reporting only; the band layout sets the s-curve
    seed: int = 0

    def __post_init__(self):
        if self.bands * self.rows != self.num_perms:
            raise ValueError("bands * rows must equal num_perms")


@dataclass(eq=False)
class MinHashSignature:
    doc_id: str
    mins: np.ndarray  # (num_perms,) uint64, values < 2^61 - 1


@dataclass
class DupCluster:
    representative: str
    members: set[str] = field(default_factory=set)


def _fold61(x: np.ndarray) -> np.ndarray:
    """Reduce uint64 values modulo 2^61 - 1 (input may use all 64 bits)."""
    x = (x & MERSENNE_61) + (x >> np.uint64(61))
    x = (x & MERSENNE_61) + (x >> np.uint64(61))
    return np.where(x >= MERSENNE_61, x - MERSENNE_61, x)


def _mulmod61(a: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Exact (a * h) mod (2^61 - 1) for operands already below the prime.

    Splits both operands into 30/31-bit halves so every intermediate fits in
    uint64; uses 2^62 = 2 and 2^61 = 1 modulo the prime.
    """
    a_hi, a_lo = a >> np.uint64(31), a & _MASK31
    h_hi, h_lo = h >> np.uint64(31), h & _MASK31
    top = _fold61(a_hi * h_hi * np.uint64(2))
    cross = _fold61(a_hi * h_lo + a_lo * h_hi)
    # cross * 2^31 mod p: split at bit 30 since 2^61 = 1 (mod p)
    cross = _fold61(((cross & _MASK30) << np.uint64(31)) + (cross >> np.uint64(30)))
    low = _fold61(a_lo * h_lo)
    return _fold61(top + cross + low)


def _hash_family(p: MinHashParams) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(p.seed)
    prime = int(MERSENNE_61)
    a = rng.integers(1, prime, size=p.num_perms, dtype=np.uint64)
    b = rng.integers(0, prime, size=p.num_perms, dtype=np.uint64)
    return a, b


def _shingle_hash(shingle: str) -> int:
    digest = hashlib.blake2b(shingle.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % int(MERSENNE_61)


def shingles(text: str, shingle_size: int) -> set[str]:
    """Contiguous word shingles of lowercased text; short texts collapse to one."""
    lowered = text.lower()
    words = lowered.split()
    if len(words) < shingle_size:
        return {lowered}
    return {" ".join(words[i : i + shingle_size]) for i in range(len(words) - shingle_size + 1)}


def signature_for_text(doc_id: str, text: str, p: MinHashParams) -> MinHashSignature:
    a, b = _hash_family(p)
    hashes = np.fromiter(
        (_shingle_hash(s) for s in sorted(shingles(text, p.shingle_size))),
        dtype=np.uint64,
    )
    mins = np.full(p.num_perms, int(MERSENNE_61), dtype=np.uint64)
    a_col = a[:, None]
    b_col = b[:, None]
    for start in range(0, len(hashes), 4096):
        block = hashes[None, start : start + 4096]
        permuted = _fold61(_mulmod61(a_col, block) + b_col)
        np.minimum(mins, permuted.min(axis=1), out=mins)
    return MinHashSignature(doc_id=doc_id, mins=mins)


def signature(doc: Document, p: MinHashParams) -> MinHashSignature:
    return signature_for_text(doc.id, doc.text, p)


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of matching permutation minima: the MinHash Jaccard estimate."""
    return float(np.mean(a.mins == b.mins))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


def find_duplicates(signatures, p: MinHashParams) -> list[DupCluster]:
    """LSH banding + union-find; returns clusters of size >= 2."""
    sigs = list(signatures)
    for sig in sigs:
        if len(sig.mins) != p.num_perms:
            raise ValueError(
                f"signature for {sig.doc_id!r} has {len(sig.mins)} mins, expected {p.num_perms}"
            )
    uf = _UnionFind(len(sigs))
    buckets: dict[tuple[int, bytes], int] = {}
    for idx, sig in enumerate(sigs):
        for band in range(p.bands):
            key = (band, sig.mins[band * p.rows : (band + 1) * p.rows].tobytes())
            first = buckets.setdefault(key, idx)
            if first != idx:
                uf.union(first, idx)
    groups: dict[int, list[str]] = {}
    for idx, sig in enumerate(sigs):
        groups.setdefault(uf.find(idx), []).append(sig.doc_id)
    clusters = [
        DupCluster(representative=min(ids), members=set(ids))
        for ids in groups.values()
        if len(ids) > 1
    ]
    clusters.sort(key=lambda c: c.representative)
    return clusters


def dedup_stage(docs, p: MinHashParams):
    """Drop every cluster member except its representative.

    The whole input is materialized (clustering is a barrier); the returned
    stats are complete before the output iterator is consumed.
    """
    doc_list = list(docs)
    sigs = [signature(doc, p) for doc in doc_list]
    clusters = find_duplicates(sigs, p)
    drop: set[str] = set()
    cluster_size: dict[str, int] = {}
    for cluster in clusters:
        cluster_size[cluster.representative] = len(cluster.members)
        drop.update(cluster.members - {cluster.representative})

    stats = StageStats()
    kept_docs = []
    for doc in doc_list:
        words = doc.word_count()
        if doc.id in drop:
            stats.record("dedup", False, "near_duplicate", words)
        else:
            stats.record("dedup", True, "", words)
            doc.annotate(
                StageAnnotation(
                    stage="dedup",
                    decision=Decision.KEPT,
                    metrics={"cluster_size": float(cluster_size.get(doc.id, 1))},
                )
            )
            kept_docs.append(doc)
    return iter(kept_docs), stats


# --- signature spill file ---------------------------------------------------
# Fixed-width little-endian records so clustering can run out-of-core.

_SPILL_MAGIC = b"ARMH"
_SPILL_VERSION = 1
_DOC_ID_WIDTH = 64


def write_signatures(signatures, path, p: MinHashParams) -> int:
    count = 0
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHHH", _SPILL_MAGIC, _SPILL_VERSION, p.num_perms, _DOC_ID_WIDTH))
        for sig in signatures:
            raw_id = sig.doc_id.encode("utf-8")
            if len(raw_id) > _DOC_ID_WIDTH:
                raise ValueError(f"doc id too long for spill record: {sig.doc_id!r}")
            fh.write(raw_id.ljust(_DOC_ID_WIDTH, b"\x00"))
            fh.write(sig.mins.astype("<u8").tobytes())
            count += 1
    return count


def read_signatures(path):
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<4sHHH"))
        magic, version, num_perms, id_width = struct.unpack("<4sHHH", header)
        if magic != _SPILL_MAGIC or version != _SPILL_VERSION:
            raise ValueError(f"{path}: not a signature spill file")
        record_size = id_width + 8 * num_perms
        while True:
            record = fh.read(record_size)
            if not record:
                return
            if len(record) != record_size:
                raise ValueError(f"{path}: truncated spill record")
            doc_id = record[:id_width].rstrip(b"\x00").decode("utf-8")
            mins = np.frombuffer(record[id_width:], dtype="<u8").astype(np.uint64)
            yield MinHashSignature(doc_id=doc_id, mins=mins)
