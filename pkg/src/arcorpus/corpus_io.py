"""Streaming readers for web-archive files and the JSONL document store.

WARC containers are parsed record by record (version line, CRLF header
block, Content-Length-delimited payload, blank-line terminator), so peak
memory is bounded by the largest single record regardless of file size.
Malformed records are counted and skipped, never fatal.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Iterable, Iterator


class RecordType(str, Enum):
    REQUEST = "request"
    RESPONSE = "response"
    CONVERSION = "conversion"
    METADATA = "metadata"
    OTHER = "other"


class SourceStage(str, Enum):
    WET_TEXT = "wet_text"
    WARC_EXTRACTED = "warc_extracted"


class Decision(str, Enum):
    KEPT = "kept"
    DROPPED = "dropped"


@dataclass
class ArchiveRecord:
    """One record of a WARC/WET container."""

    record_type: RecordType
    target_uri: str
    content_type: str
    payload: bytes
    warc_date: str
    headers: dict[str, str] = field(default_factory=dict)


@dataclass
class StageAnnotation:
    """Outcome of one pipeline stage for one document."""

    stage: str
    decision: Decision
    rule: str = ""
    metrics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.decision is Decision.DROPPED and not self.rule:
            raise ValueError("a dropped annotation must carry a rule name")


@dataclass
class Document:
    """One web page's text plus identifiers and accumulated annotations.

    cc_langs carries the crawl metadata's detected-language hint when the
    source provides one.
    """

    id: str
    url: str
    text: str
    source_stage: SourceStage = SourceStage.WET_TEXT
    annotations: dict[str, StageAnnotation] = field(default_factory=dict)
    cc_langs: tuple[str, ...] | None = None

    def annotate(self, ann: StageAnnotation) -> None:
        self.annotations[ann.stage] = ann

    def word_count(self) -> int:
        return len(self.text.split())


def document_id(url: str, warc_date: str) -> str:
    """Stable 128-bit hex id derived from (url, warc_date)."""
    raw = url + "\n" + warc_date
    return hashlib.blake2b(raw.encode("utf-8"), digest_size=16).hexdigest()


def normalize_text(text: str) -> str:
    """NFC-normalize and strip NUL bytes; applied once at ingestion."""
    if "\x00" in text:
        text = text.replace("\x00", "")
    return unicodedata.normalize("NFC", text)


_GZIP_MAGIC = b"\x1f\x8b"

_TYPE_MAP = {
    "request": RecordType.REQUEST,
    "response": RecordType.RESPONSE,
    "conversion": RecordType.CONVERSION,
    "metadata": RecordType.METADATA,
}


class WarcReader:
    """Single-consumer iterator over ArchiveRecords of one WARC/WET stream.

    Counters: `yielded` and `malformed` track every record header
    encountered (a line starting with ``WARC/``), so that
    yielded + malformed == headers seen.
    """

    def __init__(self, source: BinaryIO, gzipped: bool | None = None):
        if gzipped is None:
            gzipped = self._sniff_gzip(source)
        # GzipFile restarts decompression at each member boundary, which
        # handles Common Crawl's per-record gzip members.
        self._fh: BinaryIO = gzip.GzipFile(fileobj=source) if gzipped else source
        self.yielded = 0
        self.malformed = 0
        self._pending_version: bytes | None = None

    @staticmethod
    def _sniff_gzip(source: BinaryIO) -> bool:
        peek = getattr(source, "peek", None)
        if peek is not None:
            head = peek(2)[:2]
        else:
            pos = source.tell()
            head = source.read(2)
            source.seek(pos)
        return head == _GZIP_MAGIC

    def __iter__(self) -> "WarcReader":
        return self

    def __next__(self) -> ArchiveRecord:
        while True:
            version = self._next_version_line()
            if version is None:
                raise StopIteration
            record = self._read_record_body()
            if record is not None:
                self.yielded += 1
                return record
            self.malformed += 1

    def _next_version_line(self) -> bytes | None:
        """Advance to the next line starting with WARC/ (or EOF)."""
        if self._pending_version is not None:
            line, self._pending_version = self._pending_version, None
            return line
        while True:
            line = self._fh.readline()
            if not line:
                return None
            if line.startswith(b"WARC/"):
                return line

    def _read_record_body(self) -> ArchiveRecord | None:
        headers: dict[str, str] = {}
        last_key = None
        while True:
            line = self._fh.readline()
            if not line:
                return None
            stripped = line.rstrip(b"\r\n")
            if not stripped:
                break
            if stripped[:1] in (b" ", b"\t") and last_key is not None:
                # header continuation line
                headers[last_key] += " " + stripped.strip().decode("utf-8", "replace")
                continue
            name, sep, value = stripped.partition(b":")
            if not sep:
                continue
            last_key = name.strip().decode("ascii", "replace").lower()
            headers[last_key] = value.strip().decode("utf-8", "replace")

        length_str = headers.get("content-length")
        warc_type = headers.get("warc-type")
        if length_str is None or not length_str.isdigit():
            return None
        payload = self._read_exact(int(length_str))
        if payload is None:
            return None
        self._consume_trailer()
        if warc_type is None:
            return None
        return ArchiveRecord(
            record_type=_TYPE_MAP.get(warc_type.lower(), RecordType.OTHER),
            target_uri=headers.get("warc-target-uri", ""),
            content_type=headers.get("content-type", ""),
            payload=payload,
            warc_date=headers.get("warc-date", ""),
            headers=headers,
        )

    def _read_exact(self, n: int) -> bytes | None:
        chunks = []
        remaining = n
        while remaining > 0:
            chunk = self._fh.read(min(remaining, 1 << 20))
            if not chunk:
                return None
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def _consume_trailer(self) -> None:
        """Eat the two blank lines after a payload, tolerating sloppy files."""
        for _ in range(2):
            line = self._fh.readline()
            if not line:
                return
            if line.rstrip(b"\r\n"):
                # Payload boundary was off; treat this line as a possible
                # next record header so we stay in sync.
                if line.startswith(b"WARC/"):
                    self._pending_version = line
                return


def read_warc(source: BinaryIO, gzipped: bool | None = None) -> WarcReader:
    """Stream ArchiveRecords from a WARC file, skipping malformed records."""
    return WarcReader(source, gzipped=gzipped)


class WetReader:
    """Iterator of Documents built from the conversion records of a WET file."""

    def __init__(self, source: BinaryIO, gzipped: bool | None = None):
        self._reader = WarcReader(source, gzipped=gzipped)

    @property
    def malformed(self) -> int:
        return self._reader.malformed

    def __iter__(self) -> Iterator[Document]:
        for record in self._reader:
            if record.record_type is not RecordType.CONVERSION:
                continue
            text = normalize_text(record.payload.decode("utf-8", "replace"))
            yield Document(
                id=document_id(record.target_uri, record.warc_date),
                url=record.target_uri,
                text=text,
                source_stage=SourceStage.WET_TEXT,
            )


def read_wet(source: BinaryIO, gzipped: bool | None = None) -> WetReader:
    return WetReader(source, gzipped=gzipped)


# --- JSONL document store -------------------------------------------------
# Schema per line: {"id","url","text","annotations"} plus "source_stage" so
# that a document round-trips losslessly.


def document_to_dict(doc: Document) -> dict:
    obj = {
        "id": doc.id,
        "url": doc.url,
        "text": doc.text,
        "source_stage": doc.source_stage.value,
        "annotations": {
            name: {
                "decision": ann.decision.value,
                "rule": ann.rule,
                "metrics": ann.metrics,
            }
            for name, ann in doc.annotations.items()
        },
    }
    if doc.cc_langs is not None:
        obj["cc_langs"] = list(doc.cc_langs)
    return obj


def document_from_dict(obj: dict) -> Document:
    annotations = {}
    for name, raw in obj.get("annotations", {}).items():
        annotations[name] = StageAnnotation(
            stage=name,
            decision=Decision(raw.get("decision", "kept")),
            rule=raw.get("rule", ""),
            metrics={k: float(v) for k, v in raw.get("metrics", {}).items()},
        )
    cc_langs = obj.get("cc_langs")
    return Document(
        id=obj["id"],
        url=obj.get("url", ""),
        text=obj.get("text", ""),
        source_stage=SourceStage(obj.get("source_stage", "wet_text")),
        annotations=annotations,
        cc_langs=tuple(cc_langs) if cc_langs is not None else None,
    )


def write_jsonl(docs: Iterable[Document], sink: BinaryIO) -> int:
    """Write one JSON object per document; returns the count written."""
    count = 0
    for doc in docs:
        line = json.dumps(document_to_dict(doc), ensure_ascii=False, sort_keys=True)
        sink.write(line.encode("utf-8"))
        sink.write(b"\n")
        count += 1
    return count


def read_jsonl(source: BinaryIO) -> Iterator[Document]:
    for line in source:
        line = line.strip()
        if not line:
            continue
        yield document_from_dict(json.loads(line.decode("utf-8")))


def write_jsonl_path(docs: Iterable[Document], path) -> int:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        return write_jsonl(docs, fh)


def read_jsonl_path(path) -> Iterator[Document]:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        yield from read_jsonl(fh)
