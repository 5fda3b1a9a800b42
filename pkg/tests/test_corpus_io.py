import gzip
import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arcorpus.corpus_io import (
    Decision,
    Document,
    RecordType,
    SourceStage,
    StageAnnotation,
    document_from_dict,
    document_id,
    document_to_dict,
    normalize_text,
    read_jsonl,
    read_warc,
    read_wet,
    write_jsonl,
)
from conftest import build_warc_record


def reader_for(data: bytes, gzipped=None):
    return read_warc(io.BufferedReader(io.BytesIO(data)), gzipped=gzipped)


class TestReadWarc:
    def test_empty_input(self):
        reader = reader_for(b"")
        assert list(reader) == []
        assert reader.malformed == 0
        assert reader.yielded == 0

    def test_three_response_records(self):
        uris = [f"https://example.org/page{i}" for i in range(3)]
        data = b"".join(
            build_warc_record("response", f"body {i}".encode(), target_uri=uri)
            for i, uri in enumerate(uris)
        )
        records = list(reader_for(data))
        assert len(records) == 3
        assert [r.target_uri for r in records] == uris
        assert all(r.record_type is RecordType.RESPONSE for r in records)

    def test_payload_matches_declared_length(self):
        data = build_warc_record("response", b"hello", target_uri="https://a.example/")
        (record,) = list(reader_for(data))
        assert record.payload == b"hello"
        assert len(record.payload) == 5

    def test_gzipped_multi_member(self):
        members = [
            gzip.compress(build_warc_record("response", b"one", target_uri="https://a.example/1")),
            gzip.compress(build_warc_record("response", b"two", target_uri="https://a.example/2")),
        ]
        records = list(reader_for(b"".join(members)))
        assert [r.payload for r in records] == [b"one", b"two"]

    def test_gzip_sniffing(self):
        data = gzip.compress(build_warc_record("response", b"x", target_uri="https://a.example/"))
        assert len(list(reader_for(data, gzipped=None))) == 1

    def test_missing_warc_type_counts_malformed(self):
        bad = build_warc_record("response", b"bad", target_uri="https://bad.example/",
                                omit_headers=("WARC-Type",))
        good = build_warc_record("response", b"good", target_uri="https://good.example/")
        reader = reader_for(bad + good)
        records = list(reader)
        assert [r.payload for r in records] == [b"good"]
        assert reader.malformed == 1
        assert reader.yielded == 1

    def test_missing_content_length_counts_malformed(self):
        bad = build_warc_record("response", b"payload", target_uri="https://bad.example/",
                                omit_headers=("Content-Length",))
        good = build_warc_record("response", b"fine", target_uri="https://good.example/")
        reader = reader_for(bad + good)
        records = list(reader)
        assert [r.payload for r in records] == [b"fine"]
        assert reader.malformed == 1

    def test_malformed_plus_yielded_equals_headers(self):
        parts = [
            build_warc_record("response", b"a", target_uri="https://x.example/a"),
            build_warc_record("response", b"b", target_uri="https://x.example/b",
                              omit_headers=("WARC-Type",)),
            build_warc_record("metadata", b"c"),
            build_warc_record("response", b"d", target_uri="https://x.example/d",
                              omit_headers=("Content-Length",)),
        ]
        reader = reader_for(b"".join(parts))
        list(reader)
        assert reader.yielded + reader.malformed == 4

    def test_record_types_mapped(self):
        data = b"".join(
            build_warc_record(t, b"x")
            for t in ("request", "response", "conversion", "metadata", "warcinfo")
        )
        types = [r.record_type for r in reader_for(data)]
        assert types == [
            RecordType.REQUEST,
            RecordType.RESPONSE,
            RecordType.CONVERSION,
            RecordType.METADATA,
            RecordType.OTHER,
        ]


class TestReadWet:
    def wet_bytes(self):
        return b"".join(
            [
                build_warc_record("warcinfo", b"software: test"),
                build_warc_record(
                    "conversion",
                    "نص الصفحة الأولى".encode("utf-8"),
                    target_uri="https://ar.example/1",
                ),
                build_warc_record("metadata", b"fetch info"),
                build_warc_record(
                    "conversion",
                    "نص الصفحة الثانية".encode("utf-8"),
                    target_uri="https://ar.example/2",
                ),
            ]
        )

    def test_conversion_records_only(self):
        docs = list(read_wet(io.BufferedReader(io.BytesIO(self.wet_bytes()))))
        assert len(docs) == 2
        assert [d.url for d in docs] == ["https://ar.example/1", "https://ar.example/2"]
        assert all(d.source_stage is SourceStage.WET_TEXT for d in docs)

    def test_empty_conversion_body(self):
        data = build_warc_record("conversion", b"", target_uri="https://ar.example/empty")
        (doc,) = list(read_wet(io.BufferedReader(io.BytesIO(data))))
        assert doc.text == ""

    def test_rereading_gives_identical_ids(self):
        first = [d.id for d in read_wet(io.BufferedReader(io.BytesIO(self.wet_bytes())))]
        second = [d.id for d in read_wet(io.BufferedReader(io.BytesIO(self.wet_bytes())))]
        assert first == second

    def test_text_is_nfc_and_nul_free(self):
        # U+0065 U+0301 composes to U+00E9 under NFC
        raw = "café and\x00null".encode("utf-8")
        data = build_warc_record("conversion", raw, target_uri="https://x.example/")
        (doc,) = list(read_wet(io.BufferedReader(io.BytesIO(data))))
        assert "\x00" not in doc.text
        assert "café" in doc.text


class TestDocumentId:
    def test_deterministic(self):
        a = document_id("https://x.example/", "2024-01-01T00:00:00Z")
        b = document_id("https://x.example/", "2024-01-01T00:00:00Z")
        assert a == b
        assert len(a) == 32
        int(a, 16)  # hex-encoded

    def test_distinct_inputs_differ(self):
        assert document_id("https://x.example/a", "t") != document_id("https://x.example/b", "t")


def sample_document():
    return Document(
        id=document_id("https://ar.example/x", "2024-01-01T00:00:00Z"),
        url="https://ar.example/x",
        text="مرحبا بالعالم.\nسطر ثان.",
        source_stage=SourceStage.WET_TEXT,
        annotations={
            "langid": StageAnnotation("langid", Decision.KEPT, metrics={"confidence": 0.97}),
            "gopher_quality": StageAnnotation(
                "gopher_quality", Decision.DROPPED, rule="min_words",
                metrics={"word_count": 4.0},
            ),
        },
    )


class TestJsonl:
    def test_zero_documents(self):
        sink = io.BytesIO()
        assert write_jsonl([], sink) == 0
        assert sink.getvalue() == b""

    def test_round_trip_single_document(self):
        doc = sample_document()
        sink = io.BytesIO()
        assert write_jsonl([doc], sink) == 1
        assert sink.getvalue().count(b"\n") == 1
        (back,) = list(read_jsonl(io.BytesIO(sink.getvalue())))
        assert back == doc

    def test_thousand_documents_line_count(self):
        docs = [
            Document(id=document_id(f"https://x.example/{i}", "t"), url=f"https://x.example/{i}",
                     text=f"doc {i}")
            for i in range(1000)
        ]
        sink = io.BytesIO()
        count = write_jsonl(docs, sink)
        assert count == 1000
        # independent line counter
        assert len(sink.getvalue().splitlines()) == 1000

    def test_arabic_survives_utf8(self):
        doc = sample_document()
        sink = io.BytesIO()
        write_jsonl([doc], sink)
        assert "مرحبا".encode("utf-8") in sink.getvalue()

    def test_dropped_annotation_requires_rule(self):
        with pytest.raises(ValueError):
            StageAnnotation("x", Decision.DROPPED, rule="")


annotation_strategy = st.builds(
    lambda stage, kept, rule, metrics: StageAnnotation(
        stage=stage,
        decision=Decision.KEPT if kept else Decision.DROPPED,
        rule="" if kept else (rule or "rule"),
        metrics=metrics,
    ),
    stage=st.text(st.characters(codec="utf-8", exclude_characters="\x00"), min_size=1, max_size=8),
    kept=st.booleans(),
    rule=st.text(min_size=1, max_size=8),
    metrics=st.dictionaries(st.text(min_size=1, max_size=6), st.floats(allow_nan=False), max_size=3),
)

document_strategy = st.builds(
    lambda url, text, anns: Document(
        id=document_id(url, "2024-01-01T00:00:00Z"),
        url=url,
        text=text,
        annotations={a.stage: StageAnnotation(a.stage, a.decision, a.rule, a.metrics) for a in anns},
    ),
    url=st.text(st.characters(codec="utf-8", exclude_characters="\x00"), max_size=40),
    text=st.text(st.characters(codec="utf-8", exclude_characters="\x00"), max_size=200),
    anns=st.lists(annotation_strategy, max_size=3),
)


@settings(max_examples=100, deadline=None)
@given(document_strategy)
def test_jsonl_round_trip_property(doc):
    sink = io.BytesIO()
    write_jsonl([doc], sink)
    (back,) = list(read_jsonl(io.BytesIO(sink.getvalue())))
    assert back == doc


def test_document_dict_schema_fields():
    obj = document_to_dict(sample_document())
    assert {"id", "url", "text", "annotations"} <= set(obj)
    parsed = json.loads(json.dumps(obj))
    assert document_from_dict(parsed) == sample_document()


def test_normalize_text():
    assert normalize_text("é") == "é"
    assert "\x00" not in normalize_text("a\x00b")
