"""Plain-text extraction from HTML payloads of web-archive response records.

A forgiving streaming tag scanner, not a tree builder: enough to strip
script/style/nav-style boilerplate containers and to turn block elements
into line breaks. The downstream quality filters carry the real quality
burden.
"""

from __future__ import annotations

import codecs
import re
import unicodedata
from dataclasses import dataclass, field
from html.parser import HTMLParser

DEFAULT_DROP_ELEMENTS = frozenset(
    {"script", "style", "noscript", "svg", "form", "nav", "footer", "header", "aside"}
)
DEFAULT_BLOCK_TAGS = frozenset(
    {"p", "div", "li", "h1", "h2", "h3", "h4", "h5", "h6", "br", "tr"}
)


@dataclass
class ExtractionConfig:
    drop_elements: frozenset[str] = DEFAULT_DROP_ELEMENTS
    block_tags: frozenset[str] = DEFAULT_BLOCK_TAGS
    min_block_chars: int = 0


_WS_RUN = re.compile(r"\s+")
_META_CHARSET = re.compile(
    rb"""<meta[^>]+charset\s*=\s*["']?([\w.:-]+)""", re.IGNORECASE
)
_HEADER_CHARSET = re.compile(rb"""charset\s*=\s*["']?([\w.:-]+)""", re.IGNORECASE)


class _TextCollector(HTMLParser):
    def __init__(self, cfg: ExtractionConfig):
        super().__init__(convert_charrefs=True)
        self.cfg = cfg
        self.lines: list[str] = []
        self._buf: list[str] = []
        self._drop_stack: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag in self.cfg.drop_elements:
            self._drop_stack.append(tag)
            self._flush()
            return
        if tag in self.cfg.block_tags:
            self._flush()

    def handle_endtag(self, tag):
        if tag in self.cfg.drop_elements:
            # pop the innermost matching element; unmatched end tags ignored
            for i in range(len(self._drop_stack) - 1, -1, -1):
                if self._drop_stack[i] == tag:
                    del self._drop_stack[i:]
                    break
            self._flush()
            return
        if tag in self.cfg.block_tags:
            self._flush()

    def handle_data(self, data):
        if not self._drop_stack and data:
            self._buf.append(data)

    def _flush(self):
        if not self._buf:
            return
        line = _WS_RUN.sub(" ", "".join(self._buf)).strip()
        self._buf.clear()
        if line and len(line) >= self.cfg.min_block_chars:
            self.lines.append(line)

    def result(self) -> str:
        self._flush()
        return "\n".join(self.lines)


def _strip_http_headers(payload: bytes) -> tuple[bytes, str | None]:
    """Split an embedded HTTP message into (body, declared charset)."""
    if not payload.startswith(b"HTTP/"):
        return payload, None
    sep = payload.find(b"\r\n\r\n")
    width = 4
    if sep < 0:
        sep = payload.find(b"\n\n")
        width = 2
    if sep < 0:
        return payload, None
    head, body = payload[:sep], payload[sep + width :]
    m = _HEADER_CHARSET.search(head)
    charset = m.group(1).decode("ascii", "replace") if m else None
    return body, charset


def _decode(body: bytes, http_charset: str | None, hint: str | None) -> str:
    # resolution order: HTTP header, meta tag, caller hint, UTF-8 fallback
    candidates = [http_charset]
    m = _META_CHARSET.search(body[:4096])
    if m:
        candidates.append(m.group(1).decode("ascii", "replace"))
    candidates.append(hint)
    for name in candidates:
        if not name:
            continue
        try:
            codec = codecs.lookup(name)
        except LookupError:
            continue
        return body.decode(codec.name, errors="replace")
    return body.decode("utf-8", errors="replace")


def extract_text(
    html: bytes | str,
    charset_hint: str | None = None,
    cfg: ExtractionConfig | None = None,
) -> str:
    """Extract plain text from an HTML payload.

    Never raises on malformed markup; undecodable bytes become replacement
    characters. Output is NFC-normalized with one line per block element.
    """
    if cfg is None:
        cfg = ExtractionConfig()
    if isinstance(html, bytes):
        body, http_charset = _strip_http_headers(html)
        text = _decode(body, http_charset, charset_hint)
    else:
        text = html
    if "\x00" in text:
        text = text.replace("\x00", "")
    collector = _TextCollector(cfg)
    try:
        collector.feed(text)
        collector.close()
    except Exception:
        # html.parser is tolerant by design; anything else must not abort a record
        pass
    return unicodedata.normalize("NFC", collector.result())
