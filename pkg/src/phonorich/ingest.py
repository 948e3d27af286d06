"""Streaming corpus ingestion.

Raw documents are read lazily from plain-text or JSON-lines files, cleaned,
split into sentences, tokenized and typed, then passed through the corpus
exclusion criteria. Nothing here holds more than one document in memory.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import enum
import hashlib
import html
import json
import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

logger = logging.getLogger(__name__)

__all__ = [
    "IngestError",
    "IngestSchemaError",
    "RawDocument",
    "SentenceType",
    "SentenceRecord",
    "ExclusionCriteria",
    "ExclusionStats",
    "clean",
    "tokenize",
    "segment",
    "classify_sentence_type",
    "apply_exclusions",
    "read_plain_text",
    "read_jsonl",
    "read_documents",
    "read_blocklist",
    "count_tokens",
    "ingest",
    "DEFAULT_ABBREVIATIONS",
]


class IngestError(Exception):
    """Unreadable or malformed input."""


class IngestSchemaError(IngestError):
    """A readable input whose records do not have the expected shape."""


class SentenceType(str, enum.Enum):
    DECLARATIVE = "declarative"
    INTERROGATIVE = "interrogative"
    EXCLAMATIVE = "exclamative"


@dataclass(frozen=True)
class RawDocument:
    text: str
    source: str
    genre: str | None = None
    date: dt.date | None = None
    offset: int = 0

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("document text is empty")


@dataclass(frozen=True)
class SentenceRecord:
    id: str
    text: str
    tokens: tuple[str, ...]
    sentence_type: SentenceType
    source: str
    genre: str | None = None
    date: dt.date | None = None

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"sentence {self.id} has no tokens")

    @property
    def word_count(self) -> int:
        return len(self.tokens)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "text": self.text,
            "tokens": list(self.tokens),
            "sentence_type": self.sentence_type.value,
            "source": self.source,
        }
        if self.genre is not None:
            d["genre"] = self.genre
        if self.date is not None:
            d["date"] = self.date.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SentenceRecord":
        date = d.get("date")
        return cls(
            id=str(d["id"]),
            text=d["text"],
            tokens=tuple(d["tokens"]),
            sentence_type=SentenceType(d["sentence_type"]),
            source=d["source"],
            genre=d.get("genre"),
            date=dt.date.fromisoformat(date) if date else None,
        )


@dataclass(frozen=True)
class ExclusionCriteria:
    blocklist: frozenset[str] = frozenset()
    min_corpus_tokens: int = 5000
    max_nonstandard_ratio: float = 0.10
    date_range: tuple[dt.date, dt.date] = (dt.date(1990, 1, 1), dt.date(2023, 12, 31))

    def __post_init__(self):
        if self.min_corpus_tokens <= 0:
            raise ValueError("min_corpus_tokens must be positive")
        if not 0.0 <= self.max_nonstandard_ratio <= 1.0:
            raise ValueError("max_nonstandard_ratio must lie in [0, 1]")
        if self.date_range[0] > self.date_range[1]:
            raise ValueError("date_range start is after its end")
        object.__setattr__(self, "blocklist", frozenset(w.lower() for w in self.blocklist))


@dataclass
class ExclusionStats:
    seen: int = 0
    kept: int = 0
    dropped: Counter = field(default_factory=Counter)
    rejected_corpora: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seen": self.seen,
            "kept": self.kept,
            "dropped": dict(sorted(self.dropped.items())),
            "rejected_corpora": dict(sorted(self.rejected_corpora.items())),
        }


# -- cleaning ---------------------------------------------------------------

_TAG_RE = re.compile(r"<[^<>]*>")
_WS_RE = re.compile(r"\s+")


def _clean_once(text: str) -> str:
    text = html.unescape(text)
    text = _TAG_RE.sub(" ", text)
    text = unicodedata.normalize("NFC", text)
    chars = []
    for ch in text:
        cat = unicodedata.category(ch)
        if ch.isspace():
            chars.append(" ")
        elif cat in ("Cc", "Cf", "Co", "Cs", "Cn"):
            continue
        else:
            chars.append(ch)
    return _WS_RE.sub(" ", "".join(chars)).strip()


def clean(text: str) -> str:
    """Strip markup and control characters and collapse whitespace.

    Applied to a fixed point, so ``clean(clean(x)) == clean(x)``.
    """
    for _ in range(16):
        cleaned = _clean_once(text)
        if cleaned == text:
            break
        text = cleaned
    return text


# -- tokenization and segmentation -----------------------------------------

_TOKEN_RE = re.compile(r"[^\W_]+(?:[-'’‐][^\W_]+)*")


def tokenize(text: str) -> list[str]:
    """Word tokens with punctuation detached; hyphenated clitics stay whole."""
    return _TOKEN_RE.findall(text)


DEFAULT_ABBREVIATIONS = frozenset(
    """
    sr sra srta srs sras dr dra drs dras prof profa profs sto sta exmo exma
    av pç r n nº núm num pág págs p pp cap caps art arts fig figs
    vol vols ed eds etc ex obs tel cel cia ltda jr gal gen maj ten sgt
    dep sen gov pres adm eng arq mr mrs ms séc sec jan fev abr jun jul
    ago set out nov aprox op cit vs
    """.split()
)

_CLOSERS = "\"'”’»)]}"
_BOUNDARY_RE = re.compile(r"([.?!…]+)([" + re.escape(_CLOSERS) + r"]*)(\s+)")


def _ends_with_abbreviation(chunk: str, abbreviations: frozenset[str]) -> bool:
    m = re.search(r"([^\W\d_]+)\.$", chunk)
    if m is None:
        return False
    word = m.group(1)
    if len(word) == 1 and word.isupper():
        return True  # initial, e.g. "J. Silva"
    before = chunk[: m.start(1)]
    if before.endswith("."):
        return True  # dotted acronym, e.g. "E.U.A."
    return word.lower() in abbreviations


def split_sentences(text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[tuple[int, str]]:
    """Split cleaned text into ``(char_offset, sentence)`` pairs."""
    out = []
    start = 0
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end(2)
        chunk = text[start:end]
        if m.group(1) == "." and _ends_with_abbreviation(chunk, abbreviations):
            continue
        nxt = text[m.end(3) : m.end(3) + 1]
        if nxt and nxt.islower():
            continue
        if chunk.strip():
            out.append((start, chunk.strip()))
        start = m.end(3)
    tail = text[start:].strip()
    if tail:
        out.append((start, tail))
    return out


def classify_sentence_type(text: str) -> SentenceType:
    """Type a sentence from its terminal punctuation cluster."""
    stripped = text.rstrip().rstrip(_CLOSERS + " ")
    m = re.search(r"[.?!…]+$", stripped)
    if m is None:
        return SentenceType.DECLARATIVE
    marks = m.group(0)
    if "?" in marks:
        return SentenceType.INTERROGATIVE
    if "!" in marks:
        return SentenceType.EXCLAMATIVE
    return SentenceType.DECLARATIVE


def sentence_id(source: str, offset: int, text: str) -> str:
    h = hashlib.blake2b(digest_size=10)
    h.update(f"{source}\x00{offset}\x00{text}".encode("utf-8"))
    return h.hexdigest()


def segment(
    document: RawDocument, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> list[SentenceRecord]:
    text = clean(document.text)
    records = []
    base = document.offset
    byte_pos = 0
    char_pos = 0
    for char_offset, sentence in split_sentences(text, abbreviations):
        byte_pos += len(text[char_pos:char_offset].encode("utf-8"))
        char_pos = char_offset
        tokens = tokenize(sentence)
        if not tokens:
            continue
        records.append(
            SentenceRecord(
                id=sentence_id(document.source, base + byte_pos, sentence),
                text=sentence,
                tokens=tuple(tokens),
                sentence_type=classify_sentence_type(sentence),
                source=document.source,
                genre=document.genre,
                date=document.date,
            )
        )
    return records


# -- exclusion criteria -----------------------------------------------------


def apply_exclusions(
    records: Iterable[SentenceRecord],
    criteria: ExclusionCriteria,
    corpus_token_count: int,
    is_transcribable: Callable[[str], bool] | None = None,
    stats: ExclusionStats | None = None,
) -> Iterator[SentenceRecord]:
    """Drop records that fail any exclusion rule.

    Every rule is an independent predicate; a dropped record increments the
    counter of every rule it fails, so the counts do not depend on order.
    ``is_transcribable`` tells whether a token passes G2P; without it the
    non-standard-spelling rule is skipped.
    """
    stats = stats if stats is not None else ExclusionStats()
    corpus_too_small = corpus_token_count < criteria.min_corpus_tokens
    lo, hi = criteria.date_range
    for rec in records:
        stats.seen += 1
        reasons = []
        if corpus_too_small:
            reasons.append("corpus_size")
            stats.rejected_corpora.setdefault(rec.source, "corpus_size")
        if rec.date is not None and not lo <= rec.date <= hi:
            reasons.append("date")
            stats.rejected_corpora.setdefault(rec.source, "date")
        if criteria.blocklist and any(t.lower() in criteria.blocklist for t in rec.tokens):
            reasons.append("blocklist")
        if is_transcribable is not None:
            bad = sum(1 for t in rec.tokens if not is_transcribable(t))
            if bad / len(rec.tokens) > criteria.max_nonstandard_ratio:
                reasons.append("nonstandard")
        if reasons:
            for r in reasons:
                stats.dropped[r] += 1
            continue
        stats.kept += 1
        yield rec


# -- readers ----------------------------------------------------------------


def _parse_date(value) -> dt.date | None:
    if value in (None, ""):
        return None
    if isinstance(value, int):
        return dt.date(value, 1, 1)
    s = str(value)
    if re.fullmatch(r"\d{4}", s):
        return dt.date(int(s), 1, 1)
    try:
        return dt.date.fromisoformat(s[:10])
    except ValueError:
        raise IngestSchemaError(f"unparseable date {value!r}") from None


def _open_text(path: Path):
    try:
        return path.open(encoding="utf-8", errors="strict", newline="")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc.strerror or exc}") from exc


def read_plain_text(
    path: str | Path, source: str | None = None, one_per_file: bool = False
) -> Iterator[RawDocument]:
    """Documents from a UTF-8 text file, separated by blank lines.

    ``offset`` is the byte offset of each document in the file.
    """
    path = Path(path)
    source = source or path.stem
    if one_per_file:
        with _open_text(path) as fh:
            try:
                text = fh.read()
            except UnicodeDecodeError as exc:
                raise IngestError(f"{path}: not valid UTF-8 ({exc.reason})") from None
        if text.strip():
            yield RawDocument(text, source, offset=0)
        return
    buf: list[str] = []
    doc_start = 0
    pos = 0
    with _open_text(path) as fh:
        lineno = 0
        while True:
            try:
                line = fh.readline()
            except UnicodeDecodeError as exc:
                raise IngestError(f"{path}: line {lineno + 1}: not valid UTF-8 ({exc.reason})") from None
            lineno += 1
            if not line:
                break
            nbytes = len(line.encode("utf-8"))
            if line.strip():
                if not buf:
                    doc_start = pos
                buf.append(line)
            elif buf:
                yield RawDocument("".join(buf), source, offset=doc_start)
                buf = []
            pos += nbytes
    if buf:
        yield RawDocument("".join(buf), source, offset=doc_start)


def read_jsonl(path: str | Path, default_source: str | None = None) -> Iterator[RawDocument]:
    """Documents from line-delimited JSON objects ``{text, source, genre, date}``."""
    path = Path(path)
    pos = 0
    with _open_text(path) as fh:
        lineno = 0
        while True:
            try:
                line = fh.readline()
            except UnicodeDecodeError as exc:
                raise IngestError(f"{path}: line {lineno + 1}: not valid UTF-8 ({exc.reason})") from None
            lineno += 1
            if not line:
                break
            offset = pos
            pos += len(line.encode("utf-8"))
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                text = obj["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise IngestSchemaError(f"{path}:{lineno}: bad record: {exc}") from None
            if not isinstance(text, str) or not text.strip():
                continue
            try:
                date = _parse_date(obj.get("date"))
            except IngestSchemaError as exc:
                raise IngestSchemaError(f"{path}:{lineno}: {exc}") from None
            yield RawDocument(
                text,
                str(obj.get("source") or default_source or path.stem),
                obj.get("genre"),
                date,
                offset,
            )


def read_documents(path: str | Path) -> Iterator[RawDocument]:
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        return read_jsonl(path)
    return read_plain_text(path)


def read_blocklist(path: str | Path) -> frozenset[str]:
    words = set()
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                words.add(line.lower())
    return frozenset(words)


def count_tokens(documents: Iterable[RawDocument]) -> Counter:
    """Token counts per source, streamed over ``documents``."""
    counts: Counter = Counter()
    for doc in documents:
        counts[doc.source] += len(tokenize(clean(doc.text)))
    return counts


def ingest(
    paths: Sequence[str | Path],
    criteria: ExclusionCriteria | None = None,
    is_transcribable: Callable[[str], bool] | None = None,
    stats: ExclusionStats | None = None,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> Iterator[SentenceRecord]:
    """Stream filtered sentence records from ``paths``.

    Two passes over the inputs: the first counts tokens per source (the
    corpus-size rule needs the whole corpus), the second segments and
    filters. Output order is by source name, then input path, then document
    offset, independent of how the inputs are listed.
    """
    criteria = criteria or ExclusionCriteria()
    stats = stats if stats is not None else ExclusionStats()
    paths = sorted(Path(p) for p in paths)
    for p in paths:
        if not p.is_file():
            raise IngestError(f"input not found: {p}")
    token_counts: Counter = Counter()
    for p in paths:
        token_counts.update(count_tokens(read_documents(p)))
    logger.info("token counts per source: %s", dict(token_counts))
    for source in sorted(token_counts):
        def docs(source=source):
            for file_index, p in enumerate(paths):
                for doc in read_documents(p):
                    if doc.source == source:
                        # keep ids unique when several files share a source
                        doc = dataclasses.replace(doc, offset=(file_index << 40) | doc.offset)
                        yield from segment(doc, abbreviations)

        yield from apply_exclusions(
            docs(), criteria, token_counts[source], is_transcribable, stats
        )
