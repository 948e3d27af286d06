"""Rule-based grapheme-to-phoneme conversion for Sao Paulo Portuguese.

Rules are ordered contextual rewrites read from a tab-separated file (see
``data/ptbr_sp_rules.tsv``). Each orthographic word is rewritten left to
right; at every position the longest matching pattern wins, ties go to the
higher priority and then to the earlier rule. A word with any position that
no rule covers is reported as failed instead of being guessed.

Word transcriptions are concatenated into one sentence-level stream with no
boundary symbols, so triphones span word boundaries.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .inventory import PhonemeInventory, UnknownSymbolError, default_inventory, normalize_symbol

__all__ = [
    "TranscriptionRule",
    "Transcription",
    "Ruleset",
    "RulesetError",
    "default_ruleset",
    "load_ruleset",
    "transcribe_sentence",
    "transcribe_tokens",
    "count_syllables",
]

_MACROS = {
    "V": "[aeiouáàâãéêíóôõúü]",
    "C": "[bcçdfghjklmnpqrstvwxyz]",
    "A": "[áéíóúâêô]",
    "F": "[eéêií]",
}
_MACRO_RE = re.compile("|".join(_MACROS))
_EMPTY = "-"


class RulesetError(ValueError):
    pass


def _expand(ctx: str) -> str:
    return _MACRO_RE.sub(lambda m: _MACROS[m.group(0)], ctx)


@dataclass(frozen=True)
class TranscriptionRule:
    pattern: str
    left_context: str | None
    right_context: str | None
    output: tuple[str, ...]
    priority: int = 0
    line: int = 0

    def __post_init__(self):
        if not self.pattern or "#" in self.pattern:
            raise RulesetError(f"line {self.line}: bad pattern {self.pattern!r}")
        left = re.compile(f"(?:{_expand(self.left_context)})$") if self.left_context else None
        right = re.compile(_expand(self.right_context)) if self.right_context else None
        object.__setattr__(self, "_left", left)
        object.__setattr__(self, "_right", right)

    def matches(self, padded: str, pos: int) -> bool:
        if not padded.startswith(self.pattern, pos):
            return False
        if self._left is not None and self._left.search(padded, 0, pos) is None:
            return False
        if self._right is not None:
            if self._right.match(padded, pos + len(self.pattern)) is None:
                return False
        return True


@dataclass(frozen=True)
class Transcription:
    phonemes: tuple[str, ...]
    syllable_count: int
    failed_tokens: tuple[str, ...] = ()
    id: str | None = None

    @property
    def complete(self) -> bool:
        return not self.failed_tokens

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "phonemes": " ".join(self.phonemes),
            "syllable_count": self.syllable_count,
            "failed_tokens": list(self.failed_tokens),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Transcription":
        phonemes = tuple(d["phonemes"].split()) if d["phonemes"] else ()
        return cls(phonemes, int(d["syllable_count"]), tuple(d.get("failed_tokens", ())), d.get("id"))


class Ruleset:
    """An immutable, versioned set of :class:`TranscriptionRule`.

    All rule outputs are checked against ``inventory`` at construction.
    """

    def __init__(
        self,
        rules: Iterable[TranscriptionRule],
        version: str = "0",
        inventory: PhonemeInventory | None = None,
        cache_size: int = 1 << 17,
    ):
        self.rules = tuple(rules)
        self.version = version
        self.inventory = inventory or default_inventory()
        for rule in self.rules:
            for sym in rule.output:
                if sym not in self.inventory:
                    raise RulesetError(
                        f"line {rule.line}: output symbol {sym!r} not in inventory"
                    )
        by_first: dict[str, list[TranscriptionRule]] = {}
        for rule in self.rules:
            by_first.setdefault(rule.pattern[0], []).append(rule)
        # longest pattern first, then priority, then file order
        self._by_first = {
            ch: sorted(rs, key=lambda r: (-len(r.pattern), -r.priority, r.line))
            for ch, rs in by_first.items()
        }
        self.transcribe_word = functools.lru_cache(maxsize=cache_size)(self._transcribe_word)

    def __repr__(self) -> str:
        return f"Ruleset(version={self.version!r}, rules={len(self.rules)})"

    def _transcribe_word(self, word: str) -> tuple[str, ...] | None:
        word = word.lower()
        out: list[str] = []
        for part in re.split(r"[-‐]", word):
            part = part.replace("'", "").replace("’", "")
            if not part:
                continue
            padded = f"#{part}#"
            pos, end = 1, len(padded) - 1
            while pos < end:
                for rule in self._by_first.get(padded[pos], ()):
                    if rule.matches(padded, pos):
                        out.extend(rule.output)
                        pos += len(rule.pattern)
                        break
                else:
                    return None
        return tuple(out)


def _parse_rules(lines: Iterable[str], source: str) -> tuple[list[TranscriptionRule], str]:
    rules = []
    version = "0"
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            m = re.match(r"#\s*version:\s*(\S+)", stripped)
            if m:
                version = m.group(1)
            continue
        cols = line.split("\t")
        if len(cols) != 5:
            raise RulesetError(f"{source}:{lineno}: expected 5 columns, got {len(cols)}")
        pattern, left, right, output, priority = (c.strip() for c in cols)
        try:
            prio = int(priority)
        except ValueError:
            raise RulesetError(f"{source}:{lineno}: priority must be an integer") from None
        out = () if output == _EMPTY else tuple(normalize_symbol(s) for s in output.split())
        try:
            rules.append(
                TranscriptionRule(
                    pattern=pattern.lower(),
                    left_context=None if left == _EMPTY else left,
                    right_context=None if right == _EMPTY else right,
                    output=out,
                    priority=prio,
                    line=lineno,
                )
            )
        except re.error as exc:
            raise RulesetError(f"{source}:{lineno}: bad context regex: {exc}") from None
    return rules, version


def load_ruleset(path: str | Path, inventory: PhonemeInventory | None = None) -> Ruleset:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        rules, version = _parse_rules(fh, str(path))
    return Ruleset(rules, version, inventory)


@functools.lru_cache(maxsize=None)
def default_ruleset() -> Ruleset:
    text = (
        resources.files("phonorich.data")
        .joinpath("ptbr_sp_rules.tsv")
        .read_text(encoding="utf-8")
    )
    rules, version = _parse_rules(text.splitlines(), "ptbr_sp_rules.tsv")
    return Ruleset(rules, version)


def count_syllables(phonemes: Transcription | Sequence[str], inventory: PhonemeInventory | None = None) -> int:
    """Count syllable nuclei in a phoneme sequence.

    Every vocoid is a nucleus, except that a vocoid followed directly by
    ɪ or ʊ (a falling diphthong) counts once together with it.
    """
    if isinstance(phonemes, Transcription):
        phonemes = phonemes.phonemes
    inv = inventory or default_inventory()
    n = 0
    i = 0
    size = len(phonemes)
    while i < size:
        if inv.is_vocoid(phonemes[i]):
            n += 1
            if i + 1 < size and phonemes[i + 1] in ("ɪ", "ʊ"):
                i += 1
        i += 1
    return n


def transcribe_tokens(
    tokens: Sequence[str], rules: Ruleset | None = None, id: str | None = None
) -> Transcription:
    rules = rules or default_ruleset()
    phonemes: list[str] = []
    failed: list[str] = []
    for tok in tokens:
        out = rules.transcribe_word(tok)
        if out is None:
            failed.append(tok)
        else:
            phonemes.extend(out)
    return Transcription(
        tuple(phonemes), count_syllables(phonemes, rules.inventory), tuple(failed), id
    )


def transcribe_sentence(record, rules: Ruleset | None = None, inventory: PhonemeInventory | None = None) -> Transcription:
    """Transcribe a :class:`~phonorich.ingest.SentenceRecord` (or any object
    with ``tokens`` and ``id``) into one sentence-level phoneme stream."""
    rules = rules or default_ruleset()
    if inventory is not None and inventory != rules.inventory:
        for rule in rules.rules:
            for sym in rule.output:
                if sym not in inventory:
                    raise UnknownSymbolError(sym, f"ruleset line {rule.line}")
    return transcribe_tokens(record.tokens, rules, getattr(record, "id", None))
