"""Phonemic inventory and the vocoid/contoid major-class split.

The built-in inventory is the Sao Paulo dialect of Brazilian Portuguese:
21 contoids laid out on a place x manner grid and 10 vocoids on an
advancement x height grid. Other dialects can be loaded from a
tab-separated file with the same layout as ``data/sao_paulo_inventory.tsv``.
"""

from __future__ import annotations

import enum
import functools
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping

__all__ = [
    "MajorClass",
    "Phoneme",
    "PhonemeInventory",
    "InventoryError",
    "UnknownSymbolError",
    "normalize_symbol",
    "default_inventory",
    "load_inventory",
    "classify",
    "PLACES",
    "MANNERS",
    "ADVANCEMENTS",
    "HEIGHTS",
]

PLACES = frozenset(
    {"bilabial", "labiodental", "dental", "alveolar", "postalveolar", "palatal", "velar"}
)
MANNERS = frozenset({"plosive", "affricate", "nasal", "tap", "fricative", "lateral"})
ADVANCEMENTS = frozenset({"front", "near-front", "central", "near-back", "back"})
HEIGHTS = frozenset(
    {"close", "near-close", "close-mid", "open-mid", "near-open", "open"}
)

_TIE_BARS = ("͡", "͜")


class InventoryError(ValueError):
    """Raised for malformed or inconsistent inventory definitions."""


class UnknownSymbolError(KeyError):
    """A phoneme symbol that the active inventory does not define."""

    def __init__(self, symbol: str, context: str | None = None):
        self.symbol = symbol
        self.context = context
        msg = f"unknown phoneme symbol {symbol!r}"
        if context:
            msg += f" in {context}"
        super().__init__(msg)

    def __str__(self) -> str:
        return self.args[0]


class MajorClass(str, enum.Enum):
    VOCOID = "V"
    CONTOID = "C"


def normalize_symbol(symbol: str) -> str:
    """NFC-normalize an IPA symbol and drop affricate tie bars."""
    symbol = unicodedata.normalize("NFC", symbol.strip())
    for tie in _TIE_BARS:
        symbol = symbol.replace(tie, "")
    return symbol


@dataclass(frozen=True)
class Phoneme:
    symbol: str
    major_class: MajorClass
    features: tuple[str, str]

    def __post_init__(self):
        object.__setattr__(self, "symbol", normalize_symbol(self.symbol))
        object.__setattr__(self, "major_class", MajorClass(self.major_class))
        if not self.symbol:
            raise InventoryError("empty phoneme symbol")
        if len(self.features) != 2:
            raise InventoryError(f"{self.symbol}: features must be a pair")
        first, second = self.features
        if self.major_class is MajorClass.VOCOID:
            ok = first in ADVANCEMENTS and second in HEIGHTS
        else:
            ok = first in PLACES and second in MANNERS
        if not ok:
            raise InventoryError(
                f"{self.symbol}: features {self.features} do not fit a "
                f"{self.major_class.name.lower()}"
            )

    @property
    def is_vocoid(self) -> bool:
        return self.major_class is MajorClass.VOCOID


class PhonemeInventory(Mapping[str, Phoneme]):
    """Immutable symbol -> :class:`Phoneme` lookup.

    Symbols are unique after normalization; constructing an inventory with
    a duplicate raises :class:`InventoryError`.
    """

    __slots__ = ("_index", "_order")

    def __init__(self, phonemes: Iterable[Phoneme]):
        index: dict[str, Phoneme] = {}
        for ph in phonemes:
            if ph.symbol in index:
                raise InventoryError(f"duplicate phoneme symbol {ph.symbol!r}")
            index[ph.symbol] = ph
        if not index:
            raise InventoryError("inventory is empty")
        self._index = index
        self._order = tuple(index)

    def __getitem__(self, symbol: str) -> Phoneme:
        try:
            return self._index[symbol]
        except KeyError:
            pass
        try:
            return self._index[normalize_symbol(symbol)]
        except KeyError:
            raise UnknownSymbolError(symbol) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._order)

    def __len__(self) -> int:
        return len(self._order)

    def __contains__(self, symbol: object) -> bool:
        if not isinstance(symbol, str):
            return False
        return symbol in self._index or normalize_symbol(symbol) in self._index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhonemeInventory):
            return NotImplemented
        return self._index == other._index

    def __hash__(self) -> int:
        return hash(frozenset(self._index.values()))

    def __repr__(self) -> str:
        return (
            f"PhonemeInventory({len(self.contoids)} contoids, "
            f"{len(self.vocoids)} vocoids)"
        )

    @property
    def phonemes(self) -> tuple[Phoneme, ...]:
        return tuple(self._index[s] for s in self._order)

    @property
    def vocoids(self) -> tuple[str, ...]:
        return tuple(s for s in self._order if self._index[s].is_vocoid)

    @property
    def contoids(self) -> tuple[str, ...]:
        return tuple(s for s in self._order if not self._index[s].is_vocoid)

    def classify(self, symbol: str, context: str | None = None) -> MajorClass:
        """Return the major class of ``symbol``.

        ``context`` is only used to make the error message point at the
        offending position (e.g. a sentence id or word).
        """
        ph = self._index.get(symbol)
        if ph is None:
            ph = self._index.get(normalize_symbol(symbol))
        if ph is None:
            raise UnknownSymbolError(symbol, context)
        return ph.major_class

    def is_vocoid(self, symbol: str) -> bool:
        return self.classify(symbol) is MajorClass.VOCOID

    def to_tsv(self) -> str:
        lines = ["# symbol\tclass\tfeature1\tfeature2"]
        for ph in self.phonemes:
            cls = "vocoid" if ph.is_vocoid else "contoid"
            lines.append("\t".join((ph.symbol, cls, *ph.features)))
        return "\n".join(lines) + "\n"


def _parse_rows(lines: Iterable[str], source: str) -> list[Phoneme]:
    phonemes = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise InventoryError(
                f"{source}:{lineno}: expected 4 tab-separated columns, got {len(cols)}"
            )
        symbol, cls, f1, f2 = (c.strip() for c in cols)
        cls_key = cls.lower()
        if cls_key in ("vocoid", "v"):
            major = MajorClass.VOCOID
        elif cls_key in ("contoid", "c"):
            major = MajorClass.CONTOID
        else:
            raise InventoryError(f"{source}:{lineno}: unknown class {cls!r}")
        try:
            phonemes.append(Phoneme(symbol, major, (f1.lower(), f2.lower())))
        except InventoryError as exc:
            raise InventoryError(f"{source}:{lineno}: {exc}") from None
    return phonemes


def load_inventory(path: str | Path) -> PhonemeInventory:
    """Load an inventory override file (UTF-8, tab-separated)."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        rows = _parse_rows(fh, str(path))
    try:
        return PhonemeInventory(rows)
    except InventoryError as exc:
        raise InventoryError(f"{path}: {exc}") from None


@functools.lru_cache(maxsize=None)
def default_inventory() -> PhonemeInventory:
    """The 31-phoneme Sao Paulo inventory (21 contoids, 10 vocoids)."""
    text = (
        resources.files("phonorich.data")
        .joinpath("sao_paulo_inventory.tsv")
        .read_text(encoding="utf-8")
    )
    return PhonemeInventory(_parse_rows(text.splitlines(), "sao_paulo_inventory.tsv"))


def classify(symbol: str, inventory: PhonemeInventory | None = None) -> MajorClass:
    return (inventory or default_inventory()).classify(symbol)
