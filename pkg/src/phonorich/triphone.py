"""Triphone extraction, vocoid/contoid categorization and the running
inventory of observed triphones."""

from __future__ import annotations

import enum
import json
from collections import Counter
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, NamedTuple, Sequence

from .inventory import PhonemeInventory, UnknownSymbolError, default_inventory

__all__ = [
    "Triphone",
    "TriphoneCategory",
    "CATEGORIES",
    "TriphoneInventory",
    "extract",
    "categorize",
    "add",
    "merge",
    "empty_counts",
]


class Triphone(NamedTuple):
    p1: str
    p2: str
    p3: str

    def __str__(self) -> str:
        return f"/{self.p1}{self.p2}{self.p3}/"


class TriphoneCategory(str, enum.Enum):
    VVV = "VVV"
    VVC = "VVC"
    VCV = "VCV"
    VCC = "VCC"
    CVV = "CVV"
    CVC = "CVC"
    CCV = "CCV"
    CCC = "CCC"


CATEGORIES: tuple[TriphoneCategory, ...] = tuple(TriphoneCategory)


def empty_counts() -> dict[TriphoneCategory, int]:
    return dict.fromkeys(CATEGORIES, 0)


def extract(phonemes: Sequence[str], inventory: PhonemeInventory | None = None) -> list[Triphone]:
    """Slide a width-3 window over a sentence-level phoneme stream.

    Every symbol is checked against ``inventory``; an unknown one raises
    :class:`~phonorich.inventory.UnknownSymbolError` naming its position.
    """
    inv = inventory or default_inventory()
    canon = list(phonemes)
    for i, sym in enumerate(canon):
        if sym not in inv:
            raise UnknownSymbolError(sym, f"phoneme stream at position {i}")
        # spelling variants (tie bars, decomposed diacritics) map to one key
        canon[i] = inv[sym].symbol
    return [Triphone(*canon[i : i + 3]) for i in range(len(canon) - 2)]


def categorize(t: Sequence[str], inventory: PhonemeInventory | None = None) -> TriphoneCategory:
    inv = inventory or default_inventory()
    return TriphoneCategory(
        "".join(inv.classify(sym, f"triphone {'/' + ''.join(t) + '/'}").value for sym in t)
    )


class TriphoneInventory:
    """Occurrence counts of triphones with per-category bookkeeping.

    ``per_category[c]`` is a ``(distinct, total)`` pair. Mutation is
    single-writer; build one inventory per shard and :func:`merge` them.
    """

    def __init__(self, inventory: PhonemeInventory | None = None):
        self.phoneme_inventory = inventory or default_inventory()
        self.counts: Counter[Triphone] = Counter()
        self._distinct = empty_counts()
        self._total = empty_counts()
        self._category_cache: dict[Triphone, TriphoneCategory] = {}

    def category(self, t: Triphone) -> TriphoneCategory:
        cat = self._category_cache.get(t)
        if cat is None:
            cat = categorize(t, self.phoneme_inventory)
            self._category_cache[t] = cat
        return cat

    @property
    def per_category(self) -> dict[TriphoneCategory, tuple[int, int]]:
        return {c: (self._distinct[c], self._total[c]) for c in CATEGORIES}

    @property
    def distinct(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self._total.values())

    def distinct_in(self, cat: TriphoneCategory) -> int:
        return self._distinct[cat]

    def total_in(self, cat: TriphoneCategory) -> int:
        return self._total[cat]

    def __contains__(self, t: object) -> bool:
        return t in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TriphoneInventory):
            return NotImplemented
        return +self.counts == +other.counts

    def __repr__(self) -> str:
        return f"TriphoneInventory(distinct={self.distinct}, total={self.total})"

    def new_by_category(self, ts: Iterable[Triphone]) -> dict[TriphoneCategory, int]:
        """Per-category count of unseen triphones in ``ts`` (each counted once)."""
        new = empty_counts()
        for t in set(ts):
            if t not in self.counts:
                new[self.category(t)] += 1
        return new

    def add(self, ts: Iterable[Triphone]) -> dict[TriphoneCategory, int]:
        """Count ``ts`` into the inventory and return the new-triphone
        contribution per category, measured against the state before the
        update."""
        ts = list(ts)
        contribution = self.new_by_category(ts)
        for t in ts:
            cat = self.category(t)
            if self.counts[t] == 0:
                self._distinct[cat] += 1
            self.counts[t] += 1
            self._total[cat] += 1
        return contribution

    def update_counts(self, counts: Mapping[Triphone, int]) -> None:
        for t, n in counts.items():
            if n <= 0:
                continue
            cat = self.category(t)
            if self.counts[t] == 0:
                self._distinct[cat] += 1
            self.counts[t] += n
            self._total[cat] += n

    def copy(self) -> "TriphoneInventory":
        new = TriphoneInventory(self.phoneme_inventory)
        new.counts = Counter(self.counts)
        new._distinct = dict(self._distinct)
        new._total = dict(self._total)
        new._category_cache = self._category_cache
        return new

    def check(self) -> None:
        """Recount per-category bookkeeping from ``counts`` and compare."""
        distinct = empty_counts()
        total = empty_counts()
        for t, n in self.counts.items():
            cat = categorize(t, self.phoneme_inventory)
            distinct[cat] += 1
            total[cat] += n
        assert distinct == self._distinct, (distinct, self._distinct)
        assert total == self._total, (total, self._total)

    # -- serialization ---------------------------------------------------
    def records(self) -> Iterator[dict]:
        for t in sorted(self.counts):
            yield {
                "p1": t.p1,
                "p2": t.p2,
                "p3": t.p3,
                "category": self.category(t).value,
                "count": self.counts[t],
            }

    def dump(self, fh: IO[str]) -> None:
        for rec in self.records():
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            self.dump(fh)

    @classmethod
    def load(cls, source: str | Path | IO[str], inventory: PhonemeInventory | None = None) -> "TriphoneInventory":
        if isinstance(source, (str, Path)):
            with open(source, encoding="utf-8") as fh:
                return cls.load(fh, inventory)
        inv = cls(inventory)
        counts: dict[Triphone, int] = {}
        for lineno, line in enumerate(source, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                t = Triphone(rec["p1"], rec["p2"], rec["p3"])
                n = int(rec["count"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"line {lineno}: bad triphone record: {exc}") from None
            if "category" in rec and inv.category(t).value != rec["category"]:
                raise ValueError(f"line {lineno}: category mismatch for {t}")
            counts[t] = counts.get(t, 0) + n
        inv.update_counts(counts)
        return inv


def add(inv: TriphoneInventory, ts: Iterable[Triphone]) -> tuple[TriphoneInventory, dict[TriphoneCategory, int]]:
    """Functional spelling of :meth:`TriphoneInventory.add` (mutates ``inv``)."""
    contribution = inv.add(ts)
    return inv, contribution


def merge(a: TriphoneInventory, b: TriphoneInventory) -> TriphoneInventory:
    if a.phoneme_inventory != b.phoneme_inventory:
        raise ValueError("cannot merge inventories built on different phoneme inventories")
    out = a.copy()
    out._category_cache = dict(a._category_cache)
    out.update_counts(b.counts)
    return out
