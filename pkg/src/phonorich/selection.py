"""Greedy batch selection of phonetically rich sentences.

The selection runs in two phases over a stream of transcribed candidates:

1. a phoneme-coverage pass that takes, in stream order, any sentence that
   raises a phoneme still below ``phoneme_min_count``;
2. greedy batches: every sentence in a batch is scored by the number of
   triphones it would add to the inventory (per vocoid/contoid category),
   per-category and overall thresholds are set at a quantile of the batch
   scores, and sentences are then visited best-first and accepted when their
   contribution, re-scored against the live inventory, still meets the
   thresholds.

Sentence-type quotas are hard caps against ``target + reserve``; selection
stops once that many sentences are accepted. Sentences accepted after the
first ``target_sentences`` are flagged as reserve.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field, fields
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .g2p import Transcription
from .ingest import SentenceRecord, SentenceType
from .inventory import PhonemeInventory
from .triphone import CATEGORIES, Triphone, TriphoneCategory, TriphoneInventory, extract

logger = logging.getLogger(__name__)

__all__ = [
    "Candidate",
    "SelectionConfig",
    "SelectionState",
    "TraceEntry",
    "Thresholds",
    "SelectedCorpus",
    "CoverageUnreachableWarning",
    "EmptyBatchError",
    "RARE_BOOST_WEIGHTS",
    "DEFAULT_VETO_PATTERNS",
    "PostfilterStats",
    "make_candidate",
    "is_eligible",
    "phoneme_coverage_pass",
    "score_contribution",
    "compute_thresholds",
    "select_batch",
    "run_selection",
    "phonotactic_postfilter",
]

DEFAULT_QUOTAS = {
    SentenceType.DECLARATIVE: 0.6,
    SentenceType.INTERROGATIVE: 0.3,
    SentenceType.EXCLAMATIVE: 0.1,
}

RARE_BOOST_WEIGHTS = {c: (2.0 if c in (TriphoneCategory.VVV, TriphoneCategory.CCC) else 1.0) for c in CATEGORIES}


class CoverageUnreachableWarning(UserWarning):
    """The candidate stream ran out before every phoneme reached its minimum."""

    def __init__(self, missing: Sequence[str]):
        self.missing = tuple(missing)
        super().__init__(
            "phoneme coverage unreachable; below minimum: " + " ".join(f"/{p}/" for p in self.missing)
        )


class EmptyBatchError(ValueError):
    pass


@dataclass(frozen=True)
class Candidate:
    """A transcribed sentence ready for selection."""

    id: str
    text: str
    sentence_type: SentenceType
    phonemes: tuple[str, ...]
    triphones: tuple[Triphone, ...]
    word_count: int
    source: str = ""
    syllable_count: int = 0

    @property
    def triphone_set(self) -> frozenset[Triphone]:
        return frozenset(self.triphones)


def make_candidate(
    record: SentenceRecord, transcription: Transcription, inventory: PhonemeInventory | None = None
) -> Candidate:
    return Candidate(
        id=record.id,
        text=record.text,
        sentence_type=record.sentence_type,
        phonemes=transcription.phonemes,
        triphones=tuple(extract(transcription.phonemes, inventory)),
        word_count=record.word_count,
        source=record.source,
        syllable_count=transcription.syllable_count,
    )


@dataclass
class SelectionConfig:
    batch_size: int = 5000
    phoneme_min_count: int = 5
    type_quotas: dict[SentenceType, float] = field(default_factory=lambda: dict(DEFAULT_QUOTAS))
    word_bounds: tuple[int, int] = (10, 20)
    target_sentences: int = 10000
    reserve_sentences: int = 2000
    threshold_percentile: float = 0.5
    category_weights: dict[TriphoneCategory, float] = field(default_factory=lambda: dict.fromkeys(CATEGORIES, 1.0))
    # optional per-source share of target + reserve; sources not listed are uncapped
    context_quotas: dict[str, float] | None = None
    # optional stop once the selected set holds this many triphone tokens
    triphone_budget: int | None = None
    # after the stream is exhausted short of target, revisit rejected sentences
    backfill: bool = True

    def __post_init__(self):
        self.type_quotas = {SentenceType(k): float(v) for k, v in self.type_quotas.items()}
        weights = dict.fromkeys(CATEGORIES, 1.0)
        weights.update({TriphoneCategory(k): float(v) for k, v in self.category_weights.items()})
        self.category_weights = weights
        self.word_bounds = tuple(int(x) for x in self.word_bounds)
        if set(self.type_quotas) != set(SentenceType):
            raise ValueError("type_quotas must give a share for every sentence type")
        if any(q < 0 for q in self.type_quotas.values()):
            raise ValueError("type_quotas must be nonnegative")
        if not math.isclose(sum(self.type_quotas.values()), 1.0, abs_tol=1e-9):
            raise ValueError("type_quotas must sum to 1")
        if len(self.word_bounds) != 2 or self.word_bounds[0] > self.word_bounds[1]:
            raise ValueError("word_bounds must be (min, max) with min <= max")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.phoneme_min_count < 0:
            raise ValueError("phoneme_min_count must be nonnegative")
        if self.target_sentences < 0 or self.reserve_sentences < 0:
            raise ValueError("target_sentences and reserve_sentences must be nonnegative")
        if not 0.0 <= self.threshold_percentile < 1.0:
            raise ValueError("threshold_percentile must lie in [0, 1)")
        if any(w < 0 for w in self.category_weights.values()):
            raise ValueError("category_weights must be nonnegative")
        if self.context_quotas is not None:
            self.context_quotas = {str(k): float(v) for k, v in self.context_quotas.items()}

    @property
    def capacity(self) -> int:
        return self.target_sentences + self.reserve_sentences

    def type_cap(self, sentence_type: SentenceType) -> int:
        return math.floor(self.type_quotas[sentence_type] * self.capacity + 1e-9)

    def context_cap(self, source: str) -> int | None:
        if not self.context_quotas or source not in self.context_quotas:
            return None
        return math.floor(self.context_quotas[source] * self.capacity + 1e-9)

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("type_quotas", "category_weights"):
                v = {k.value: val for k, val in v.items()}
            elif f.name == "word_bounds":
                v = list(v)
            d[f.name] = v
        return d

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SelectionConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known - {"category_preset"}
        if unknown:
            raise ValueError(f"unknown selection config keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in data.items() if k in known}
        preset = data.get("category_preset")
        if preset is not None:
            if preset != "rare_boost":
                raise ValueError(f"unknown category_preset {preset!r}")
            weights = dict(RARE_BOOST_WEIGHTS)
            weights.update({TriphoneCategory(k): v for k, v in kwargs.get("category_weights", {}).items()})
            kwargs["category_weights"] = weights
        return cls(**kwargs)


@dataclass
class TraceEntry:
    index: int
    id: str
    sentence_type: SentenceType
    phase: str
    reserve: bool
    new_by_category: dict[TriphoneCategory, int]
    score: float
    distinct_after: int
    total_after: int

    @property
    def new_total(self) -> int:
        return sum(self.new_by_category.values())

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "id": self.id,
            "sentence_type": self.sentence_type.value,
            "phase": self.phase,
            "reserve": self.reserve,
            "new_triphones_by_category": {c.value: n for c, n in self.new_by_category.items()},
            "new_total": self.new_total,
            "score": self.score,
            "distinct_after": self.distinct_after,
            "total_after": self.total_after,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TraceEntry":
        return cls(
            index=int(d["index"]),
            id=str(d["id"]),
            sentence_type=SentenceType(d["sentence_type"]),
            phase=d["phase"],
            reserve=bool(d["reserve"]),
            new_by_category={TriphoneCategory(k): int(v) for k, v in d["new_triphones_by_category"].items()},
            score=float(d["score"]),
            distinct_after=int(d["distinct_after"]),
            total_after=int(d["total_after"]),
        )


@dataclass
class SelectionState:
    inventory: TriphoneInventory
    selected_ids: list[str] = field(default_factory=list)
    per_type_counts: Counter = field(default_factory=Counter)
    per_source_counts: Counter = field(default_factory=Counter)
    phoneme_counts: Counter = field(default_factory=Counter)
    trace: list[TraceEntry] = field(default_factory=list)
    missing_phonemes: tuple[str, ...] = ()
    selected: list[Candidate] = field(default_factory=list, repr=False)
    _selected_set: set = field(default_factory=set, repr=False)

    @classmethod
    def empty(cls, inventory: PhonemeInventory | None = None) -> "SelectionState":
        return cls(TriphoneInventory(inventory))

    @property
    def phoneme_inventory(self) -> PhonemeInventory:
        return self.inventory.phoneme_inventory

    @property
    def n_selected(self) -> int:
        return len(self.selected_ids)

    def is_selected(self, cand_id: str) -> bool:
        return cand_id in self._selected_set

    def has_room(self, cand: Candidate, cfg: SelectionConfig) -> bool:
        """Capacity, type quota, context quota and triphone budget checks."""
        if self.n_selected >= cfg.capacity:
            return False
        if cfg.triphone_budget is not None and self.inventory.total >= cfg.triphone_budget:
            return False
        if self.per_type_counts[cand.sentence_type] + 1 > cfg.type_cap(cand.sentence_type):
            return False
        cap = cfg.context_cap(cand.source)
        if cap is not None and self.per_source_counts[cand.source] + 1 > cap:
            return False
        return True

    def is_full(self, cfg: SelectionConfig) -> bool:
        if self.n_selected >= cfg.capacity:
            return True
        return cfg.triphone_budget is not None and self.inventory.total >= cfg.triphone_budget

    def accept(self, cand: Candidate, cfg: SelectionConfig, phase: str, score: float = 0.0) -> TraceEntry:
        new = self.inventory.add(cand.triphones)
        reserve = self.n_selected >= cfg.target_sentences
        self.selected_ids.append(cand.id)
        self.selected.append(cand)
        self._selected_set.add(cand.id)
        self.per_type_counts[cand.sentence_type] += 1
        self.per_source_counts[cand.source] += 1
        self.phoneme_counts.update(cand.phonemes)
        entry = TraceEntry(
            index=len(self.trace),
            id=cand.id,
            sentence_type=cand.sentence_type,
            phase=phase,
            reserve=reserve,
            new_by_category=new,
            score=score,
            distinct_after=self.inventory.distinct,
            total_after=self.inventory.total,
        )
        self.trace.append(entry)
        return entry

    def uncovered(self, cfg: SelectionConfig) -> list[str]:
        return [p for p in self.phoneme_inventory if self.phoneme_counts[p] < cfg.phoneme_min_count]


@dataclass(frozen=True)
class Thresholds:
    per_category: dict[TriphoneCategory, float]
    score: float

    def met_by(self, new: Mapping[TriphoneCategory, int], score: float) -> bool:
        return score >= self.score and all(new[c] >= t for c, t in self.per_category.items())


@dataclass
class SelectedCorpus:
    candidates: list[Candidate]
    state: SelectionState
    shortfall: int = 0

    @property
    def trace(self) -> list[TraceEntry]:
        return self.state.trace

    def records(self) -> Iterator[dict]:
        for cand, entry in zip(self.candidates, self.state.trace):
            yield {
                "id": cand.id,
                "text": cand.text,
                "sentence_type": cand.sentence_type.value,
                "phonemes": " ".join(cand.phonemes),
                "new_triphones_by_category": {c.value: n for c, n in entry.new_by_category.items()},
                "reserve_flag": entry.reserve,
            }

    def write(self, fh: IO[str]) -> None:
        for rec in self.records():
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    def write_trace(self, fh: IO[str]) -> None:
        for entry in self.state.trace:
            fh.write(json.dumps(entry.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


# -- operations -------------------------------------------------------------


def is_eligible(cand: Candidate, cfg: SelectionConfig) -> bool:
    lo, hi = cfg.word_bounds
    return lo <= cand.word_count <= hi and len(cand.triphones) > 0


def phoneme_coverage_pass(
    candidates: Iterable[Candidate],
    state: SelectionState,
    cfg: SelectionConfig,
    skipped: list[Candidate] | None = None,
) -> SelectionState:
    """Accept sentences, in stream order, that raise an under-covered phoneme.

    Stops as soon as every phoneme reaches ``cfg.phoneme_min_count``
    without consuming further items from ``candidates``, so an iterator
    passed in can be resumed by the caller. Rejected candidates are appended
    to ``skipped`` when given. Emits :class:`CoverageUnreachableWarning` if
    the stream (or the selection capacity) runs out first.
    """
    need = {p for p in state.phoneme_inventory if state.phoneme_counts[p] < cfg.phoneme_min_count}
    it = iter(candidates)
    while need and not state.is_full(cfg):
        cand = next(it, None)
        if cand is None:
            break
        if state.is_selected(cand.id):
            continue
        if need.isdisjoint(cand.phonemes) or not state.has_room(cand, cfg):
            if skipped is not None:
                skipped.append(cand)
            continue
        new, score = score_contribution(cand.triphones, state, cfg)
        state.accept(cand, cfg, "coverage", score)
        need = {p for p in need if state.phoneme_counts[p] < cfg.phoneme_min_count}
    missing = tuple(p for p in state.phoneme_inventory if p in need)
    state.missing_phonemes = missing
    if missing:
        logger.warning("phoneme coverage unreachable for: %s", " ".join(missing))
        warnings.warn(CoverageUnreachableWarning(missing), stacklevel=2)
    return state


def score_contribution(
    sentence_triphones: Iterable[Triphone], state: SelectionState, cfg: SelectionConfig
) -> tuple[dict[TriphoneCategory, int], float]:
    """New triphones per category (deduplicated) and their weighted sum.

    Pure: ``state`` is not modified.
    """
    new = state.inventory.new_by_category(sentence_triphones)
    score = float(sum(cfg.category_weights[c] * n for c, n in new.items()))
    return new, score


def compute_thresholds(
    batch_scores: Sequence[tuple[Mapping[TriphoneCategory, int], float]], cfg: SelectionConfig
) -> Thresholds:
    """Per-category and overall acceptance thresholds for one batch.

    Each threshold is the ``threshold_percentile`` quantile of the batch
    distribution, taking the order statistic at ``floor(p * (n - 1))``.
    """
    if not batch_scores:
        raise EmptyBatchError("cannot compute thresholds of an empty batch")
    p = cfg.threshold_percentile
    per_cat = np.array([[new[c] for c in CATEGORIES] for new, _ in batch_scores], dtype=float)
    scores = np.array([s for _, s in batch_scores], dtype=float)
    cat_q = np.quantile(per_cat, p, axis=0, method="lower")
    return Thresholds(
        per_category={c: float(q) for c, q in zip(CATEGORIES, cat_q)},
        score=float(np.quantile(scores, p, method="lower")),
    )


def select_batch(batch: Sequence[Candidate], state: SelectionState, cfg: SelectionConfig) -> SelectionState:
    """One greedy round over ``batch`` (steps: score, threshold, accept)."""
    batch = [c for c in batch if not state.is_selected(c.id)]
    if not batch or state.is_full(cfg):
        return state
    scored = [score_contribution(c.triphones, state, cfg) for c in batch]
    thresholds = compute_thresholds(scored, cfg)
    order = sorted(range(len(batch)), key=lambda i: (-scored[i][1], batch[i].id))
    for i in order:
        if state.is_full(cfg):
            break
        cand = batch[i]
        if not state.has_room(cand, cfg):
            continue
        new, score = score_contribution(cand.triphones, state, cfg)
        if score > 0 and thresholds.met_by(new, score):
            state.accept(cand, cfg, "greedy", score)
    return state


def _backfill(pool: list[Candidate], state: SelectionState, cfg: SelectionConfig) -> None:
    """Best-first sweep over previously rejected candidates, no thresholds.

    Lazy greedy: contributions only shrink as the inventory grows, so a
    stale score is an upper bound and the heap top is re-scored before use.
    """
    heap = []
    for cand in pool:
        if not state.is_selected(cand.id):
            _, score = score_contribution(cand.triphones, state, cfg)
            if score > 0:
                heap.append((-score, cand.id, cand))
    heapq.heapify(heap)
    while heap and not state.is_full(cfg):
        neg_stale, cid, cand = heapq.heappop(heap)
        if state.is_selected(cid) or not state.has_room(cand, cfg):
            continue
        _, score = score_contribution(cand.triphones, state, cfg)
        if score <= 0:
            continue
        if -score != neg_stale:
            heapq.heappush(heap, (-score, cid, cand))
            continue
        state.accept(cand, cfg, "backfill", score)


def run_selection(
    corpus: Iterable[Candidate],
    cfg: SelectionConfig | None = None,
    inventory: PhonemeInventory | None = None,
) -> SelectedCorpus:
    """Full selection: eligibility filter, coverage pass, greedy batches."""
    cfg = cfg or SelectionConfig()
    state = SelectionState.empty(inventory)
    stream = (c for c in corpus if is_eligible(c, cfg))
    skipped: list[Candidate] = []
    phoneme_coverage_pass(stream, state, cfg, skipped)
    remaining = itertools.chain(skipped, stream)
    pool: list[Candidate] = []
    while not state.is_full(cfg):
        batch = list(itertools.islice(remaining, cfg.batch_size))
        if not batch:
            break
        select_batch(batch, state, cfg)
        if cfg.backfill:
            pool.extend(c for c in batch if not state.is_selected(c.id))
        logger.info(
            "batch done: selected=%d distinct=%d total=%d",
            state.n_selected, state.inventory.distinct, state.inventory.total,
        )
    if cfg.backfill and state.n_selected < cfg.target_sentences:
        _backfill(pool, state, cfg)
    shortfall = max(0, cfg.target_sentences - state.n_selected)
    if shortfall and cfg.triphone_budget is None:
        logger.warning("selection short of target by %d sentences", shortfall)
    return SelectedCorpus(list(state.selected), state, shortfall)


# -- phonotactic post-filter --------------------------------------------------

DEFAULT_VETO_PATTERNS: tuple[str, ...] = (
    r"[kwyKWY]",
    r"(?i)sh|th|ph|ck|oo|ee",
    r"(?i)bb|dd|ff|gg|ll|mm|nn|pp|tt|vv|zz",
    r"(?i)[bcdfgjpqtv]$",
    r"^[A-ZÁÉÍÓÚÂÊÔÃÕÇ]{2,}$",
)


@dataclass
class PostfilterStats:
    seen: int = 0
    kept: int = 0
    dropped: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {"seen": self.seen, "kept": self.kept, "dropped": dict(sorted(self.dropped.items()))}


def phonotactic_postfilter(
    records: Iterable[tuple[SentenceRecord, Transcription]],
    veto_patterns: Sequence[str] = DEFAULT_VETO_PATTERNS,
    stats: PostfilterStats | None = None,
) -> Iterator[tuple[SentenceRecord, Transcription]]:
    """Drop sentences carrying foreign or non-transcribable material.

    The first matching reason is recorded per dropped sentence:
    ``foreign-pattern`` (a token matches a veto pattern), ``proper-noun``
    (a capitalized, non-initial token failed transcription) or
    ``untranscribable`` (any other failed token).
    """
    stats = stats if stats is not None else PostfilterStats()
    vetoes = [re.compile(p) for p in veto_patterns]
    for record, transcription in records:
        stats.seen += 1
        reason = None
        if any(v.search(tok) for tok in record.tokens for v in vetoes):
            reason = "foreign-pattern"
        elif transcription.failed_tokens:
            failed = set(transcription.failed_tokens)
            if any(tok in failed and tok[:1].isupper() for tok in record.tokens[1:]):
                reason = "proper-noun"
            else:
                reason = "untranscribable"
        if reason is not None:
            stats.dropped[reason] += 1
            continue
        stats.kept += 1
        yield record, transcription
