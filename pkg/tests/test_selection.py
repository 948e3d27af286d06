import io
import math
import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import synthetic_candidates
from reference_selection import CATS, category, compare_with_reference, lower_quantile
from phonorich.g2p import transcribe_sentence, transcribe_tokens
from phonorich.ingest import SentenceRecord, SentenceType, segment, RawDocument
from phonorich.inventory import default_inventory
from phonorich.selection import (
    RARE_BOOST_WEIGHTS,
    Candidate,
    CoverageUnreachableWarning,
    EmptyBatchError,
    PostfilterStats,
    SelectionConfig,
    SelectionState,
    TraceEntry,
    compute_thresholds,
    phoneme_coverage_pass,
    phonotactic_postfilter,
    run_selection,
    score_contribution,
    select_batch,
)
from phonorich.analyze import random_baseline
from phonorich.triphone import CATEGORIES, TriphoneCategory, TriphoneInventory, extract

ALL_DECL = {"declarative": 1.0, "interrogative": 0.0, "exclamative": 0.0}


def loose(**kw) -> SelectionConfig:
    base = dict(word_bounds=(1, 100), phoneme_min_count=0, type_quotas=ALL_DECL)
    base.update(kw)
    return SelectionConfig(**base)


def replace(c: Candidate, **kw) -> Candidate:
    return Candidate(**{**c.__dict__, **kw})


def check_invariants(result, cfg: SelectionConfig):
    """Invariants every selection run must satisfy."""
    state = result.state
    inv = state.inventory
    # trace replay: monotone coverage, quota bounds, consistent counts
    replay = TriphoneInventory()
    per_type = Counter()
    by_id = {c.id: c for c in result.candidates}
    prev = dict.fromkeys(CATEGORIES, 0)
    assert [e.id for e in state.trace] == state.selected_ids == [c.id for c in result.candidates]
    coverage_done = False
    for i, entry in enumerate(state.trace):
        assert entry.index == i
        cand = by_id[entry.id]
        new = replay.add(cand.triphones)
        assert new == entry.new_by_category
        for c in CATEGORIES:
            assert replay.distinct_in(c) >= prev[c]
            prev[c] = replay.distinct_in(c)
        per_type[cand.sentence_type] += 1
        for t in SentenceType:
            assert per_type[t] <= cfg.type_quotas[t] * cfg.capacity + 1e-9
        assert entry.distinct_after == replay.distinct and entry.total_after == replay.total
        assert entry.reserve == (i >= cfg.target_sentences)
        if entry.phase != "coverage":
            coverage_done = True
            assert entry.score > 0
        else:
            assert not coverage_done
    assert replay == inv and replay.per_category == inv.per_category
    assert state.per_type_counts == per_type
    assert state.phoneme_counts == Counter(p for c in result.candidates for p in c.phonemes)
    assert state.n_selected <= cfg.capacity
    inv.check()


# -- configuration --------------------------------------------------------------


def test_config_defaults():
    cfg = SelectionConfig()
    assert cfg.batch_size == 5000 and cfg.word_bounds == (10, 20)
    assert cfg.target_sentences == 10000 and cfg.reserve_sentences == 2000
    assert cfg.type_cap(SentenceType.DECLARATIVE) == 7200
    assert cfg.type_cap(SentenceType.EXCLAMATIVE) == 1200


@pytest.mark.parametrize(
    "kw",
    [
        {"type_quotas": {"declarative": 0.5, "interrogative": 0.3, "exclamative": 0.1}},
        {"word_bounds": (20, 10)},
        {"batch_size": 0},
        {"threshold_percentile": 1.0},
        {"category_weights": {"VVV": -1}},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SelectionConfig(**kw)


def test_config_rare_boost_preset():
    cfg = SelectionConfig.from_mapping({"category_preset": "rare_boost"})
    assert cfg.category_weights == RARE_BOOST_WEIGHTS
    assert cfg.category_weights[TriphoneCategory.VVV] == 2.0
    with pytest.raises(ValueError):
        SelectionConfig.from_mapping({"bogus": 1})


def test_config_round_trip():
    cfg = SelectionConfig(target_sentences=7, context_quotas={"news": 0.5})
    assert SelectionConfig.from_mapping(cfg.to_dict()) == cfg


# -- phoneme coverage pass --------------------------------------------------------


def test_coverage_pass_on_sample_matches_hand_simulation(sample_candidates):
    cfg = loose(phoneme_min_count=1, target_sentences=100)
    # oracle: walk the stream, keep a sentence iff it brings a phoneme still at 0
    counts = Counter()
    expected = []
    for c in sample_candidates:
        if any(counts[p] < 1 for p in set(c.phonemes)):
            expected.append(c.id)
            counts.update(c.phonemes)
    state = SelectionState.empty()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageUnreachableWarning)
        phoneme_coverage_pass(sample_candidates, state, cfg)
    assert state.selected_ids == expected
    assert len(expected) < len(sample_candidates)  # some sentences skipped
    occurring = {p for c in sample_candidates for p in c.phonemes}
    assert all(state.phoneme_counts[p] >= 1 for p in occurring)


def test_coverage_pass_empty_stream_warns_all_31():
    state = SelectionState.empty()
    with pytest.warns(CoverageUnreachableWarning) as rec:
        phoneme_coverage_pass([], state, loose(phoneme_min_count=1))
    assert set(rec[0].message.missing) == set(default_inventory())
    assert state.n_selected == 0


def test_coverage_pass_min_zero_accepts_nothing(sample_candidates):
    state = SelectionState.empty()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        phoneme_coverage_pass(sample_candidates, state, loose(phoneme_min_count=0))
    assert state.n_selected == 0


def test_coverage_pass_does_not_overconsume(small_candidates):
    it = iter(small_candidates * 20)
    state = SelectionState.empty()
    phoneme_coverage_pass(it, state, loose(phoneme_min_count=1, target_sentences=1000))
    assert state.missing_phonemes == ()
    assert len(list(it)) > 0


def test_coverage_pass_names_missing_phoneme(sample_candidates):
    with pytest.warns(CoverageUnreachableWarning, match="/ʎ/") as rec:
        run_selection(sample_candidates, loose(phoneme_min_count=1, target_sentences=50))
    assert "ʎ" in rec[0].message.missing


# -- scoring and thresholds -------------------------------------------------------------


def test_score_zero_when_all_seen(sample_candidates):
    state = SelectionState.empty()
    c = sample_candidates[1]
    state.inventory.add(c.triphones)
    new, score = score_contribution(c.triphones, state, loose())
    assert score == 0 and sum(new.values()) == 0


def test_ccc_example_from_empty_state(sample_candidates):
    c = next(c for c in sample_candidates if "extremo" in c.text)
    new, score = score_contribution(c.triphones, SelectionState.empty(), loose())
    assert new[TriphoneCategory.CCC] >= 1 and score == len(set(c.triphones))


@settings(max_examples=60)
@given(st.integers(0, 10_000))
def test_score_matches_set_difference(seed):
    rng = np.random.default_rng(seed)
    cands = synthetic_candidates(rng, 6, length=(3, 15))
    state = SelectionState.empty()
    for c in cands[:3]:
        state.inventory.add(c.triphones)
    weights = {c: float(rng.integers(0, 4)) for c in CATEGORIES}
    cfg = loose(category_weights=weights)
    seen = set(state.inventory.counts)
    for c in cands[3:]:
        new, score = score_contribution(c.triphones, state, cfg)
        oracle = Counter(category(t) for t in set(c.triphones) - seen)
        assert {k.value: v for k, v in new.items() if v} == dict(oracle)
        assert score == sum(weights[TriphoneCategory(k)] * v for k, v in oracle.items())


def test_thresholds_all_zero():
    zero = dict.fromkeys(CATEGORIES, 0)
    th = compute_thresholds([(zero, 0.0)] * 5, loose())
    assert th.score == 0 and set(th.per_category.values()) == {0}


def test_thresholds_p0_are_minima():
    rng = np.random.default_rng(1)
    batch = [({c: int(rng.integers(0, 9)) for c in CATEGORIES}, float(rng.integers(0, 50))) for _ in range(30)]
    th = compute_thresholds(batch, loose(threshold_percentile=0.0))
    assert th.score == min(s for _, s in batch)
    assert all(th.per_category[c] == min(n[c] for n, _ in batch) for c in CATEGORIES)


@pytest.mark.parametrize("p", [0.1, 0.25, 0.5, 0.75, 0.99])
def test_thresholds_match_sort_and_index(p):
    rng = np.random.default_rng(int(p * 100))
    batch = [({c: int(rng.integers(0, 20)) for c in CATEGORIES}, float(rng.integers(0, 100))) for _ in range(100)]
    th = compute_thresholds(batch, loose(threshold_percentile=p))
    assert th.score == lower_quantile([s for _, s in batch], p)
    for c in CATEGORIES:
        assert th.per_category[c] == lower_quantile([n[c] for n, _ in batch], p)


def test_thresholds_empty_batch():
    with pytest.raises(EmptyBatchError):
        compute_thresholds([], loose())


# -- select_batch -------------------------------------------------------------------


def test_three_copies_accept_one(sample_candidates):
    c = sample_candidates[0]
    batch = [replace(c, id=f"copy{i}") for i in range(3)]
    state = select_batch(batch, SelectionState.empty(), loose(threshold_percentile=0.0))
    assert state.selected_ids == ["copy0"]


def test_exclamative_quota_example():
    rng = np.random.default_rng(7)
    batch = synthetic_candidates(rng, 20, type_probs=(0.2, 0.2, 0.6))
    assert sum(c.sentence_type is SentenceType.EXCLAMATIVE for c in batch) > 2
    for reserve, cap in ((0, 1), (2, 1), (10, 2)):
        cfg = SelectionConfig(target_sentences=10, reserve_sentences=reserve, threshold_percentile=0.0)
        state = select_batch(batch, SelectionState.empty(), cfg)
        assert state.per_type_counts[SentenceType.EXCLAMATIVE] == cap
        assert state.n_selected <= 10 + reserve


@pytest.mark.parametrize("seed", range(25))
def test_select_batch_matches_reference(seed):
    ours, expected = compare_with_reference(seed)
    assert ours == expected


def test_select_batch_is_pure_in_order(sample_candidates):
    cfg = loose(threshold_percentile=0.25)
    a = select_batch(list(sample_candidates), SelectionState.empty(), cfg)
    b = select_batch(list(reversed(sample_candidates)), SelectionState.empty(), cfg)
    assert a.selected_ids == b.selected_ids


# -- run_selection ----------------------------------------------------------------------


def test_small_corpus_selects_every_contributing_sentence(small_candidates):
    cfg = SelectionConfig(word_bounds=(10, 20), phoneme_min_count=0, target_sentences=1000, reserve_sentences=0,
                          type_quotas={"declarative": 0.6, "interrogative": 0.3, "exclamative": 0.1})
    res = run_selection(small_candidates, cfg)
    assert set(res.state.selected_ids) == {c.id for c in small_candidates}
    assert res.shortfall == 1000 - len(small_candidates)
    check_invariants(res, cfg)


def test_run_is_deterministic(small_candidates):
    cfg = loose(phoneme_min_count=2, target_sentences=12, reserve_sentences=3, batch_size=7)
    outs = []
    for _ in range(2):
        res = run_selection(list(small_candidates), cfg)
        buf = io.StringIO()
        res.write(buf)
        res.write_trace(buf)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]


def test_reserve_flag_and_capacity():
    rng = np.random.default_rng(3)
    cands = synthetic_candidates(rng, 300)
    cfg = SelectionConfig(target_sentences=30, reserve_sentences=10, batch_size=60, phoneme_min_count=1)
    res = run_selection(cands, cfg)
    flags = [r["reserve_flag"] for r in res.records()]
    assert len(flags) == 40
    assert flags == [False] * 30 + [True] * 10
    check_invariants(res, cfg)


def test_trace_on_large_synthetic_corpus():
    rng = np.random.default_rng(11)
    cands = synthetic_candidates(rng, 10_000)
    cfg = SelectionConfig(target_sentences=1500, reserve_sentences=300, batch_size=1000)
    res = run_selection(cands, cfg)
    distinct = [e.distinct_after for e in res.trace]
    assert distinct == sorted(distinct)
    assert distinct[-1] == res.state.inventory.distinct
    check_invariants(res, cfg)


def test_triphone_budget_stops_selection():
    rng = np.random.default_rng(5)
    cands = synthetic_candidates(rng, 400)
    cfg = loose(target_sentences=10_000, triphone_budget=500, batch_size=100)
    res = run_selection(cands, cfg)
    inv = res.state.inventory
    assert inv.total >= 500
    assert inv.total - len(res.candidates[-1].triphones) < 500


def test_context_quota_caps_sources():
    rng = np.random.default_rng(9)
    a = [replace(c, source="a") for c in synthetic_candidates(rng, 100, prefix="a")]
    b = [replace(c, source="b") for c in synthetic_candidates(rng, 100, prefix="b")]
    cfg = loose(target_sentences=20, reserve_sentences=0, context_quotas={"a": 0.25}, threshold_percentile=0.0)
    res = run_selection(a + b, cfg)
    assert res.state.per_source_counts["a"] <= 5


def test_word_bounds_filter(sample_candidates):
    res = run_selection(sample_candidates, SelectionConfig(phoneme_min_count=0))
    expected = {c.id for c in sample_candidates if 10 <= c.word_count <= 20}
    assert len(expected) == 1
    assert {c.id for c in res.candidates} == expected


def test_greedy_beats_random_at_equal_budget():
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        cands = synthetic_candidates(rng, 200, length=(10, 40), skew=1.2)
        cfg = loose(target_sentences=40, reserve_sentences=0, batch_size=50)
        greedy = run_selection(cands, cfg).state.inventory
        rand = random_baseline([c.triphones for c in cands], greedy.total, seed)
        wins += greedy.distinct / greedy.total >= rand.distinct / rand.total
    assert wins >= 19


def test_trace_entry_round_trip(small_candidates):
    res = run_selection(small_candidates, loose(target_sentences=5))
    for e in res.trace:
        assert TraceEntry.from_dict(e.to_dict()) == e


# -- phonotactic post-filter -------------------------------------------------------


def _pair(text: str):
    rec = segment(RawDocument(text, "t"))[0]
    return rec, transcribe_sentence(rec)


def test_postfilter_reasons():
    pairs = [
        _pair("Vou fazer o download agora."),
        _pair("Em Florianópolis, fez dois graus celsius no domingo."),
        _pair("Ontem o Schmidt chegou cedo."),
        _pair("Ele comeu qarpo ontem."),
        _pair("a casa é bonita."),
    ]
    stats = PostfilterStats()
    kept = [r.text for r, _ in phonotactic_postfilter(pairs, stats=stats)]
    assert kept == ["Em Florianópolis, fez dois graus celsius no domingo.", "a casa é bonita."]
    assert stats.dropped == Counter({"foreign-pattern": 2, "untranscribable": 1})
    assert stats.seen == 5 and stats.kept == 2


def test_postfilter_proper_noun():
    rec = SentenceRecord("x", "Falei com Qorpo hoje.", ("Falei", "com", "Qorpo", "hoje"), SentenceType.DECLARATIVE, "t")
    tr = transcribe_tokens(rec.tokens)
    assert tr.failed_tokens == ("Qorpo",)
    stats = PostfilterStats()
    assert list(phonotactic_postfilter([(rec, tr)], stats=stats)) == []
    assert stats.dropped == Counter({"proper-noun": 1})
