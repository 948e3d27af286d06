from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from phonorich.g2p import transcribe_sentence
from phonorich.ingest import SentenceType, read_plain_text, segment
from phonorich.inventory import default_inventory
from phonorich.selection import Candidate, make_candidate
from phonorich.triphone import extract

FIXTURES = Path(__file__).parent / "fixtures"

SAMPLE_PATH = Path(str(resources.files("phonorich.data").joinpath("sample_sentences.txt")))

# (sentence, quoted triphone, category)
GOLDEN = [
    ("Pesquisa é uma coisa que muda toda hora.", ("ɐ", "ɛ", "u"), "VVV"),
    ("Isso é muito extremo.", ("s", "t", "ɾ"), "CCC"),
    ("Bibliotecas foram inauguradas em território americano.", ("ɾ", "ɪ", "ʊ"), "CVV"),
    ("Atualmente, esse é o limite.", ("a", "t", "u"), "VCV"),
    ("Em Florianópolis, fez dois graus celsius no domingo.", ("i", "ɐ", "n"), "VVC"),
    ("Ele está exultante desde que virou presidente.", ("ʊ", "p", "ɾ"), "VCC"),
    ("No total, serão chamados vinte e seis mil candidatos.", ("n", "ʊ", "t"), "CVC"),
    ("A mãe de todas as reformas é a reforma política.", ("s", "ɣ", "e"), "CCV"),
]


def records_from(path: Path, source: str | None = None):
    return [r for doc in read_plain_text(path, source=source) for r in segment(doc)]


def candidates_from(path: Path) -> list[Candidate]:
    return [make_candidate(r, transcribe_sentence(r)) for r in records_from(path)]


@pytest.fixture(scope="session")
def sample_candidates() -> list[Candidate]:
    return candidates_from(SAMPLE_PATH)


@pytest.fixture(scope="session")
def small_candidates() -> list[Candidate]:
    return candidates_from(FIXTURES / "ptbr_small.txt")


def synthetic_candidates(
    rng: np.random.Generator,
    n: int,
    length: tuple[int, int] = (8, 30),
    symbols: tuple[str, ...] | None = None,
    type_probs: tuple[float, float, float] = (0.6, 0.3, 0.1),
    word_count: tuple[int, int] = (10, 20),
    prefix: str = "s",
    skew: float = 0.0,
) -> list[Candidate]:
    """Random phoneme streams with a CV-leaning structure.

    Consonants and vowels alternate with probability 0.7 so that all eight
    categories occur but with realistic skew (VVV and CCC are rarer). With
    ``skew > 0`` symbols within each class follow a Zipf law of that
    exponent, so frequent triphones repeat as they do in real text.
    """
    inv = default_inventory()
    vow = [s for s in inv.vocoids if symbols is None or s in symbols]
    con = [s for s in inv.contoids if symbols is None or s in symbols]

    def weights(pool):
        w = 1.0 / np.arange(1, len(pool) + 1) ** skew
        return w / w.sum()

    wv, wc = weights(vow), weights(con)
    types = list(SentenceType)
    out = []
    for i in range(n):
        size = int(rng.integers(length[0], length[1] + 1))
        phon = []
        is_vowel = bool(rng.random() < 0.5)
        for _ in range(size):
            use_vow = (is_vowel and vow) or not con
            pool, w = (vow, wv) if use_vow else (con, wc)
            phon.append(pool[int(rng.choice(len(pool), p=w))])
            if rng.random() < 0.7:
                is_vowel = not is_vowel
        phon = tuple(phon)
        out.append(
            Candidate(
                id=f"{prefix}{i:05d}",
                text=f"synthetic sentence {i}",
                sentence_type=types[int(rng.choice(3, p=type_probs))],
                phonemes=phon,
                triphones=tuple(extract(phon, inv)),
                word_count=int(rng.integers(word_count[0], word_count[1] + 1)),
                source="synthetic",
                syllable_count=sum(inv.is_vocoid(p) for p in phon),
            )
        )
    return out


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for key in ("passed", "failed", "xfailed", "skipped", "error"):
        for rep in terminalreporter.stats.get(key, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            status = "PASS" if key == "passed" else "SKIP" if key == "skipped" else "FAIL"
            if rep.when == "call" or status != "PASS":
                note = getattr(rep, "wasxfail", "") or (rep.longrepr[2] if key == "skipped" else "")
                outcomes[name] = f"{status}  {name}" + (f"  ({note.removeprefix('Skipped: ')})" if note else "")
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(outcomes, key=lambda n: int(n.split("_")[2])):
        terminalreporter.write_line(outcomes[name])
