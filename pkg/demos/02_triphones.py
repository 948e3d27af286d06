"""Triphone extraction and the eight vocoid/contoid categories.

Run: python demos/02_triphones.py
"""

from phonorich import CATEGORIES, TriphoneInventory, categorize, extract, transcribe_sentence
from phonorich.ingest import read_plain_text, segment
from phonorich.data import SAMPLE_SENTENCES

inv = TriphoneInventory()
for doc in read_plain_text(SAMPLE_SENTENCES):
    for rec in segment(doc):
        phonemes = transcribe_sentence(rec).phonemes
        new = inv.add(extract(phonemes))
        print(f"{rec.text}\n  /{' '.join(phonemes)}/  new={sum(new.values())}")

print(f"\ndistinct {inv.distinct}  total {inv.total}")
for cat in CATEGORIES:
    print(f"  {cat.value}: distinct {inv.distinct_in(cat)}")

# the first sentence's VVV example, checked directly
print("\n/ɐ ɛ u/ is", categorize(("ɐ", "ɛ", "u")).value)
