"""Phoneme inventory and rule-based transcription.

Run: python demos/01_inventory_and_g2p.py
"""

from phonorich import classify, default_inventory, default_ruleset
from phonorich.g2p import transcribe_tokens
from phonorich.ingest import tokenize

inv = default_inventory()
print(f"{len(inv)} phonemes: {len(inv.contoids)} contoids, {len(inv.vocoids)} vocoids")
print("vocoids: ", " ".join(inv.vocoids))
print("contoids:", " ".join(inv.contoids))

# tie bars and composed forms normalize to the same entry
print("t͡ʃ ->", inv["t͡ʃ"].symbol, classify("t͡ʃ").value)

rules = default_ruleset()
print(f"\nruleset version {rules.version}")
for word in ["extremo", "filho", "carro", "gente", "também", "atualmente"]:
    print(f"  {word:12} /{' '.join(rules.transcribe_word(word))}/")

# foreign spellings are reported, never guessed
t = transcribe_tokens(tokenize("Baixei o download ontem."), rules)
print(f"\nfailed tokens: {t.failed_tokens}; syllables in the rest: {t.syllable_count}")
