from pathlib import Path

# the eight example sentences, one per triphone category
SAMPLE_SENTENCES = Path(__file__).with_name("sample_sentences.txt")
