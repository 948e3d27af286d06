"""Phonetically rich sentence selection for Brazilian Portuguese."""

from .analyze import (
    RichnessReport,
    SaturationResult,
    DurationEstimate,
    SyllableBasis,
    compare,
    estimate_duration,
    new_triphone_series,
    richness,
    saturation_point,
    variance_changepoint,
)
from .g2p import Ruleset, Transcription, default_ruleset, transcribe_sentence
from .ingest import ExclusionCriteria, SentenceRecord, SentenceType, ingest
from .inventory import MajorClass, Phoneme, PhonemeInventory, classify, default_inventory, load_inventory
from .selection import (
    Candidate,
    CoverageUnreachableWarning,
    SelectionConfig,
    SelectionState,
    make_candidate,
    run_selection,
    select_batch,
)
from .triphone import CATEGORIES, Triphone, TriphoneCategory, TriphoneInventory, categorize, extract

__version__ = "0.1.0"
