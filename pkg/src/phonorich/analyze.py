"""Richness metrics, saturation analysis and recording-duration estimates."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .triphone import CATEGORIES, Triphone, TriphoneCategory, TriphoneInventory

__all__ = [
    "RichnessReport",
    "CategoryRichness",
    "Comparison",
    "SaturationResult",
    "DurationEstimate",
    "SyllableBasis",
    "SeriesTooShortError",
    "MissingBaselineError",
    "INCLAN_TIAO_95",
    "format_percent",
    "richness",
    "compare",
    "new_triphone_series",
    "variance_changepoint",
    "saturation_point",
    "estimate_duration",
    "random_baseline",
    "inventory_until_budget",
    "cusum_of_squares",
    "report_document",
    "dump_report",
    "write_series_csv",
    "render_richness_table",
    "render_category_table",
]

# 95% asymptotic critical value of sup|D_k| * sqrt(T/2) (Inclan & Tiao, 1994)
INCLAN_TIAO_95 = 1.358

SPEECH_RATE_SYLLABLES_PER_SECOND = 6
SYLLABLES_PER_WORD = 4


class SeriesTooShortError(ValueError):
    pass


class MissingBaselineError(KeyError):
    pass


def format_percent(value: Fraction | None, decimals: int = 2, signed: bool = False) -> str:
    """Render a fraction as a percentage, rounding half to even exactly."""
    if value is None:
        return "n/a"
    scaled = round(Fraction(value) * 100 * 10**decimals)  # Fraction.__round__ is half-even
    sign = "-" if scaled < 0 else ("+" if signed else "")
    scaled = abs(scaled)
    if decimals == 0:
        return f"{sign}{scaled}%"
    whole, frac = divmod(scaled, 10**decimals)
    return f"{sign}{whole}.{frac:0{decimals}d}%"


def _ratio(distinct: int, total: int) -> Fraction | None:
    return Fraction(distinct, total) if total > 0 else None


@dataclass(frozen=True)
class CategoryRichness:
    distinct: int
    total: int

    @property
    def ratio(self) -> Fraction | None:
        return _ratio(self.distinct, self.total)


@dataclass(frozen=True)
class RichnessReport:
    distinct: int
    total: int
    per_category: Mapping[TriphoneCategory, CategoryRichness]

    @property
    def ratio(self) -> Fraction | None:
        """``distinct / total``; ``None`` when the inventory is empty."""
        return _ratio(self.distinct, self.total)

    @property
    def empty(self) -> bool:
        return self.total == 0

    @classmethod
    def from_counts(cls, distinct: int, total: int) -> "RichnessReport":
        """A report with only the overall counts (categories left at zero)."""
        if distinct > total or distinct < 0:
            raise ValueError("need 0 <= distinct <= total")
        return cls(distinct, total, {c: CategoryRichness(0, 0) for c in CATEGORIES})

    def ratio_str(self, decimals: int = 2) -> str:
        return format_percent(self.ratio, decimals)

    def to_dict(self) -> dict:
        return {
            "distinct": self.distinct,
            "total": self.total,
            "ratio": format_percent(self.ratio),
            "per_category": {
                c.value: {
                    "distinct": r.distinct,
                    "total": r.total,
                    "ratio": format_percent(r.ratio),
                }
                for c, r in self.per_category.items()
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RichnessReport":
        per_cat = {
            TriphoneCategory(k): CategoryRichness(int(v["distinct"]), int(v["total"]))
            for k, v in d.get("per_category", {}).items()
        }
        for c in CATEGORIES:
            per_cat.setdefault(c, CategoryRichness(0, 0))
        return cls(int(d["distinct"]), int(d["total"]), per_cat)


def richness(inv: TriphoneInventory) -> RichnessReport:
    per_cat = {c: CategoryRichness(*inv.per_category[c]) for c in CATEGORIES}
    return RichnessReport(inv.distinct, inv.total, per_cat)


@dataclass(frozen=True)
class Comparison:
    baseline: str
    reports: Mapping[str, RichnessReport]

    def gain(self, name: str) -> Fraction:
        """Relative gain in distinct triphones over the baseline."""
        base = self.reports[self.baseline].distinct
        if base == 0:
            raise ZeroDivisionError("baseline has no distinct triphones")
        return Fraction(self.reports[name].distinct - base, base)

    def rows(self, gain_decimals: int = 1) -> list[dict]:
        out = []
        for name, rep in self.reports.items():
            out.append(
                {
                    "corpus": name,
                    "distinct": rep.distinct,
                    "total": rep.total,
                    "ratio": format_percent(rep.ratio),
                    "gain": format_percent(self.gain(name), gain_decimals, signed=True),
                }
            )
        return out

    def render(self, gain_decimals: int = 1) -> str:
        rows = self.rows(gain_decimals)
        header = ("Corpus", "Distinct Tri.", "Total Tri.", "Ratio", f"vs {self.baseline}")
        body = [(r["corpus"], str(r["distinct"]), str(r["total"]), r["ratio"], r["gain"]) for r in rows]
        return _table(header, body)


def compare(reports: Mapping[str, RichnessReport], baseline: str) -> Comparison:
    if baseline not in reports:
        raise MissingBaselineError(f"baseline {baseline!r} not among reports {sorted(reports)}")
    return Comparison(baseline, dict(reports))


# -- saturation -------------------------------------------------------------


def new_triphone_series(trace: Iterable) -> tuple[np.ndarray, np.ndarray]:
    """Per-acceptance new-triphone counts and their running mean.

    ``trace`` holds :class:`~phonorich.selection.TraceEntry` objects or
    their dict form, in acceptance order.
    """
    values = []
    for entry in trace:
        if isinstance(entry, Mapping):
            values.append(int(entry.get("new_total", sum(entry["new_triphones_by_category"].values()))))
        else:
            values.append(int(entry.new_total))
    series = np.asarray(values, dtype=np.int64)
    if series.size == 0:
        return series, np.zeros(0)
    cumulative_mean = np.cumsum(series) / np.arange(1, series.size + 1)
    return series, cumulative_mean


@dataclass(frozen=True)
class SaturationResult:
    changepoint_index: int | None
    statistic: float
    critical_value: float
    series_length: int
    argmax_index: int | None = None

    @property
    def significant(self) -> bool:
        return self.changepoint_index is not None


def cusum_of_squares(series: Sequence[float]) -> np.ndarray:
    """``D_k = C_k / C_T - k / T`` for k = 1..T (all zeros if ``C_T == 0``)."""
    x = np.asarray(series, dtype=float)
    c = np.cumsum(x * x)
    T = x.size
    if c[-1] <= 0:
        return np.zeros(T)
    return c / c[-1] - np.arange(1, T + 1) / T


def variance_changepoint(series: Sequence[float], critical_value: float = INCLAN_TIAO_95) -> SaturationResult:
    """Cumulative-sum-of-squares test for a single change in variance.

    The statistic is ``max_k |D_k| * sqrt(T / 2)``; a change after
    observation ``k*`` (the argmax) is reported when it exceeds
    ``critical_value``. The series is used as given; the test assumes it
    fluctuates around zero, and a level shift in raw values also registers.
    """
    x = np.asarray(series, dtype=float)
    T = x.size
    if T < 3:
        raise SeriesTooShortError(f"need at least 3 observations, got {T}")
    d = cusum_of_squares(x)
    absd = np.abs(d)
    k = int(np.argmax(absd)) + 1
    stat = float(absd[k - 1] * math.sqrt(T / 2))
    if stat == 0.0:
        return SaturationResult(None, 0.0, critical_value, T, None)
    cp = k if stat > critical_value and 1 <= k <= T - 1 else None
    return SaturationResult(cp, stat, critical_value, T, k)


def saturation_point(trace: Iterable, critical_value: float = INCLAN_TIAO_95) -> SaturationResult:
    """Changepoint of the new-triphones-per-sentence series of a selection
    trace; its index is a suggested batch size."""
    series, _ = new_triphone_series(trace)
    if series.size == 0:
        raise SeriesTooShortError("empty trace")
    return variance_changepoint(series, critical_value)


# -- duration ---------------------------------------------------------------


class SyllableBasis(str, enum.Enum):
    AVERAGE_FOUR = "average_four"
    PHONEMIC_COUNT = "phonemic_count"


@dataclass(frozen=True)
class DurationEstimate:
    token_count: int
    syllable_basis: SyllableBasis
    seconds: float

    @property
    def hours(self) -> float:
        return self.seconds / 3600


def estimate_duration(
    token_count: int,
    basis: SyllableBasis | str = SyllableBasis.AVERAGE_FOUR,
    transcriptions: Iterable | None = None,
    rate: float = SPEECH_RATE_SYLLABLES_PER_SECOND,
    syllables_per_word: float = SYLLABLES_PER_WORD,
) -> DurationEstimate:
    """Reading time at ``rate`` syllables per second.

    ``AVERAGE_FOUR`` assumes ``syllables_per_word`` syllables per token;
    ``PHONEMIC_COUNT`` sums ``syllable_count`` over ``transcriptions``.
    """
    basis = SyllableBasis(basis)
    if token_count < 0:
        raise ValueError("token_count must be nonnegative")
    if basis is SyllableBasis.AVERAGE_FOUR:
        seconds = token_count * syllables_per_word / rate
    else:
        if transcriptions is None:
            raise ValueError("phonemic_count basis needs transcriptions")
        seconds = sum(t.syllable_count for t in transcriptions) / rate
    return DurationEstimate(token_count, basis, float(seconds))


# -- baselines ---------------------------------------------------------------


def inventory_until_budget(
    sentences: Iterable[Sequence[Triphone]], budget: int, inventory: TriphoneInventory | None = None
) -> TriphoneInventory:
    """Accumulate sentences in order until the inventory holds ``budget``
    triphone tokens (the last sentence may overshoot)."""
    inv = inventory if inventory is not None else TriphoneInventory()
    for ts in sentences:
        if inv.total >= budget:
            break
        inv.add(ts)
    return inv


def random_baseline(
    sentences: Sequence[Sequence[Triphone]], budget: int, seed: int
) -> TriphoneInventory:
    """Inventory of a uniformly shuffled selection with the same budget."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(sentences))
    return inventory_until_budget((sentences[i] for i in order), budget)


# -- output ------------------------------------------------------------------


def write_series_csv(dest: str | Path | IO[str], values: Iterable[float], header: tuple[str, str] = ("index", "value")) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_series_csv(fh, values, header)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(header)
    for i, v in enumerate(values, 1):
        if isinstance(v, (float, np.floating)) and not float(v).is_integer():
            v = repr(float(v))
        else:
            v = int(v)
        writer.writerow((i, v))


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    fmt = lambda cells: "  ".join(  # noqa: E731
        c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))
    )
    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines) + "\n"


def render_richness_table(reports: Mapping[str, RichnessReport]) -> str:
    rows = [(name, str(r.distinct), str(r.total), r.ratio_str()) for name, r in reports.items()]
    return _table(("Corpus", "Distinct Tri.", "Total Tri.", "Ratio"), rows)


def render_category_table(reports: Mapping[str, RichnessReport]) -> str:
    names = list(reports)
    rows = [
        (c.value, *(format_percent(reports[n].per_category[c].ratio, 1) for n in names))
        for c in CATEGORIES
    ]
    return _table(("Type", *names), rows)


def report_document(reports: Mapping[str, RichnessReport], saturation: SaturationResult | None = None) -> dict:
    doc = {"corpora": {name: r.to_dict() for name, r in reports.items()}}
    if saturation is not None:
        doc["saturation"] = {
            "changepoint_index": saturation.changepoint_index,
            "statistic": saturation.statistic,
            "critical_value": saturation.critical_value,
            "series_length": saturation.series_length,
        }
    return doc


def dump_report(doc: dict, fh: IO[str]) -> None:
    json.dump(doc, fh, ensure_ascii=False, indent=2, sort_keys=True)
    fh.write("\n")
