"""Command-line pipeline: ingest, transcribe, select, analyze, compare.

Each stage reads the files written by the previous one, so any stage can be
rerun on its own. Data goes to files under ``--output``; summaries go to
stdout and progress to stderr.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 schema error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import logging
import multiprocessing
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Iterator, Mapping, Sequence

import yaml

from . import analyze as an
from .g2p import Ruleset, Transcription, count_syllables, default_ruleset, load_ruleset, transcribe_tokens
from .ingest import (
    ExclusionCriteria,
    ExclusionStats,
    IngestError,
    IngestSchemaError,
    SentenceRecord,
    ingest,
    read_blocklist,
)
from .inventory import PhonemeInventory, UnknownSymbolError, default_inventory, load_inventory
from .selection import (
    Candidate,
    CoverageUnreachableWarning,
    PostfilterStats,
    SelectionConfig,
    make_candidate,
    phonotactic_postfilter,
    run_selection,
)
from .triphone import TriphoneInventory, extract

logger = logging.getLogger("phonorich")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SCHEMA = 4

SENTENCES_FILE = "sentences.jsonl"
INGEST_STATS_FILE = "ingest_stats.json"
TRANSCRIBED_FILE = "transcribed.jsonl"
POSTFILTER_STATS_FILE = "postfilter_stats.json"
SELECTED_FILE = "selected.jsonl"
TRACE_FILE = "trace.jsonl"
INVENTORY_FILE = "inventory.jsonl"
SELECTION_SUMMARY_FILE = "selection_summary.json"
REPORT_FILE = "report.json"
REPORT_TEXT_FILE = "report.txt"
COMPARISON_FILE = "comparison.json"
COMPARISON_TEXT_FILE = "comparison.txt"


class ConfigError(Exception):
    pass


class SchemaError(Exception):
    def __init__(self, path: Path | str, lineno: int, message: str):
        self.path, self.lineno = str(path), lineno
        super().__init__(f"{path}:{lineno}: {message}")


# -- configuration ------------------------------------------------------------


@dataclass
class PipelineConfig:
    inputs: list[Path] = field(default_factory=list)
    output: Path | None = None
    ruleset: Path | None = None
    blocklist: Path | None = None
    inventory: Path | None = None
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    exclusion: ExclusionCriteria = field(default_factory=ExclusionCriteria)
    workers: int = 1
    log_level: str = "INFO"
    name: str | None = None

    def validate(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for label in ("ruleset", "blocklist", "inventory"):
            p = getattr(self, label)
            if p is not None and not p.is_file():
                raise ConfigError(f"{label} file not found: {p}")
        if self.log_level.upper() not in logging._nameToLevel:
            raise ConfigError(f"unknown log_level {self.log_level!r}")

    def phoneme_inventory(self) -> PhonemeInventory:
        return load_inventory(self.inventory) if self.inventory else default_inventory()

    def load_ruleset(self) -> Ruleset:
        if self.ruleset is None and self.inventory is None:
            return default_ruleset()
        path = self.ruleset or Path(__file__).with_name("data") / "ptbr_sp_rules.tsv"
        return load_ruleset(path, self.phoneme_inventory())


_TOP_KEYS = {"inputs", "output", "ruleset", "blocklist", "inventory", "selection", "exclusion", "workers", "log_level", "name"}
_EXCLUSION_KEYS = {"min_corpus_tokens", "max_nonstandard_ratio", "date_range"}


def _as_date(value, key: str) -> dt.date:
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{key}: expected an ISO date, got {value!r}") from None


def load_config(path: Path | None) -> PipelineConfig:
    """Read a YAML (or JSON) config whose keys mirror :class:`PipelineConfig`.

    Relative paths inside the file resolve against the file's directory.
    """
    if path is None:
        return PipelineConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path}: top level must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"config {path}: unknown keys {sorted(unknown)}")
    base = Path(path).parent

    def p(v):
        return None if v is None else (base / v if not Path(v).is_absolute() else Path(v))

    cfg = PipelineConfig()
    try:
        cfg.inputs = [p(v) for v in data.get("inputs", [])]
        cfg.output = p(data.get("output"))
        cfg.ruleset = p(data.get("ruleset"))
        cfg.blocklist = p(data.get("blocklist"))
        cfg.inventory = p(data.get("inventory"))
        cfg.workers = int(data.get("workers", 1))
        cfg.log_level = str(data.get("log_level", "INFO"))
        cfg.name = data.get("name")
        cfg.selection = SelectionConfig.from_mapping(data.get("selection") or {})
        ex = dict(data.get("exclusion") or {})
        bad = set(ex) - _EXCLUSION_KEYS
        if bad:
            raise ConfigError(f"unknown exclusion keys {sorted(bad)}")
        if "date_range" in ex:
            lo, hi = ex["date_range"]
            ex["date_range"] = (_as_date(lo, "date_range"), _as_date(hi, "date_range"))
        cfg.exclusion = ExclusionCriteria(**ex)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"config {path}: {exc}") from None
    return cfg


def _merge_args(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    if args.input:
        cfg.inputs = [Path(x) for x in args.input]
    if args.output:
        cfg.output = Path(args.output)
    if args.workers is not None:
        cfg.workers = args.workers
    if cfg.blocklist is not None:
        cfg.validate()
        cfg.exclusion = dataclasses.replace(cfg.exclusion, blocklist=read_blocklist(cfg.blocklist))
    cfg.validate()
    return cfg


# -- file helpers -------------------------------------------------------------


def _progress(msg: str) -> None:
    logger.info(msg)


def _require_inputs(cfg: PipelineConfig, at_least: int = 1) -> list[Path]:
    if len(cfg.inputs) < at_least:
        raise ConfigError(f"need at least {at_least} --input path(s)")
    for path in cfg.inputs:
        if not path.is_file():
            raise FileNotFoundError(f"input not found: {path}")
    return cfg.inputs


def _output_dir(cfg: PipelineConfig) -> Path:
    if cfg.output is None:
        raise ConfigError("--output DIR is required")
    cfg.output.mkdir(parents=True, exist_ok=True)
    return cfg.output


def _open_out(path: Path) -> IO[str]:
    return open(path, "w", encoding="utf-8", newline="\n")


def _dump_json(obj, path: Path) -> None:
    with _open_out(path) as fh:
        json.dump(obj, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonl_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n"


def read_records(path: Path, parse: Callable[[dict], object], what: str) -> Iterator:
    """Parse a JSONL file record by record, turning any shape problem into
    a :class:`SchemaError` carrying the line number."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise TypeError("record is not an object")
                yield parse(obj)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
                raise SchemaError(path, lineno, f"not a {what} record ({type(exc).__name__}: {exc})") from None


def _transcribed_to_dict(rec: SentenceRecord, tr: Transcription) -> dict:
    d = rec.to_dict()
    d["phonemes"] = " ".join(tr.phonemes)
    d["syllable_count"] = tr.syllable_count
    d["failed_tokens"] = list(tr.failed_tokens)
    return d


def _transcribed_from_dict(d: dict) -> tuple[SentenceRecord, Transcription]:
    rec = SentenceRecord.from_dict(d)
    phon = d["phonemes"]
    if not isinstance(phon, str):
        raise TypeError("phonemes must be a space-separated string")
    tr = Transcription(tuple(phon.split()), int(d["syllable_count"]), tuple(d.get("failed_tokens", ())), rec.id)
    return rec, tr


# -- transcription workers ------------------------------------------------------

_WORKER_RULES: Ruleset | None = None


def _init_worker(ruleset_path: str | None, inventory_path: str | None) -> None:
    global _WORKER_RULES
    cfg = PipelineConfig(
        ruleset=Path(ruleset_path) if ruleset_path else None,
        inventory=Path(inventory_path) if inventory_path else None,
    )
    _WORKER_RULES = cfg.load_ruleset()


def _transcribe_one(rec: SentenceRecord) -> Transcription:
    return transcribe_tokens(rec.tokens, _WORKER_RULES, rec.id)


def transcribe_records(records: Sequence[SentenceRecord], cfg: PipelineConfig) -> list[Transcription]:
    """Transcribe in input order; the result does not depend on ``workers``."""
    if cfg.workers <= 1 or len(records) < 2:
        _init_worker(cfg.ruleset and str(cfg.ruleset), cfg.inventory and str(cfg.inventory))
        return [_transcribe_one(r) for r in records]
    ctx = multiprocessing.get_context("spawn")
    chunk = max(1, min(1000, len(records) // (cfg.workers * 4) or 1))
    with ctx.Pool(
        cfg.workers,
        initializer=_init_worker,
        initargs=(cfg.ruleset and str(cfg.ruleset), cfg.inventory and str(cfg.inventory)),
    ) as pool:
        return list(pool.imap(_transcribe_one, records, chunksize=chunk))


# -- commands -----------------------------------------------------------------


def cmd_ingest(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    inputs = _require_inputs(cfg)
    out = _output_dir(cfg)
    rules = cfg.load_ruleset()
    stats = ExclusionStats()
    n = 0
    with _open_out(out / SENTENCES_FILE) as fh:
        for rec in ingest(inputs, cfg.exclusion, lambda t: rules.transcribe_word(t) is not None, stats):
            fh.write(_jsonl_line(rec.to_dict()))
            n += 1
            if n % 100000 == 0:
                _progress(f"ingest: {n} sentences kept")
    _dump_json(stats.to_dict(), out / INGEST_STATS_FILE)
    print(f"seen {stats.seen}  kept {stats.kept}")
    for reason, count in sorted(stats.dropped.items()):
        print(f"dropped[{reason}] {count}")
    for source, reason in sorted(stats.rejected_corpora.items()):
        print(f"rejected corpus {source}: {reason}")
    return EXIT_OK


def cmd_transcribe(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    inputs = _require_inputs(cfg)
    out = _output_dir(cfg)
    records: list[SentenceRecord] = []
    for path in inputs:
        records.extend(read_records(path, SentenceRecord.from_dict, "sentence"))
    _progress(f"transcribe: {len(records)} sentences, {cfg.workers} worker(s)")
    transcriptions = transcribe_records(records, cfg)
    stats = PostfilterStats()
    with _open_out(out / TRANSCRIBED_FILE) as fh:
        for rec, tr in phonotactic_postfilter(zip(records, transcriptions), stats=stats):
            fh.write(_jsonl_line(_transcribed_to_dict(rec, tr)))
    _dump_json(stats.to_dict(), out / POSTFILTER_STATS_FILE)
    print(f"seen {stats.seen}  kept {stats.kept}")
    for reason, count in sorted(stats.dropped.items()):
        print(f"dropped[{reason}] {count}")
    return EXIT_OK


def _load_candidates(paths: Sequence[Path], inventory: PhonemeInventory) -> list[Candidate]:
    cands = []
    for path in paths:
        for lineno, (rec, tr) in enumerate(read_records(path, _transcribed_from_dict, "transcribed sentence"), 1):
            try:
                cands.append(make_candidate(rec, tr, inventory))
            except UnknownSymbolError as exc:
                raise SchemaError(path, lineno, str(exc)) from None
    return cands


def cmd_select(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    inputs = _require_inputs(cfg)
    out = _output_dir(cfg)
    inventory = cfg.phoneme_inventory()
    cands = _load_candidates(inputs, inventory)
    _progress(f"select: {len(cands)} candidates")
    with warnings.catch_warnings():
        # already reported through the logger
        warnings.simplefilter("ignore", CoverageUnreachableWarning)
        result = run_selection(cands, cfg.selection, inventory)
    with _open_out(out / SELECTED_FILE) as fh:
        result.write(fh)
    with _open_out(out / TRACE_FILE) as fh:
        result.write_trace(fh)
    result.state.inventory.save(out / INVENTORY_FILE)
    state = result.state
    summary = {
        "selected": state.n_selected,
        "shortfall": result.shortfall,
        "missing_phonemes": list(state.missing_phonemes),
        "per_type_counts": {t.value: n for t, n in sorted(state.per_type_counts.items())},
        "distinct_triphones": state.inventory.distinct,
        "total_triphones": state.inventory.total,
        "config": cfg.selection.to_dict(),
    }
    _dump_json(summary, out / SELECTION_SUMMARY_FILE)
    print(f"selected {state.n_selected}  distinct {state.inventory.distinct}  total {state.inventory.total}")
    if result.shortfall:
        print(f"shortfall {result.shortfall}")
    if state.missing_phonemes:
        print("coverage unreachable: " + " ".join(f"/{p}/" for p in state.missing_phonemes))
    return EXIT_OK


def _classify_jsonl(path: Path) -> str:
    """Tell selected, trace and transcribed files apart by their first record."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise SchemaError(path, lineno, "record is not an object")
            if "reserve_flag" in obj:
                return "selected"
            if "phase" in obj and "new_triphones_by_category" in obj:
                return "trace"
            if "phonemes" in obj and "tokens" in obj:
                return "transcribed"
            raise SchemaError(path, lineno, "unrecognized record shape")
    return "empty"


def cmd_analyze(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    inputs = _require_inputs(cfg)
    out = _output_dir(cfg)
    inventory = cfg.phoneme_inventory()
    kinds: dict[str, list[Path]] = {}
    for path in inputs:
        kinds.setdefault(_classify_jsonl(path), []).append(path)
    if "selected" not in kinds:
        raise ConfigError("analyze needs a selected-corpus file among --input")
    name = cfg.name or out.name

    tri = TriphoneInventory(inventory)
    transcriptions = []
    for path in kinds["selected"]:
        for lineno, rec in enumerate(read_records(path, lambda d: (d["phonemes"].split(), d["id"]), "selected"), 1):
            phon, _ = rec
            try:
                tri.add(extract(phon, inventory))
            except UnknownSymbolError as exc:
                raise SchemaError(path, lineno, str(exc)) from None
            transcriptions.append(phon)
    report = an.richness(tri)
    doc = {"name": name, "richness": report.to_dict()}
    text = [an.render_richness_table({name: report}), an.render_category_table({name: report})]

    trace = []
    for path in kinds.get("trace", []):
        trace.extend(read_records(path, _trace_from_dict, "trace"))
    if trace:
        series, cmean = an.new_triphone_series(trace)
        an.write_series_csv(out / "new_triphones.csv", series, ("sentence", "new_triphones"))
        an.write_series_csv(out / "cumulative_mean.csv", cmean, ("sentence", "cumulative_mean"))
        an.write_series_csv(out / "distinct_triphones.csv", [e["distinct_after"] for e in trace], ("sentence", "distinct"))
        if len(series) >= 3:
            sat = an.variance_changepoint(series)
            doc["saturation"] = {
                "changepoint_index": sat.changepoint_index,
                "statistic": sat.statistic,
                "critical_value": sat.critical_value,
                "series_length": sat.series_length,
            }
            cp = sat.changepoint_index if sat.changepoint_index is not None else "none"
            text.append(f"saturation changepoint: {cp} (statistic {sat.statistic:.4f}, critical {sat.critical_value})\n")

    if args.seed is not None:
        pool_paths = kinds.get("transcribed")
        if not pool_paths:
            raise ConfigError("--seed needs a transcribed pool file among --input")
        pool = [c.triphones for c in _load_candidates(pool_paths, inventory)]
        rnd = an.random_baseline(pool, report.total, args.seed)
        rnd_report = an.richness(rnd)
        doc["random_baseline"] = {"seed": args.seed, "richness": rnd_report.to_dict()}
        text.append(an.compare({name: report, "random": rnd_report}, "random").render())

    syll = sum(count_syllables(p, inventory) for p in transcriptions)
    doc["duration_hours"] = syll / an.SPEECH_RATE_SYLLABLES_PER_SECOND / 3600
    _dump_json(doc, out / REPORT_FILE)
    with _open_out(out / REPORT_TEXT_FILE) as fh:
        fh.write("\n".join(text))
    sys.stdout.write("\n".join(text))
    return EXIT_OK


def _trace_from_dict(d: dict) -> dict:
    return {
        "new_total": int(d["new_total"]) if "new_total" in d else sum(int(v) for v in d["new_triphones_by_category"].values()),
        "new_triphones_by_category": dict(d["new_triphones_by_category"]),
        "distinct_after": int(d["distinct_after"]),
    }


def _load_report(path: Path) -> tuple[str, an.RichnessReport]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(path, exc.lineno, f"invalid JSON ({exc.msg})") from None
    try:
        body = doc["richness"] if "richness" in doc else doc
        return str(doc.get("name") or path.stem), an.RichnessReport.from_dict(body)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise SchemaError(path, 1, f"not a richness report ({type(exc).__name__}: {exc})") from None


def cmd_compare(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    inputs = _require_inputs(cfg, at_least=2)
    if not args.baseline:
        raise ConfigError("compare needs --baseline NAME")
    reports: dict[str, an.RichnessReport] = {}
    for path in inputs:
        name, rep = _load_report(path)
        if name in reports:
            raise ConfigError(f"duplicate report name {name!r}")
        reports[name] = rep
    try:
        comparison = an.compare(reports, args.baseline)
    except an.MissingBaselineError as exc:
        raise ConfigError(str(exc.args[0])) from None
    table = comparison.render()
    sys.stdout.write(table)
    if cfg.output is not None:
        out = _output_dir(cfg)
        _dump_json({"baseline": args.baseline, "rows": comparison.rows()}, out / COMPARISON_FILE)
        with _open_out(out / COMPARISON_TEXT_FILE) as fh:
            fh.write(table)
    return EXIT_OK


COMMANDS: Mapping[str, Callable[[PipelineConfig, argparse.Namespace], int]] = {
    "ingest": cmd_ingest,
    "transcribe": cmd_transcribe,
    "select": cmd_select,
    "analyze": cmd_analyze,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file mirroring the pipeline configuration")
    common.add_argument("--input", nargs="+", metavar="PATH", help="input file(s) for the stage")
    common.add_argument("--output", metavar="DIR", help="directory for the stage's output files")
    common.add_argument("--workers", type=int, metavar="N", help="parallel transcription processes")
    common.add_argument("--baseline", metavar="NAME", help="baseline report name (compare)")
    common.add_argument("--seed", type=int, metavar="N", help="seed for the random-selection baseline (analyze)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(prog="phonorich", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="clean, segment and filter raw text")
    sub.add_parser("transcribe", parents=[common], help="G2P plus phonotactic post-filter")
    sub.add_parser("select", parents=[common], help="greedy phonetically rich selection")
    sub.add_parser("analyze", parents=[common], help="richness report, saturation and plot series")
    sub.add_parser("compare", parents=[common], help="relative distinct-triphone gains vs a baseline")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        cfg = _merge_args(load_config(args.config), args)
    except ConfigError as exc:
        print(f"phonorich: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"phonorich: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    level = logging.DEBUG if args.verbose else getattr(logging, cfg.log_level.upper())
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("phonorich")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"phonorich: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, IngestSchemaError) as exc:
        print(f"phonorich: schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (IngestError, OSError) as exc:
        print(f"phonorich: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except UnicodeDecodeError as exc:
        print(f"phonorich: I/O error: undecodable input ({exc.reason})", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
