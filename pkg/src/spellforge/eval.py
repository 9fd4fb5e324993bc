"""Word-level correction metrics and the real-word / non-word breakdown.

A position is TP when the input was wrong and the prediction is right, FP
when a correct input was changed into something wrong, FN when a wrong input
stays wrong, TN when a correct input stays correct.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Vocabulary
from .noise import MisspellingClass, classify_misspelling

BETA = 0.5


class Outcome(enum.Enum):
    TP = "TP"
    FP = "FP"
    FN = "FN"
    TN = "TN"


def classify_outcome(noisy: str, predicted: str, gold: str) -> Outcome:
    if noisy != gold:
        return Outcome.TP if predicted == gold else Outcome.FN
    return Outcome.TN if predicted == gold else Outcome.FP


@dataclass
class OutcomeCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def add(self, outcome: Outcome, n: int = 1) -> None:
        name = outcome.value.lower()
        setattr(self, name, getattr(self, name) + n)

    def merge(self, other: "OutcomeCounts") -> "OutcomeCounts":
        return OutcomeCounts(self.tp + other.tp, self.fp + other.fp,
                             self.fn + other.fn, self.tn + other.tn)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, str]]) -> "OutcomeCounts":
        c = cls()
        for noisy, pred, gold in triples:
            c.add(classify_outcome(noisy, pred, gold))
        return c


def f_beta(precision: float, recall: float, beta: float = BETA) -> float:
    b2 = beta * beta
    denom = b2 * precision + recall
    return 0.0 if denom == 0 else (1 + b2) * precision * recall / denom


def _ratio(num: int, den: int, name: str, flags: list) -> float:
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


@dataclass
class OverallMetrics:
    accuracy: float
    precision: float
    recall: float
    f_beta: float
    flags: list[str] = field(default_factory=list)  # metrics whose denominator was zero


def compute_metrics(counts: OutcomeCounts, beta: float = BETA) -> OverallMetrics:
    if counts.total == 0:
        raise ValueError("no positions to evaluate")
    flags: list[str] = []
    acc = (counts.tp + counts.tn) / counts.total
    p = _ratio(counts.tp, counts.tp + counts.fp, "precision", flags)
    r = _ratio(counts.tp, counts.tp + counts.fn, "recall", flags)
    return OverallMetrics(acc, p, r, f_beta(p, r, beta), flags)


@dataclass
class CategoryMetrics:
    positions: int
    detected: int
    corrected: int
    detection_recall: float
    correction_precision: float
    f_beta: float
    flags: list[str] = field(default_factory=list)


def category_metrics(positions: int, detected: int, corrected: int,
                     beta: float = BETA) -> CategoryMetrics | None:
    """Detection recall = changed / misspelled; correction precision = fixed / changed."""
    if positions == 0:
        return None
    flags: list[str] = []
    r = detected / positions
    p = _ratio(corrected, detected, "correction_precision", flags)
    return CategoryMetrics(positions, detected, corrected, r, p, f_beta(p, r, beta), flags)


def category_breakdown(triples: Iterable[tuple[str, str, str]], word_vocab: Vocabulary,
                       beta: float = BETA) -> dict[str, CategoryMetrics | None]:
    """Metrics over misspelled positions split by whether the input is a vocabulary word."""
    tallies = {MisspellingClass.RealWord: [0, 0, 0], MisspellingClass.NonWord: [0, 0, 0]}
    for noisy, pred, gold in triples:
        if noisy == gold:
            continue
        t = tallies[classify_misspelling(noisy, word_vocab)]
        t[0] += 1
        if pred != noisy:
            t[1] += 1
            t[2] += pred == gold
    return {
        "real_word": category_metrics(*tallies[MisspellingClass.RealWord], beta),
        "non_word": category_metrics(*tallies[MisspellingClass.NonWord], beta),
    }


@dataclass
class MetricsReport:
    overall: OverallMetrics
    real_word: CategoryMetrics | None
    non_word: CategoryMetrics | None
    counts: OutcomeCounts
    beta: float = BETA
    counters: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "counts": asdict(self.counts),
            "overall": asdict(self.overall),
            "real_word": asdict(self.real_word) if self.real_word else None,
            "non_word": asdict(self.non_word) if self.non_word else None,
            "counters": dict(sorted(self.counters.items())),
        }


def iter_triples(noisy_sents, pred_sents, gold_sents):
    if not len(noisy_sents) == len(pred_sents) == len(gold_sents):
        raise ValueError("noisy, predicted and gold streams must be index-aligned")
    for n, p, g in zip(noisy_sents, pred_sents, gold_sents):
        if not len(n) == len(p) == len(g):
            raise ValueError(f"token counts differ: {len(n)}, {len(p)}, {len(g)}")
        yield from zip(n, p, g)


def evaluate(triples: Iterable[tuple[str, str, str]], word_vocab: Vocabulary,
             beta: float = BETA, counters: dict | None = None) -> MetricsReport:
    triples = list(triples)
    counts = OutcomeCounts.from_triples(triples)
    cats = category_breakdown(triples, word_vocab, beta)
    return MetricsReport(compute_metrics(counts, beta), cats["real_word"], cats["non_word"],
                         counts, beta, dict(counters or {}))


def evaluate_sentences(noisy_sents: Sequence, pred_sents: Sequence, gold_sents: Sequence,
                       word_vocab: Vocabulary, beta: float = BETA,
                       counters: dict | None = None) -> MetricsReport:
    return evaluate(iter_triples(noisy_sents, pred_sents, gold_sents), word_vocab, beta, counters)


# --- serialization -----------------------------------------------------------

def _flatten(d: dict, prefix: str = "") -> list[tuple[str, object]]:
    rows = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(_flatten(v, key + "."))
        elif isinstance(v, list):
            rows.append((key, "|".join(v)))
        else:
            rows.append((key, v))
    return rows


def report_to_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for k, v in _flatten(report.to_dict()):
        w.writerow([k, "" if v is None else repr(v) if isinstance(v, float) else v])
    return buf.getvalue()


def read_csv_report(text: str) -> dict[str, float | str]:
    out = {}
    for row in list(csv.reader(io.StringIO(text)))[1:]:
        key, val = row
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


def _fmt(x) -> str:
    return "  -  " if x is None else f"{x:.3f}"


def report_to_text(report: MetricsReport, title: str = "") -> str:
    o, rw, nw = report.overall, report.real_word, report.non_word
    f_name = f"F{report.beta:g}"
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'Acc':>7}{'P':>7}{'R':>7}{f_name:>7}")
    lines.append("".join(f"{_fmt(x):>7}" for x in (o.accuracy, o.precision, o.recall, o.f_beta)))
    lines.append(f"{'':7}{'P':>7}{'R':>7}{f_name:>7}  (real-word)")
    lines.append(f"{'':7}" + "".join(f"{_fmt(x):>7}" for x in (
        rw and rw.correction_precision, rw and rw.detection_recall, rw and rw.f_beta)))
    lines.append(f"{'':7}{'P':>7}{'R':>7}  (non-word)")
    lines.append(f"{'':7}" + "".join(f"{_fmt(x):>7}" for x in (
        nw and nw.correction_precision, nw and nw.detection_recall)))
    c = report.counts
    lines.append(f"TP={c.tp} FP={c.fp} FN={c.fn} TN={c.tn}  beta={report.beta:g}")
    for k, v in sorted(report.counters.items()):
        lines.append(f"{k}={v}")
    return "\n".join(lines) + "\n"


def render_report(report: MetricsReport, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return report_to_csv(report)
    if fmt == "text":
        return report_to_text(report)
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(report: MetricsReport, path, fmt: str = "text") -> None:
    Path(path).write_text(render_report(report, fmt), encoding="utf-8")


def comparison_table(rows: Sequence[tuple[str, MetricsReport, MetricsReport]]) -> str:
    """Overall dev/test table: Acc P R F per split, one row per model."""
    header = f"{'model':<24}" + "".join(f"{h:>7}" for h in ("Acc", "P", "R", "F0.5") * 2)
    out = [f"{'':<24}{'dev':>28}{'test':>28}", header]
    for name, dev, test in rows:
        vals = []
        for r in (dev, test):
            o = r.overall
            vals += [o.accuracy, o.precision, o.recall, o.f_beta]
        out.append(f"{name:<24}" + "".join(f"{_fmt(v):>7}" for v in vals))
    return "\n".join(out) + "\n"


def breakdown_table(rows: Sequence[tuple[str, MetricsReport, MetricsReport]]) -> str:
    """Real-word P/R/F per split plus non-word precision per split."""
    out = [f"{'':<24}{'real-word dev':>21}{'real-word test':>21}{'non-word':>14}",
           f"{'model':<24}" + "".join(f"{h:>7}" for h in ("P", "R", "F0.5") * 2)
           + f"{'dev P':>7}{'test P':>7}"]
    for name, dev, test in rows:
        vals = []
        for r in (dev, test):
            rw = r.real_word
            vals += [rw and rw.correction_precision, rw and rw.detection_recall, rw and rw.f_beta]
        vals += [dev.non_word and dev.non_word.correction_precision,
                 test.non_word and test.non_word.correction_precision]
        out.append(f"{name:<24}" + "".join(f"{_fmt(v):>7}" for v in vals))
    return "\n".join(out) + "\n"
