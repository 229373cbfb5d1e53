"""Original-vs-adversarial comparison and report rendering."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .metrics import METRICS, MetricReport, aggregate
from .perturb import expectation_of, normalize_scenario

REPORT_SCHEMA = 1
DEFAULT_TOLERANCE = 0.05
DEFAULT_SHIFT_THRESHOLD = 0.5
FOOLED_BY_CAT1 = "FOOLED_BY_CAT1"
INSENSITIVE_TO_CAT2 = "INSENSITIVE_TO_CAT2"
LABELS = {"cat1_change": "Cat1-Change", "cat1_add": "Cat1-Add",
          "cat2_change": "Cat2-Change", "cat2_add": "Cat2-Add"}
CSV_COLUMNS = ["scenario", "expectation", "metric", "cutoff", "original", "adversarial", "delta",
               "shift_rate", "n_instances", "n_failed_original", "n_failed_adversarial",
               "n_skipped", "tolerance", "shift_threshold", "verdicts"]


class UnpairedInstances(ValueError):
    def __init__(self, only_original, only_adversarial):
        self.only_original = sorted(only_original)
        self.only_adversarial = sorted(only_adversarial)
        super().__init__(
            "instance ids differ between original and adversarial scores; "
            f"only in original: {self.only_original[:10]}, "
            f"only in adversarial: {self.only_adversarial[:10]}"
        )


@dataclass
class RobustnessReport:
    scenario: str
    expectation: str
    original: MetricReport
    adversarial: MetricReport
    delta: dict[str, dict[int, float | None]]
    shift_rate: float | None
    verdicts: list[str] = field(default_factory=list)
    tolerance: float = DEFAULT_TOLERANCE
    shift_threshold: float = DEFAULT_SHIFT_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "expectation": self.expectation,
            "original": self.original.to_dict(),
            "adversarial": self.adversarial.to_dict(),
            "delta": {m: {str(k): v for k, v in row.items()} for m, row in self.delta.items()},
            "shift_rate": self.shift_rate,
            "verdicts": list(self.verdicts),
            "tolerance": self.tolerance,
            "shift_threshold": self.shift_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RobustnessReport":
        return cls(
            d["scenario"], d["expectation"],
            MetricReport.from_dict(d["original"]), MetricReport.from_dict(d["adversarial"]),
            {m: {int(k): v for k, v in row.items()} for m, row in d["delta"].items()},
            d["shift_rate"], list(d["verdicts"]), d["tolerance"], d["shift_threshold"],
        )


def relative_delta(original: MetricReport, adversarial: MetricReport) -> dict[str, dict[int, float | None]]:
    """(adv - orig) / orig per cell; None where the original value is 0 or missing."""
    out = {}
    for m, row in original.table.items():
        out[m] = {}
        for k, o in row.items():
            a = adversarial.table[m][k]
            out[m][k] = (a - o) / o if o and a is not None else None
    return out


def verdicts_for(scenario: str, delta, shift_rate, tolerance=DEFAULT_TOLERANCE,
                 shift_threshold=DEFAULT_SHIFT_THRESHOLD) -> list[str]:
    out = []
    if scenario.startswith("cat1"):
        if any(d is not None and d < -tolerance for row in delta.values() for d in row.values()):
            out.append(FOOLED_BY_CAT1)
    elif shift_rate is not None and shift_rate < shift_threshold:
        out.append(INSENSITIVE_TO_CAT2)
    return out


def compare(original_scores, adversarial_scores, scenario: str, cutoffs=None,
            tolerance: float = DEFAULT_TOLERANCE,
            shift_threshold: float = DEFAULT_SHIFT_THRESHOLD) -> RobustnessReport:
    """Pair two score lists by instance id and summarise the change.

    Instances that failed (or were skipped) on either side drop out of both
    aggregates so the comparison stays paired.
    """
    scenario = normalize_scenario(scenario)
    orig = {s.instance_id: s for s in original_scores}
    adv = {s.instance_id: s for s in adversarial_scores}
    if orig.keys() != adv.keys():
        raise UnpairedInstances(orig.keys() - adv.keys(), adv.keys() - orig.keys())
    ids = [i for i in orig if orig[i].scored and adv[i].scored]
    if cutoffs is None:
        keys = next((s.values for s in orig.values() if s.scored), {})
        cutoffs = sorted({int(k.split("@")[1]) for k in keys}) or [1, 10, 50]
    o_rep = aggregate([orig[i] for i in ids], cutoffs)
    a_rep = aggregate([adv[i] for i in ids], cutoffs)
    o_rep.n_failed = sum(1 for s in orig.values() if s.failed)
    a_rep.n_failed = sum(1 for s in adv.values() if s.failed)
    a_rep.n_skipped = sum(1 for s in adv.values() if s.status == "skipped")
    delta = relative_delta(o_rep, a_rep)
    shift = sum(orig[i].top1 != adv[i].top1 for i in ids) / len(ids) if ids else None
    return RobustnessReport(
        scenario, expectation_of(scenario), o_rep, a_rep, delta, shift,
        verdicts_for(scenario, delta, shift, tolerance, shift_threshold),
        tolerance, shift_threshold,
    )


# -- rendering -------------------------------------------------------------------

def _fmt(v, digits=4):
    return "n/a" if v is None else f"{v:.{digits}f}"


def _markdown(reports) -> str:
    out = []
    for cat in ("cat1", "cat2"):
        group = [r for r in reports if r.scenario.startswith(cat)]
        if not group:
            continue
        cutoffs = group[0].original.cutoffs
        cols = [f"{m}@{k}" for m in METRICS for k in cutoffs]
        title = "same prediction expected" if cat == "cat1" else "different prediction expected"
        out.append(f"### {cat.capitalize()}: {title}\n")
        out.append("| Input Type | " + " | ".join(cols) + " |")
        out.append("|---|" + "---:|" * len(cols))
        rows = [("Original", group[0].original)] + [(LABELS[r.scenario], r.adversarial) for r in group]
        for label, rep in rows:
            cells = [_fmt(rep.table[m][k]) for m in METRICS for k in cutoffs]
            out.append(f"| {label} | " + " | ".join(cells) + " |")
        out.append("")
        for r in group:
            worst = min((d for row in r.delta.values() for d in row.values() if d is not None),
                        default=None)
            line = (f"- {LABELS[r.scenario]}: n={r.adversarial.n_instances}, "
                    f"skipped={r.adversarial.n_skipped}, "
                    f"failed={r.original.n_failed}/{r.adversarial.n_failed}, "
                    f"largest drop={_fmt(None if worst is None else 0.0 - worst * 100, 1)}%, "
                    f"top-1 shift rate={_fmt(r.shift_rate, 3)}")
            if r.verdicts:
                line += f", verdict: {', '.join(r.verdicts)}"
            out.append(line)
        out.append("")
    return "\n".join(out)


def _csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        for m in METRICS:
            for k in r.original.cutoffs:
                w.writerow([
                    r.scenario, r.expectation, m, k,
                    repr(r.original.table[m][k]) if r.original.table[m][k] is not None else "",
                    repr(r.adversarial.table[m][k]) if r.adversarial.table[m][k] is not None else "",
                    repr(r.delta[m][k]) if r.delta[m][k] is not None else "",
                    repr(r.shift_rate) if r.shift_rate is not None else "",
                    r.original.n_instances, r.original.n_failed, r.adversarial.n_failed,
                    r.adversarial.n_skipped, repr(r.tolerance), repr(r.shift_threshold),
                    "|".join(r.verdicts),
                ])
    return buf.getvalue()


def render(reports, fmt: str = "markdown") -> str:
    if isinstance(reports, RobustnessReport):
        reports = [reports]
    if fmt == "json":
        doc = {"schema": "crsadv.report", "version": REPORT_SCHEMA,
               "reports": [r.to_dict() for r in reports]}
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        return _csv(reports)
    if fmt in ("markdown", "md"):
        return _markdown(reports)
    raise ValueError(f"unknown format {fmt!r}")


def parse_json(text: str) -> list[RobustnessReport]:
    doc = json.loads(text)
    return [RobustnessReport.from_dict(d) for d in doc["reports"]]


def parse_csv(text: str) -> list[RobustnessReport]:
    def num(s):
        return float(s) if s != "" else None

    reports: dict[str, dict] = {}
    for row in csv.DictReader(io.StringIO(text)):
        r = reports.setdefault(row["scenario"], {"row": row, "o": {}, "a": {}, "d": {}})
        m, k = row["metric"], int(row["cutoff"])
        r["o"].setdefault(m, {})[k] = num(row["original"])
        r["a"].setdefault(m, {})[k] = num(row["adversarial"])
        r["d"].setdefault(m, {})[k] = num(row["delta"])
    out = []
    for scenario, r in reports.items():
        row = r["row"]
        n = int(row["n_instances"])
        out.append(RobustnessReport(
            scenario, row["expectation"],
            MetricReport(n, int(row["n_failed_original"]), r["o"], 0),
            MetricReport(n, int(row["n_failed_adversarial"]), r["a"], int(row["n_skipped"])),
            r["d"], num(row["shift_rate"]),
            [v for v in row["verdicts"].split("|") if v],
            float(row["tolerance"]), float(row["shift_threshold"]),
        ))
    return out
