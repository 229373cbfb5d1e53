"""hit@k, mrr@k and ndcg@k with a single relevant rank per instance.

The rank ``r`` of an instance is the best (smallest, 1-based) position of
any ground-truth item in the ranking.  Then

    hit@k  = 1            if r <= k
    mrr@k  = 1 / r        if r <= k
    ndcg@k = 1 / log2(r+1) if r <= k

and all three are 0 when no truth item is in the top k.  The ideal DCG of
one relevant item is 1, so no normalisation is needed.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

METRICS = ("hit", "mrr", "ndcg")
DEFAULT_CUTOFFS = (1, 10, 50)
STATUSES = ("ok", "failed", "skipped")


def metric_keys(cutoffs=DEFAULT_CUTOFFS) -> list[str]:
    return [f"{m}@{k}" for m in METRICS for k in cutoffs]


@dataclass
class InstanceScore:
    instance_id: str
    rank: int | None = None
    values: dict[str, float] = field(default_factory=dict)
    top1: str | None = None
    status: str = "ok"

    @property
    def failed(self) -> bool:
        return self.status == "failed"

    @property
    def scored(self) -> bool:
        return self.status == "ok"


def first_rank(truth, ranking) -> int | None:
    wanted = {str(t) for t in truth}
    for pos, item in enumerate(ranking, start=1):
        if str(item) in wanted:
            return pos
    return None


def metric_values(rank: int | None, cutoffs=DEFAULT_CUTOFFS) -> dict[str, float]:
    out = {}
    for k in cutoffs:
        hit = rank is not None and rank <= k
        out[f"hit@{k}"] = 1.0 if hit else 0.0
        out[f"mrr@{k}"] = 1.0 / rank if hit else 0.0
        out[f"ndcg@{k}"] = 1.0 / math.log2(rank + 1) if hit else 0.0
    return {key: out[key] for key in metric_keys(cutoffs)}


def score(truth, ranking, cutoffs=DEFAULT_CUTOFFS, instance_id: str = "") -> InstanceScore:
    """Score one ranking (a list of item ids) against its ground truth."""
    if not truth:
        raise ValueError("truth must be nonempty")
    items = list(getattr(ranking, "items", ranking))
    instance_id = instance_id or getattr(ranking, "instance_id", "")
    rank = first_rank(truth, items)
    return InstanceScore(instance_id, rank, metric_values(rank, cutoffs),
                         str(items[0]) if items else None)


def failed_score(instance_id: str, status: str = "failed") -> InstanceScore:
    return InstanceScore(instance_id, status=status)


@dataclass
class MetricReport:
    n_instances: int
    n_failed: int
    table: dict[str, dict[int, float | None]]
    n_skipped: int = 0

    def value(self, metric: str, k: int) -> float | None:
        return self.table[metric][k]

    @property
    def cutoffs(self) -> list[int]:
        return sorted(next(iter(self.table.values()))) if self.table else []

    def to_dict(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "n_failed": self.n_failed,
            "n_skipped": self.n_skipped,
            "table": {m: {str(k): v for k, v in row.items()} for m, row in self.table.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        table = {m: {int(k): v for k, v in row.items()} for m, row in d["table"].items()}
        return cls(d["n_instances"], d["n_failed"], table, d.get("n_skipped", 0))


def aggregate(scores, cutoffs=DEFAULT_CUTOFFS) -> MetricReport:
    """Mean of every metric over the scored (non-failed, non-skipped) instances."""
    scores = list(scores)
    ok = [s for s in scores if s.scored]
    n_failed = sum(1 for s in scores if s.failed)
    n_skipped = sum(1 for s in scores if s.status == "skipped")
    table = {}
    for m in METRICS:
        row = {}
        for k in cutoffs:
            key = f"{m}@{k}"
            row[k] = math.fsum(s.values[key] for s in ok) / len(ok) if ok else None
        table[m] = row
    return MetricReport(len(ok), n_failed, table, n_skipped)


def write_scores_csv(scores, path, cutoffs=DEFAULT_CUTOFFS) -> None:
    keys = metric_keys(cutoffs)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["instance_id", "status", "rank", "top1", *keys])
        for s in scores:
            vals = [repr(s.values[k]) if s.scored else "" for k in keys]
            w.writerow([s.instance_id, s.status, s.rank if s.rank is not None else "",
                        s.top1 or "", *vals])


def read_scores_csv(path) -> tuple[list[InstanceScore], list[int]]:
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][:4] != ["instance_id", "status", "rank", "top1"]:
        raise ValueError(f"{path}: not a scores file")
    keys = rows[0][4:]
    cutoffs = sorted({int(k.split("@")[1]) for k in keys})
    out = []
    for row in rows[1:]:
        iid, status, rank, top1, *vals = row
        if status not in STATUSES:
            raise ValueError(f"{path}: bad status {status!r}")
        values = {k: float(v) for k, v in zip(keys, vals)} if status == "ok" else {}
        out.append(InstanceScore(iid, int(rank) if rank else None, values, top1 or None, status))
    return out, cutoffs
