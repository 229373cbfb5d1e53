# Rank-based metrics on hand-made rankings, then a paired comparison.
from crsadv.metrics import aggregate, score
from crsadv.report import compare, render

truth = ["t"]
rankings = {
    "first":  ["t", "a", "b"],
    "third":  ["a", "b", "t"],
    "absent": ["a", "b", "c"],
}
for name, ranking in rankings.items():
    s = score(truth, ranking, instance_id=name)
    print(name, s.rank, {k: round(v, 3) for k, v in s.values.items() if k.endswith("@10")})

# the adversarial run pushes every truth down two places
original = [score(truth, r, instance_id=n) for n, r in rankings.items()]
shifted = [score(truth, ["x", "y", *r], instance_id=n) for n, r in rankings.items()]
print(aggregate(original).table["mrr"])
print(aggregate(shifted).table["mrr"])

report = compare(original, shifted, "cat1_change")
print(report.verdicts)  # truth fell, so a meaning-preserving rewrite fooled the model
print(render([report], "markdown"))
