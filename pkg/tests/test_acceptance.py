"""Acceptance checks, one block per criterion.

Each block records PASS or FAIL in the shared table that the terminal summary
prints, so ``pytest tests/test_acceptance.py`` ends with one line per
criterion.  Run this file directly for the same output.
"""
import contextlib
import csv
import json
import math
import random
import re
import subprocess
import sys
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from crsadv import lingo
from crsadv import perturb as P
from crsadv.adapter import (AdapterTimeout, ProtocolError, RecommendRequest, parse_adapter_spec,
                            run_requests, subprocess_query)
from crsadv.corpus import MAX_WORDS, EvalInstance, Turn
from crsadv.metrics import InstanceScore, score
from crsadv.report import FOOLED_BY_CAT1, INSENSITIVE_TO_CAT2, compare

from .conftest import ACCEPTANCE_RESULTS, DATA, FIXTURES, fixture_cmd, make_instance

CUTOFFS = (1, 10, 50)
PINNED_SEED = 14


@contextlib.contextmanager
def criterion(n, name, detail=""):
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE_RESULTS[n] = (name, False, f"{type(exc).__name__}: {str(exc)[:120]}")
        raise
    else:
        ACCEPTANCE_RESULTS.setdefault(n, (name, True, detail))


def timed(fn, limit):
    start = time.perf_counter()
    out = fn()
    elapsed = time.perf_counter() - start
    assert elapsed < limit, f"took {elapsed:.3f}s, limit {limit}s"
    return out


# -- 1. worked examples ----------------------------------------------------------------

C1 = "worked rewrite examples reproduce exactly"


def test_c1_cat1_change(lexicon):
    with criterion(1, C1):
        out = timed(lambda: P.cat1_change(make_instance("I like watching horror movies"), lexicon), 1)
        assert out.answer_adv == "I enjoy watching scary films"


def test_c1_cat2_change_both_modes(lexicon):
    with criterion(1, C1):
        inst = make_instance("I like watching horror movies")
        ant = timed(lambda: P.cat2_change(inst, lexicon, "antonym"), 1)
        neg = timed(lambda: P.cat2_change(inst, lexicon, "negation"), 1)
        assert ant.answer_adv == "I hate watching horror movies"
        assert neg.answer_adv == "I do not like watching horror movies"


def test_c1_cat2_add():
    with criterion(1, C1):
        inst = make_instance("I do like the Exorcist", titles=[("Exorcist", "102")])
        out = timed(lambda: P.cat2_add(inst), 1)
        assert out.answer_adv == "I do like the Exorcist But I'm not in the mood to watch it."


def test_c1_cat1_add(kb):
    with criterion(1, C1):
        inst = make_instance("I like The Last Exorcism", truth=["101"],
                             titles=[("The Last Exorcism", "101")], dialogue_id="exorcism")
        out = timed(lambda: P.perturb_instance(inst, "cat1_add", kb=kb, seed=PINNED_SEED), 1)
        addition = ("The horror genre is a genre that has been growing on me overtime. "
                    "However, I do not like action genre movies like The Fast and Furious.")
        assert out.answer_adv == "I like The Last Exorcism " + addition


# -- 2. metric oracle -------------------------------------------------------------------

def brute_force(truth, ranking, k):
    """Rescan the whole list; no shared code with the library."""
    relevant = set(truth)
    best = None
    for pos in range(len(ranking), 0, -1):
        if ranking[pos - 1] in relevant:
            best = pos
    if best is None or best > k:
        return {"hit": 0.0, "mrr": 0.0, "ndcg": 0.0}
    return {"hit": 1.0, "mrr": 1.0 / best, "ndcg": math.log(2) / math.log(best + 1)}


def test_c2_metric_oracle():
    with criterion(2, "metrics match a brute-force oracle on 1000 random pairs", "1000 pairs"):
        rng = random.Random(2024)
        start = time.perf_counter()
        for _ in range(1000):
            catalog = rng.randint(1, 120)
            ranking = rng.sample(range(catalog), rng.randint(0, min(60, catalog)))
            truth = rng.sample(range(catalog), rng.randint(1, min(4, catalog)))
            values = score(truth, ranking, CUTOFFS).values
            for k in CUTOFFS:
                for m, v in brute_force(truth, ranking, k).items():
                    assert abs(values[f"{m}@{k}"] - v) <= 1e-12, (truth, ranking, m, k)
            assert values["hit@1"] == values["mrr@1"] == values["ndcg@1"]
            for m in ("hit", "mrr", "ndcg"):
                assert values[f"{m}@1"] <= values[f"{m}@10"] <= values[f"{m}@50"]
        elapsed = time.perf_counter() - start
        assert elapsed < 5, f"{elapsed:.2f}s"


# -- 3. negation table -------------------------------------------------------------------

def negation_rows():
    rows = []
    for line in (FIXTURES / "negation_table.tsv").read_text(encoding="utf-8").splitlines():
        if line and not line.startswith("#"):
            rows.append(tuple(line.split("\t")))
    return rows


def test_c3_negation_table(lexicon):
    rows = negation_rows()
    with criterion(3, "negation matches the 50-verb x 3-tense table", f"{len(rows)} sentences"):
        assert len({r[0] for r in rows}) == 50
        assert {r[1] for r in rows} == {"base", "third_singular", "past"}
        assert len(rows) == 150
        wrong = []
        for verb, tense, text, expected in rows:
            tokens = lingo.analyze(text, lexicon)
            negated, changed = lingo.negate(tokens)
            via_edit, _ = lingo.apply_edits(text, [lingo.negation_edit(tokens)])
            if not changed or lingo.detokenize(negated) != expected or via_edit != expected:
                wrong.append((verb, tense, lingo.detokenize(negated)))
        assert not wrong, wrong


# -- 4. category invariants ---------------------------------------------------------------

FILLER = ["I", "really", "like", "love", "watched", "enjoy", "movies", "film", "a", "the", "with",
          "my", "kids", "scary", "funny", "want", "something", "tonight", "and", "but", "hate",
          "comedy", "horror", "action", "drama", "book", "read", "prefer", "great", "story",
          "liked", "saw", "friends", "fast", "not", "do", "really", "good", "old", "new", "."]
GENRE_WORDS = ["horror", "action", "comedy", "drama", "romance", "sci-fi", "animation",
               "thriller", "crime", "fantasy", "mystery", "science fiction"]
INVARIANT_COUNT = {"n": 0}


@st.composite
def instances(draw, kb):
    domain = draw(st.sampled_from(["movie", "book"]))
    pool = [i for i in kb.sorted_ids() if kb.item(i).domain == domain]
    pieces, mentions, pos = [], [], 0
    for _ in range(draw(st.integers(0, 320 if draw(st.booleans()) else 25))):
        if draw(st.integers(0, 9)) == 0:
            item_id = draw(st.sampled_from(pool))
            word = kb.item(item_id).title
            mentions.append((pos, pos + len(word), item_id))
        else:
            word = draw(st.sampled_from(FILLER))
        pieces.append(word)
        pos += len(word) + 1
    text = " ".join(pieces)
    # loaders never emit answers over the limit
    cut = P.truncate_utterance(text)
    mentions = [m for m in mentions if m[1] <= len(cut)]
    answer = Turn("seeker", cut, list(dict.fromkeys(m[2] for m in mentions)), [], mentions)
    chat = " ".join(draw(st.lists(st.sampled_from(GENRE_WORDS), max_size=4)))
    context = [Turn("recommender", f"What do you like? {chat}"), answer]
    truth = draw(st.lists(st.sampled_from(pool), min_size=1, max_size=2, unique=True))
    return EvalInstance(f"g{draw(st.integers(0, 10**6))}", 2, context, answer, truth, domain)


def title_multiset(text, mentions):
    return sorted(text[s:e] for s, e, _ in mentions)


@pytest.fixture(scope="module")
def invariant_tracker():
    INVARIANT_COUNT["n"] = 0
    yield INVARIANT_COUNT


def test_c4_category_invariants(kb, lexicon, invariant_tracker):
    name = "Cat1 invariants, contrast genre and 256-word limit hold on generated instances"

    @settings(max_examples=520, deadline=None, derandomize=True,
              suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
    @given(instances(kb), st.integers(0, 2**31))
    def check(inst, seed):
        invariant_tracker["n"] += 1
        original_truth = list(inst.truth)
        original_items = list(inst.answer.mentioned_items)
        titles = title_multiset(inst.answer.text, inst.answer.mentions)
        for scenario in P.SCENARIOS:
            out = P.perturb_instance(inst, scenario, lexicon, kb, seed)
            assert len(out.answer_adv.split()) <= MAX_WORDS
            assert out.expectation == P.expectation_of(scenario)
            if scenario.startswith("cat1"):
                assert inst.truth == original_truth
                assert inst.answer.mentioned_items == original_items
                assert title_multiset(out.answer_adv, out.mentions_adv) == titles
                for (s, e, item), (s0, e0, item0) in zip(out.mentions_adv, inst.answer.mentions):
                    assert item == item0
                    assert out.answer_adv[s:e] == inst.answer.text[s0:e0]
            if scenario == "cat1_add":
                assert out.answer_adv.startswith(inst.answer.text)
                if not out.skipped:
                    mentioned = P.conversation_genres(inst, kb)
                    target = kb.genre_of(inst.truth[0])
                    assert out.meta["target_genre"] == target
                    assert out.meta["contrast_genre"] not in mentioned | {target}

    with criterion(4, name):
        check()
        n = invariant_tracker["n"]
        assert n >= 500, f"only {n} instances generated"
        ACCEPTANCE_RESULTS[4] = (name, True, f"{n} instances x 4 scenarios")


# -- 5. determinism -----------------------------------------------------------------------

def cli(*args, cwd=None):
    proc = subprocess.run([sys.executable, "-m", "crsadv", *map(str, args)], cwd=cwd,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus") / "corpus.jsonl"
    cli("ingest", "--format", "redial", DATA / "toy_redial.jsonl", "--out", out,
        "--kb", DATA / "toy_kb.json")
    return out


def test_c5_determinism(tmp_path, corpus_file):
    with criterion(5, "perturb and evaluate outputs are byte-identical across runs and workers"):
        kb = DATA / "toy_kb.json"
        for run in ("a", "b"):
            cli("perturb", "--corpus", corpus_file, "--scenario", "all", "--seed", 42,
                "--kb", kb, "--out-dir", tmp_path / run)
        for s in P.SCENARIOS:
            name = f"perturbed_{s}.jsonl"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        perturbed = [tmp_path / "a" / f"perturbed_{s}.jsonl" for s in P.SCENARIOS]
        for workers in (1, 4):
            cli("evaluate", "--corpus", corpus_file, "--kb", kb, "--perturbed", *perturbed,
                "--workers", workers, "--out-dir", tmp_path / f"w{workers}")
        for name in ["original", *P.SCENARIOS]:
            f = f"scores_{name}.csv"
            assert (tmp_path / "w1" / f).read_bytes() == (tmp_path / "w4" / f).read_bytes()


# -- 6. end-to-end toy benchmark -------------------------------------------------------------

ORACLE_STOP = set("a an the and or of in on at to for with from by is are was were be i you it "
                  "my me s t this that de la le".split())
NEGATIVE = re.compile(
    r"(?:\b(?:do|does|did) not|\b(?:don't|doesn't|didn't|never|not))"
    r" (?:\w+ )?(?:like|likes|liked|love|loves|loved|enjoy|enjoys|enjoyed|want|wants|wanted"
    r"|prefer|prefers|preferred)\b"
    r"|\b(?:hate|hates|hated|dislike|dislikes|disliked|detest|detests|detested|loathe|loathes"
    r"|loathed|despise|despises|despised|avoid|avoids|avoided|refuse|refuses|refused|reject"
    r"|rejects|rejected)\b")


def hand_score(text, kb):
    """Score every item as a person would by hand.

    +3 per shared title word, +1 per genre of the item named in the text,
    excluded if a dislike phrase precedes its genre or title in a sentence.
    """
    low = text.lower().replace("’", "'")
    words = set(re.findall(r"[a-z0-9]+", low)) - ORACLE_STOP

    def named(phrase, where):
        return re.search(r"(?<![a-z0-9_])" + re.escape(phrase.lower()) + r"(?![a-z0-9_])", where)

    banned_genres, banned_items = set(), set()
    for sentence in re.split(r"[.!?\n]", low):
        for cue in NEGATIVE.finditer(sentence):
            after = sentence[cue.end():]
            banned_genres |= {g for g in kb.genres if named(g, after)}
            banned_items |= {i for i, it in kb.items.items() if named(it.title, after)}
    said = {g for g in kb.genres if named(g, low)}
    scores = {}
    for item_id, item in kb.items.items():
        if item_id in banned_items or banned_genres & set(item.genres):
            scores[item_id] = float("-inf")
        else:
            title_words = set(re.findall(r"[a-z0-9]+", item.title.lower())) - ORACLE_STOP
            scores[item_id] = 3 * len(title_words & words) + len(said & set(item.genres))
    return scores


def hand_ranking(text, kb):
    scores = hand_score(text, kb)

    def key(i):
        return (-scores[i], 0 if i.isdigit() else 1, int(i) if i.isdigit() else 0, i)
    return sorted(scores, key=key)


def read_scores(path):
    with open(path, encoding="utf-8") as f:
        return {row["instance_id"]: row for row in csv.DictReader(f)}


# rankings worked out by hand from the toy KB: (instance, truth rank, top-1)
HAND_WORKED = {
    "original": {"toy01#3": (4, "101"), "toy02#3": (1, "201"), "toy03#3": (2, "701"),
                 "toy04#3": (2, "301")},
    "cat2_change": {"toy01#3": (35, "201")},
}


def test_c6_end_to_end(tmp_path, corpus_file, kb):
    name = "toy benchmark runs end to end; Cat2-Change shifts; rankings match hand scoring"
    with criterion(6, name):
        start = time.perf_counter()
        kb_path = DATA / "toy_kb.json"
        corpus = tmp_path / "corpus.jsonl"
        cli("ingest", "--format", "redial", DATA / "toy_redial.jsonl", "--out", corpus,
            "--kb", kb_path)
        cli("perturb", "--corpus", corpus, "--scenario", "all", "--seed", 0, "--kb", kb_path,
            "--out-dir", tmp_path)
        perturbed = [tmp_path / f"perturbed_{s}.jsonl" for s in P.SCENARIOS]
        cli("evaluate", "--corpus", corpus, "--kb", kb_path, "--perturbed", *perturbed,
            "--out-dir", tmp_path)
        cli("report", "--scores-dir", tmp_path, "--out-dir", tmp_path)
        elapsed = time.perf_counter() - start
        assert elapsed < 30, f"{elapsed:.1f}s"

        report = {r["scenario"]: r for r in
                  json.loads((tmp_path / "report.json").read_text())["reports"]}
        assert set(report) == set(P.SCENARIOS)
        shift = report["cat2_change"]["shift_rate"]
        assert shift >= 0.5, shift
        for s in ("cat1_change", "cat1_add"):
            r = report[s]
            fooled = any(d is not None and d < -r["tolerance"]
                         for row in r["delta"].values() for d in row.values())
            assert (FOOLED_BY_CAT1 in r["verdicts"]) == fooled
        for s in ("cat2_change", "cat2_add"):
            r = report[s]
            assert (INSENSITIVE_TO_CAT2 in r["verdicts"]) == (r["shift_rate"] < r["shift_threshold"])

        # every ranking the harness scored agrees with hand scoring
        corpus_rows = [json.loads(line) for line in corpus.read_text().splitlines()]
        originals = {}
        for d in corpus_rows:
            turns = d["turns"]
            for i, t in enumerate(turns):
                if t["speaker"] == "recommender" and t["ground_truth"]:
                    originals[f"{d['id']}#{i}"] = (turns[:i], t["ground_truth"])
        answers = {"original": {iid: None for iid in originals}}
        for s, path in zip(P.SCENARIOS, perturbed):
            rows = [json.loads(line) for line in path.read_text().splitlines()[1:]]
            answers[s] = {r["instance_id"]: r["answer_adv"] for r in rows}
        checked = 0
        for run, adv in answers.items():
            scores = read_scores(tmp_path / f"scores_{run}.csv")
            for iid, (context, truth) in originals.items():
                last = max(i for i, t in enumerate(context) if t["speaker"] == "seeker")
                texts = [t["text"] for i, t in enumerate(context) if i != last]
                answer = context[last]["text"] if adv[iid] is None else adv[iid]
                ranking = hand_ranking("\n".join([*texts, answer]), kb)[:50]
                rank = next((p for p, item in enumerate(ranking, 1) if item in truth), None)
                row = scores[iid]
                assert row["top1"] == ranking[0], (run, iid)
                assert row["rank"] == (str(rank) if rank else ""), (run, iid)
                if iid in HAND_WORKED.get(run, {}):
                    assert (rank, ranking[0]) == HAND_WORKED[run][iid], (run, iid)
                checked += 1
        assert checked == 100
        ACCEPTANCE_RESULTS[6] = (name, True, f"{elapsed:.1f}s, Cat2-Change shift {shift:.2f}, "
                                             f"{checked} rankings checked")


# -- 7. report arithmetic ----------------------------------------------------------------------

def fixed_hits(n_hit, n_total):
    out = []
    for n in range(n_total):
        v = 1.0 if n < n_hit else 0.0
        out.append(InstanceScore(f"i{n}", 1 if v else None,
                                 {f"{m}@{k}": v for m in ("hit", "mrr", "ndcg") for k in CUTOFFS},
                                 "t" if v else "x"))
    return out


def test_c7_report_arithmetic():
    with criterion(7, "relative delta from hit@1 0.2271 -> 0.1119 is -0.5073; identity gives 0"):
        rep = compare(fixed_hits(2271, 10000), fixed_hits(1119, 10000), "cat1_change")
        assert abs(rep.original.table["hit"][1] - 0.2271) < 1e-12
        assert abs(rep.adversarial.table["hit"][1] - 0.1119) < 1e-12
        assert abs(rep.delta["hit"][1] - (-0.5073)) <= 1e-4
        rng = random.Random(7)
        xs = [score(["t"], rng.sample(["t", *map(str, range(70))], rng.randint(1, 60)),
                    instance_id=f"x{n}") for n in range(200)]
        for s in P.SCENARIOS:
            same = compare(xs, xs, s)
            assert all(d == 0.0 for row in same.delta.values() for d in row.values())
            assert same.shift_rate == 0.0


# -- 8. adapter protocol ------------------------------------------------------------------------

def test_c8_adapter_protocol():
    with criterion(8, "echo, duplicate and timeout adapter paths; harness keeps going"):
        req = RecommendRequest("q1", [{"speaker": "seeker", "text": "hi"}], "horror please", 50)
        assert subprocess_query(req, fixture_cmd("echo_adapter.py")).items == ["104", "101", "102"]
        with pytest.raises(ProtocolError):
            subprocess_query(req, fixture_cmd("bad_adapter.py", "duplicate"))
        with pytest.raises(AdapterTimeout):
            subprocess_query(req, fixture_cmd("bad_adapter.py", "slow"), timeout=0.5)
        requests = [RecommendRequest(f"{tag}{n}", [], "x", 50)
                    for n, tag in enumerate(["ok", "slow", "ok", "ok", "slow", "ok"])]
        factory = parse_adapter_spec("cmd:" + fixture_cmd("bad_adapter.py", "slow", "slow"),
                                     timeout=0.5)
        results = run_requests(requests, factory, workers=2)
        assert len(results) == 6
        assert all(isinstance(results[r.instance_id], AdapterTimeout)
                   for r in requests if r.instance_id.startswith("slow"))
        assert all(results[r.instance_id].items == ["101", "102"]
                   for r in requests if r.instance_id.startswith("ok"))


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-q", "-p", "no:cacheprovider",
                         "-W", "ignore::pytest.PytestAssertRewriteWarning"]))
