"""The four adversarial rewrites of a seeker's last answer.

=============  ==============================================  ===================
scenario       rewrite                                         expected behaviour
=============  ==============================================  ===================
cat1_change    verbs and nouns -> closest synonyms             same prediction
cat1_add       genre description + dislike of another genre    same prediction
cat2_change    main verb -> antonym, or negated                different prediction
cat2_add       contradictory sentence appended                 different prediction
=============  ==============================================  ===================
"""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field

from . import lingo
from .corpus import EvalInstance, MAX_WORDS, truncate_utterance
from .knowledge import EmptyGenre, KnowledgeBase, NoEligibleGenre, UnknownItem
from .lexicon import Lexicon, bundled_lexicon

SCENARIOS = ("cat1_change", "cat1_add", "cat2_change", "cat2_add")
SAME = "same_prediction"
DIFFERENT = "different_prediction"
CAT2_MODES = ("antonym", "negation", "auto")
PERTURBED_SCHEMA = 1

DESIRE_VERBS = frozenset({"like", "love", "enjoy", "want", "prefer"})
DEFAULT_TEMPLATES = {
    "movie": "But I'm not in the mood to watch it.",
    "book": "But I'm not in the mood to read it.",
    "generic": "But that is not what I want at all.",
}
DISLIKE_TEMPLATE = "However, I do not like {genre} genre {kind} like {title}."
_PLURAL_KIND = {"movie": "movies", "book": "books"}


def normalize_scenario(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    if key not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
    return key


def expectation_of(scenario: str) -> str:
    return SAME if scenario.startswith("cat1") else DIFFERENT


@dataclass
class PerturbedInstance:
    base: EvalInstance
    scenario: str
    answer_adv: str
    expectation: str
    edits: list[lingo.Edit] = field(default_factory=list)
    skipped: bool = False
    reason: str | None = None
    mentions_adv: list[tuple[int, int, str]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def instance_id(self) -> str:
        return self.base.instance_id

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "scenario": self.scenario,
            "expectation": self.expectation,
            "answer": self.base.answer.text,
            "answer_adv": self.answer_adv,
            "skipped": self.skipped,
            "reason": self.reason,
            "edits": [e.to_dict() for e in self.edits],
            "mentions_adv": [list(m) for m in self.mentions_adv],
            "meta": self.meta,
            "base": self.base.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbedInstance":
        return cls(
            base=EvalInstance.from_dict(d["base"]),
            scenario=d["scenario"],
            answer_adv=d["answer_adv"],
            expectation=d["expectation"],
            edits=[lingo.Edit.from_dict(e) for e in d.get("edits", [])],
            skipped=d.get("skipped", False),
            reason=d.get("reason"),
            mentions_adv=[(int(s), int(e), str(i)) for s, e, i in d.get("mentions_adv", [])],
            meta=d.get("meta", {}),
        )


def _skip(inst: EvalInstance, scenario: str, reason: str) -> PerturbedInstance:
    return PerturbedInstance(inst, scenario, inst.answer.text, expectation_of(scenario),
                             skipped=True, reason=reason, mentions_adv=list(inst.answer.mentions))


def _finish(inst, scenario, edits, meta=None) -> PerturbedInstance:
    answer = inst.answer
    text, spans = lingo.apply_edits(answer.text, edits, answer.protected_spans)
    cut = truncate_utterance(text)
    mentions = [(s, e, m[2]) for (s, e), m in zip(spans, answer.mentions) if e <= len(cut)]
    return PerturbedInstance(inst, scenario, cut, expectation_of(scenario), list(edits),
                             mentions_adv=mentions, meta=dict(meta or {}))


def _word_count(text: str) -> int:
    return len(text.split())


# -- Cat1 ----------------------------------------------------------------------

def synonym_edits(tokens, lexicon: Lexicon, max_replacements: int | None = None) -> list[lingo.Edit]:
    edits = []
    for tok in tokens:
        if tok.protected or tok.lemma is None:
            continue
        cat = tok.tag.category
        if cat == "verb":
            syn = lexicon.synonym(tok.lemma, "verb")
            new = lingo.inflect(syn, tok.tag.tense) if syn else None
        elif cat == "noun":
            syn = lexicon.synonym(tok.lemma, "noun")
            new = (lingo.pluralize(syn) if tok.tag.plural else syn) if syn else None
        else:
            continue
        if not new or new.lower() == tok.surface.lower():
            continue
        edits.append(lingo.Edit("synonym", tok.start, tok.end, tok.surface,
                                lingo.match_case(tok.surface, new)))
        if max_replacements is not None and len(edits) >= max_replacements:
            break
    return edits


def cat1_change(inst: EvalInstance, lexicon: Lexicon,
                max_replacements: int | None = None) -> PerturbedInstance:
    """Swap every verb and noun for its closest synonym, keeping verb tense and noun number."""
    answer = inst.answer
    tokens = lingo.analyze(answer.text, lexicon, answer.protected_spans)
    edits = synonym_edits(tokens, lexicon, max_replacements)
    # multi-word synonyms must not push item titles past the word limit
    base_words = _word_count(answer.text)
    while edits and base_words + sum(_word_count(e.replacement) - 1 for e in edits) > MAX_WORDS:
        grow = [e for e in edits if _word_count(e.replacement) > 1]
        if not grow:
            break
        edits.remove(grow[-1])
    if not edits:
        return _skip(inst, "cat1_change", "NoSynonym")
    return _finish(inst, "cat1_change", edits)


def conversation_genres(inst: EvalInstance, kb: KnowledgeBase) -> set[str]:
    """Genres named in the context text or carried by items mentioned in it."""
    found = kb.mentioned_genres("\n".join(t.text for t in inst.context))
    for turn in inst.context:
        for item_id in turn.mentioned_items:
            if item_id in kb:
                found.update(kb.item(item_id).genres)
    return found


def cat1_add(inst: EvalInstance, kb: KnowledgeBase, rng: random.Random) -> PerturbedInstance:
    """Append the target genre's description and a dislike of an unrelated genre."""
    try:
        target = kb.genre_of(inst.truth[0])
    except UnknownItem:
        return _skip(inst, "cat1_add", "UnknownItem")
    mentioned = {i for t in inst.context for i in t.mentioned_items}
    try:
        contrast = kb.contrast_genre(conversation_genres(inst, kb), target, rng, domain=inst.domain)
    except NoEligibleGenre:
        return _skip(inst, "cat1_add", "NoEligibleGenre")
    try:
        other = kb.sample_item(contrast, mentioned | set(inst.truth), rng, domain=inst.domain)
    except EmptyGenre:
        return _skip(inst, "cat1_add", "EmptyGenre")
    dislike = DISLIKE_TEMPLATE.format(genre=contrast, kind=_PLURAL_KIND.get(inst.domain, "movies"),
                                      title=other.title)
    addition = " " + kb.description(target) + " " + dislike
    end = len(inst.answer.text)
    edit = lingo.Edit("add_details", end, end, "", addition)
    meta = {"target_genre": target, "contrast_genre": contrast, "contrast_item": other.id}
    return _finish(inst, "cat1_add", [edit], meta)


# -- Cat2 ----------------------------------------------------------------------

def antonym_edit(tokens, lexicon: Lexicon) -> lingo.Edit | None:
    found = lingo.main_verb(tokens)
    if found is None:
        return None
    i, ptag = found
    tok = tokens[i]
    if ptag.category != "verb":
        return None
    ant = lexicon.antonym(tok.lemma, "verb")
    if ant is None:
        return None
    new = lingo.match_case(tok.surface, lingo.inflect(ant, ptag.tense))
    return lingo.Edit("antonym", tok.start, tok.end, tok.surface, new)


def cat2_change(inst: EvalInstance, lexicon: Lexicon, mode: str = "auto") -> PerturbedInstance:
    """Flip the answer's meaning via the main verb's antonym or a negation."""
    if mode not in CAT2_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    answer = inst.answer
    tokens = lingo.analyze(answer.text, lexicon, answer.protected_spans)
    if lingo.main_verb(tokens) is None:
        return _skip(inst, "cat2_change", "NoVerb")
    if lingo.is_negated(tokens):
        return _skip(inst, "cat2_change", "AlreadyNegated")
    edit = None
    if mode in ("antonym", "auto"):
        edit = antonym_edit(tokens, lexicon)
        if edit is None and mode == "antonym":
            return _skip(inst, "cat2_change", "NoAntonym")
    if edit is None:
        edit = lingo.negation_edit(tokens)
    return _finish(inst, "cat2_change", [edit], {"mode": edit.kind})


def expresses_desire(tokens) -> bool:
    """A desire verb that no earlier negation in its sentence cancels."""
    negated = False
    for tok in tokens:
        if tok.surface in ".!?":
            negated = False
            continue
        if lingo.is_negation(tok):
            negated = True
        elif (tok.tag.category == "verb" and not tok.protected
              and tok.lemma in DESIRE_VERBS and not negated):
            return True
    return False


def cat2_add(inst: EvalInstance, templates: dict | None = None,
             lexicon: Lexicon | None = None) -> PerturbedInstance:
    """Append a sentence that contradicts the answer."""
    templates = {**DEFAULT_TEMPLATES, **(templates or {})}
    answer = inst.answer
    if lexicon is None:
        lexicon = bundled_lexicon()
    tokens = lingo.analyze(answer.text, lexicon, answer.protected_spans)
    desire = bool(answer.mentioned_items) and expresses_desire(tokens)
    key = inst.domain if desire and inst.domain in templates else "generic"
    end = len(answer.text)
    edit = lingo.Edit("contradiction", end, end, "", " " + templates[key])
    return _finish(inst, "cat2_add", [edit], {"template": key})


# -- corpus level --------------------------------------------------------------

def instance_rng(seed: int, dialogue_id: str, turn_index: int) -> random.Random:
    """Independent RNG per instance, so results do not depend on processing order."""
    key = f"{seed}\x1f{dialogue_id}\x1f{turn_index}".encode("utf-8")
    return random.Random(int.from_bytes(hashlib.sha256(key).digest()[:8], "big"))


def perturb_instance(inst, scenario, lexicon=None, kb=None, seed=0, cat2_mode="auto",
                     templates=None, max_replacements=None) -> PerturbedInstance:
    scenario = normalize_scenario(scenario)
    if scenario == "cat1_change":
        return cat1_change(inst, lexicon, max_replacements)
    if scenario == "cat1_add":
        if kb is None:
            raise ValueError("cat1_add needs a knowledge base")
        return cat1_add(inst, kb, instance_rng(seed, inst.dialogue_id, inst.turn_index))
    if scenario == "cat2_change":
        return cat2_change(inst, lexicon, cat2_mode)
    return cat2_add(inst, templates, lexicon)


def perturb_corpus(instances, scenario, lexicon=None, kb=None, seed=0, cat2_mode="auto",
                   templates=None, max_replacements=None) -> list[PerturbedInstance]:
    scenario = normalize_scenario(scenario)
    if scenario in ("cat1_change", "cat2_change") and lexicon is None:
        raise ValueError(f"{scenario} needs a lexicon")
    if scenario == "cat1_add" and kb is None:
        raise ValueError("cat1_add needs a knowledge base")
    return [perturb_instance(inst, scenario, lexicon, kb, seed, cat2_mode, templates,
                             max_replacements) for inst in instances]


# -- files ---------------------------------------------------------------------

def dump_perturbed(results, path, scenario: str, seed: int, **header) -> None:
    head = {"schema": "crsadv.perturbed", "version": PERTURBED_SCHEMA,
            "scenario": scenario, "seed": seed, **header, "count": len(results)}
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(head, ensure_ascii=False) + "\n")
        for r in results:
            f.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def load_perturbed(path) -> tuple[dict, list[PerturbedInstance]]:
    with open(path, encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise ValueError(f"{path}: empty perturbed file")
    header = json.loads(lines[0])
    if header.get("schema") != "crsadv.perturbed":
        raise ValueError(f"{path}: not a perturbed-instances file")
    return header, [PerturbedInstance.from_dict(json.loads(line)) for line in lines[1:]]

