"""Rule-based tokenizer, POS tagger, verb morphology and negation.

Everything here is deterministic: a lexicon lookup, a closed-class word
table and a handful of suffix rules.  Accuracy targets the short,
conversational register of recommendation dialogues, not general English.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass, replace
from importlib import resources

from .lexicon import Lexicon

CATEGORIES = ("noun", "verb", "auxiliary", "adjective", "adverb", "pronoun", "other")
TENSES = ("base", "third_singular", "past", "gerund", "past_participle")
PUNCT = frozenset(".,!?")

NEGATION_WORDS = frozenset({"not", "never"})
DETERMINERS = frozenset(
    {"the", "a", "an", "my", "your", "his", "her", "its", "our", "their", "this", "that",
     "these", "those", "some", "any", "every", "each", "no", "another", "more", "most",
     "few", "many", "several", "such"}
)
# "that" also introduces clauses ("movies that scare me"), so it does not force a noun
_NOUN_SLOT = DETERMINERS - {"that"}
INDEFINITE_PRONOUNS = frozenset(
    {"something", "anything", "nothing", "everything", "someone", "anyone", "everyone",
     "somebody", "anybody", "nobody"}
)
_DO_FORMS = {"base": "do", "third_singular": "does", "past": "did"}

_IRREGULAR_PLURALS = {
    "child": "children", "person": "people", "man": "men", "woman": "women",
    "foot": "feet", "tooth": "teeth", "mouse": "mice", "series": "series",
}
_IRREGULAR_SINGULARS = {v: k for k, v in _IRREGULAR_PLURALS.items()}


class NoVerb(ValueError):
    """Raised when a sentence has no verb or auxiliary to operate on."""


@dataclass(frozen=True)
class PosTag:
    category: str
    tense: str | None = None
    plural: bool = False

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if (self.tense is not None) != (self.category in ("verb", "auxiliary")):
            raise ValueError("tense is set exactly for verbs and auxiliaries")
        if self.tense is not None and self.tense not in TENSES:
            raise ValueError(f"unknown tense {self.tense!r}")


UNTAGGED = PosTag("other")


@dataclass(frozen=True)
class Token:
    surface: str
    span: tuple[int, int]
    tag: PosTag = UNTAGGED
    protected: bool = False
    lemma: str | None = None

    @property
    def is_punct(self) -> bool:
        return self.surface in PUNCT

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]


@dataclass(frozen=True)
class Edit:
    """One text rewrite: ``text[start:end]`` (== ``original``) becomes ``replacement``."""

    kind: str
    start: int
    end: int
    original: str
    replacement: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "span": [self.start, self.end],
                "original": self.original, "replacement": self.replacement}

    @classmethod
    def from_dict(cls, d: dict) -> "Edit":
        start, end = d["span"]
        return cls(d["kind"], start, end, d["original"], d["replacement"])


# -- resources ---------------------------------------------------------------

def _read_tsv(name):
    text = resources.files("crsadv.data").joinpath(name).read_text(encoding="utf-8")
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            yield line.split("\t")


@functools.cache
def verb_table() -> dict[str, dict[str, str]]:
    """lemma -> {tense: form} for the shipped verb table."""
    table = {}
    for cols in _read_tsv("verbs.tsv"):
        lemma = cols[0]
        table[lemma] = {"base": lemma, **dict(zip(TENSES[1:], cols[1:5]))}
    return table


@functools.cache
def closed_class() -> dict[str, tuple[str, str, str | None]]:
    """word -> (category, lemma, tense)."""
    out = {}
    for cols in _read_tsv("closed_class.tsv"):
        cols += [""] * (4 - len(cols))
        word, category, lemma, tense = cols[:4]
        out[word] = (category, lemma or word, tense or None)
    return out


# -- morphology --------------------------------------------------------------

_VOWELS = "aeiou"


def _is_cvc(word: str) -> bool:
    # single-syllable consonant-vowel-consonant ending doubles its final consonant
    if len(word) < 3 or len(re.findall(r"[aeiou]+", word)) != 1:
        return False
    a, b, c = word[-3:]
    return a not in _VOWELS and b in _VOWELS and c not in _VOWELS + "wxy"


def _regular(lemma: str, tense: str) -> str:
    if tense == "base":
        return lemma
    if tense == "third_singular":
        if re.search(r"(s|x|z|ch|sh|o)$", lemma):
            return lemma + "es"
        if re.search(r"[^aeiou]y$", lemma):
            return lemma[:-1] + "ies"
        return lemma + "s"
    if tense in ("past", "past_participle"):
        if lemma.endswith("e"):
            return lemma + "d"
        if re.search(r"[^aeiou]y$", lemma):
            return lemma[:-1] + "ied"
        if _is_cvc(lemma):
            return lemma + lemma[-1] + "ed"
        return lemma + "ed"
    if tense == "gerund":
        if lemma.endswith("ie"):
            return lemma[:-2] + "ying"
        if lemma.endswith("e") and not lemma.endswith(("ee", "ye", "oe")) and len(lemma) > 2:
            return lemma[:-1] + "ing"
        if _is_cvc(lemma):
            return lemma + lemma[-1] + "ing"
        return lemma + "ing"
    raise ValueError(f"unknown tense {tense!r}")


def inflect(lemma: str, tense: str) -> str:
    """Inflect a base-form verb; multi-word lemmas inflect their first word."""
    head, sep, rest = lemma.partition(" ")
    key = head.lower()
    table = verb_table()
    form = table[key][tense] if key in table else _regular(key, tense)
    if head[:1].isupper():
        form = form[:1].upper() + form[1:]
    return form + sep + rest


def pluralize(noun: str) -> str:
    head, sep, rest = noun.rpartition(" ")
    word = rest
    low = word.lower()
    if low in _IRREGULAR_PLURALS:
        out = _IRREGULAR_PLURALS[low]
    elif re.search(r"(s|x|z|ch|sh)$", low):
        out = low + "es"
    elif re.search(r"[^aeiou]y$", low):
        out = low[:-1] + "ies"
    else:
        out = low + "s"
    if word[:1].isupper():
        out = out[:1].upper() + out[1:]
    return head + sep + out


def singular_candidates(word: str) -> list[str]:
    low = word.lower()
    if low in _IRREGULAR_SINGULARS:
        return [_IRREGULAR_SINGULARS[low]]
    out = []
    if low.endswith("ies") and len(low) > 4:
        out.append(low[:-3] + "y")
    if low.endswith("es") and len(low) > 3:
        out.append(low[:-2])
    if low.endswith("s") and not low.endswith("ss") and len(low) > 2:
        out.append(low[:-1])
    return out


def _lemma_candidates(word: str, tense: str) -> list[str]:
    if tense == "gerund":
        stem = word[:-3]
        cands = [stem, stem + "e"]
        if len(stem) > 2 and stem[-1] == stem[-2]:
            cands.append(stem[:-1])
        if stem.endswith("y"):
            cands.append(stem[:-1] + "ie")
        return cands
    if tense in ("past", "past_participle"):
        stem = word[:-2]
        cands = [stem, word[:-1]]
        if stem.endswith("i"):
            cands.append(stem[:-1] + "y")
        if len(stem) > 2 and stem[-1] == stem[-2]:
            cands.append(stem[:-1])
        return cands
    return singular_candidates(word)


# -- tokenizer ---------------------------------------------------------------

_CHUNK = re.compile(r"\S+")


def tokenize(text: str, protected_spans=()) -> list[Token]:
    """Whitespace tokenizer that splits off trailing ``. , ! ?``.

    Tokens overlapping any of ``protected_spans`` (``(start, end)`` pairs)
    are flagged protected.
    """
    tokens = []
    for m in _CHUNK.finditer(text):
        chunk, start = m.group(), m.start()
        core = chunk.rstrip(".,!?")
        pieces = []
        if core:
            pieces.append((core, start))
        for i in range(len(core), len(chunk)):
            pieces.append((chunk[i], start + i))
        for surface, s in pieces:
            span = (s, s + len(surface))
            prot = any(s < pe and ps < span[1] for ps, pe in protected_spans)
            tokens.append(Token(surface, span, protected=prot))
    return tokens


def detokenize(tokens) -> str:
    parts = []
    for tok in tokens:
        if parts and not tok.is_punct:
            parts.append(" ")
        parts.append(tok.surface)
    return "".join(parts)


# -- tagger ------------------------------------------------------------------

class _Index:
    def __init__(self, lexicon: Lexicon):
        self.lexicon = lexicon
        self.verb_lemmas = set(verb_table()) | lexicon.lemmas("verb")
        forms: dict[str, tuple[str, str]] = {}
        # iterate tenses outermost so earlier tenses win collisions (read/read)
        for tense in TENSES:
            for lemma in sorted(self.verb_lemmas):
                if " " in lemma:
                    continue
                forms.setdefault(inflect(lemma, tense), (lemma, tense))
        self.verb_forms = forms


@functools.lru_cache(maxsize=16)
def _index(lexicon: Lexicon) -> _Index:
    return _Index(lexicon)


def _norm(surface: str) -> str:
    return surface.lower().replace("’", "'")


def _candidates(word: str, idx: _Index):
    """Possible (category, lemma, tense, plural) readings from lexicon + verb table."""
    out = []
    if word in idx.verb_forms:
        lemma, tense = idx.verb_forms[word]
        out.append(("verb", lemma, tense, False))
    for pos in idx.lexicon.pos_of(word):
        if pos != "verb":
            out.append((pos, word, None, False))
    for cand in singular_candidates(word):
        if ("noun" in idx.lexicon.pos_of(cand)) and cand != word:
            out.append(("noun", cand, None, True))
            break
    return out


def _suffix_rules(word: str, idx: _Index):
    if len(word) > 4 and word.endswith("ing"):
        return "verb", _guess_lemma(word, "gerund", idx), "gerund", False
    if len(word) > 3 and word.endswith("ed"):
        return "verb", _guess_lemma(word, "past", idx), "past", False
    if word.endswith("s") and len(word) > 2:
        for cand in singular_candidates(word):
            if cand in idx.verb_lemmas:
                return "verb", cand, "third_singular", False
    if len(word) > 3 and word.endswith("ly"):
        return "adverb", word, None, False
    if word.endswith("s") and not word.endswith("ss") and len(word) > 3:
        return "noun", singular_candidates(word)[-1], None, True
    return "noun", word, None, False


def _guess_lemma(word: str, tense: str, idx: _Index) -> str:
    cands = _lemma_candidates(word, tense)
    for c in cands:
        if c in idx.verb_lemmas:
            return c
    return cands[0]


_PREFERENCE_AFTER_VERBISH = ("verb", "adjective", "noun", "adverb")
_PREFERENCE_DEFAULT = ("noun", "adjective", "verb", "adverb")


def _choose(cands, prev: Token | None):
    if prev is None:
        order = _PREFERENCE_AFTER_VERBISH
    else:
        pword = _norm(prev.surface)
        pcat = prev.tag.category
        if pword in DETERMINERS:
            order = _PREFERENCE_DEFAULT
        elif pcat in ("pronoun", "auxiliary", "adverb") or pword == "to":
            order = _PREFERENCE_AFTER_VERBISH
        else:
            order = _PREFERENCE_DEFAULT
    by_cat = {}
    for c in cands:
        by_cat.setdefault(c[0], c)
    for cat in order:
        if cat in by_cat:
            return by_cat[cat]
    return cands[0]


def tag(tokens, lexicon: Lexicon) -> list[Token]:
    idx = _index(lexicon)
    table = closed_class()
    out: list[Token] = []
    prev: Token | None = None
    for tok in tokens:
        word = _norm(tok.surface)
        if tok.is_punct:
            new = replace(tok, tag=PosTag("other"), lemma=tok.surface)
            out.append(new)
            prev = None if tok.surface in ".!?" else prev
            continue
        if tok.protected:
            new = replace(tok, tag=PosTag("noun"), lemma=tok.surface)
        elif not re.search(r"[a-z]", word):
            new = replace(tok, tag=PosTag("other"), lemma=tok.surface)
        elif word in table:
            category, lemma, tense = table[word]
            new = replace(tok, tag=PosTag(category, tense), lemma=lemma)
        elif word == "like" and prev is not None and (
            prev.tag.category == "noun" or _norm(prev.surface) in INDEFINITE_PRONOUNS
        ):
            # "movies like X": preposition
            new = replace(tok, tag=PosTag("other"), lemma="like")
        else:
            cands = _candidates(word, idx)
            category, lemma, tense, plural = _choose(cands, prev) if cands else _suffix_rules(word, idx)
            if category == "verb" and prev is not None and _norm(prev.surface) in _NOUN_SLOT:
                # "the show", "my ending": a determiner is followed by a noun
                plural = tense == "third_singular"
                lemma = lemma if plural else word
                category, tense = "noun", None
            new = replace(tok, tag=PosTag(category, tense, plural), lemma=lemma)
        out.append(new)
        prev = new
    return out


def analyze(text: str, lexicon: Lexicon, protected_spans=()) -> list[Token]:
    return tag(tokenize(text, protected_spans), lexicon)


# -- verbs and negation ------------------------------------------------------

def main_verb(tokens) -> tuple[int, PosTag] | None:
    """First lexical verb; failing that the first auxiliary; else None."""
    aux = None
    for i, tok in enumerate(tokens):
        if tok.protected:
            continue
        if tok.tag.category == "verb":
            return i, tok.tag
        if tok.tag.category == "auxiliary" and aux is None:
            aux = (i, tok.tag)
    return aux


def is_negation(tok: Token) -> bool:
    if tok.protected:
        return False
    word = _norm(tok.surface)
    return word in NEGATION_WORDS or word.endswith("n't") or word == "cannot"


def is_negated(tokens) -> bool:
    return any(is_negation(t) for t in tokens)


def match_case(template: str, word: str) -> str:
    """Give ``word`` the capitalization pattern of ``template``."""
    if template.isupper() and len(template) > 1:
        return word.upper()
    if template[:1].isupper():
        return word[:1].upper() + word[1:]
    return word


def _negation_plan(tokens):
    """Return (index, mode, words) describing the single negation to insert.

    mode "after": insert words after tokens[index];
    mode "replace": tokens[index] is replaced by ``words``.
    """
    found = main_verb(tokens)
    if found is None:
        raise NoVerb("no verb to negate")
    i, ptag = found
    tok = tokens[i]
    word = _norm(tok.surface)
    if ptag.category == "auxiliary":
        if word in ("do", "does", "did", "have", "has", "had") and ptag.tense in _DO_FORMS:
            lemma = tok.lemma or word
            return i, "replace", [_DO_FORMS[ptag.tense], "not", lemma]
        return i, "after", ["not"]
    j = i - 1
    while j >= 0 and tokens[j].tag.category == "adverb" and not tokens[j].protected:
        j -= 1
    if j >= 0 and tokens[j].tag.category == "auxiliary" and not tokens[j].protected:
        return j, "after", ["not"]
    lemma = tok.lemma or word
    if ptag.tense == "gerund":
        return i, "replace", ["not", word]
    do = _DO_FORMS.get(ptag.tense, "did")
    return i, "replace", [do, "not", lemma]


def negation_edit(tokens) -> Edit | None:
    """Edit that negates the sentence, or None when it is already negated.

    Raises NoVerb for verbless input.
    """
    if is_negated(tokens):
        if main_verb(tokens) is None:
            raise NoVerb("no verb to negate")
        return None
    i, mode, words = _negation_plan(tokens)
    tok = tokens[i]
    if mode == "after":
        return Edit("negation", tok.end, tok.end, "", " " + " ".join(words))
    words = [match_case(tok.surface, words[0])] + words[1:]
    return Edit("negation", tok.start, tok.end, tok.surface, " ".join(words))


def negate(tokens) -> tuple[list[Token], bool]:
    """Insert one negation into tagged tokens.

    Returns ``(tokens, changed)``; already-negated input comes back
    unchanged with ``changed=False``.  Inserted tokens carry zero-width
    spans at their insertion point.
    """
    tokens = list(tokens)
    if is_negated(tokens):
        if main_verb(tokens) is None:
            raise NoVerb("no verb to negate")
        return tokens, False
    i, mode, words = _negation_plan(tokens)
    tok = tokens[i]
    if mode == "after":
        at = tok.end
        new = [Token("not", (at, at), PosTag("adverb"), lemma="not")]
        return tokens[: i + 1] + new + tokens[i + 1:], True
    at = tok.start
    new = []
    first = match_case(tok.surface, words[0])
    if words[0] == "not":
        new.append(Token(first, (at, at), PosTag("adverb"), lemma="not"))
        new.append(tok)
    else:
        tense = {v: k for k, v in _DO_FORMS.items()}[words[0]]
        new.append(Token(first, (at, at), PosTag("auxiliary", tense), lemma="do"))
        new.append(Token("not", (at, at), PosTag("adverb"), lemma="not"))
        new.append(replace(tok, surface=words[2], tag=PosTag(tok.tag.category, "base")))
    return tokens[:i] + new + tokens[i + 1:], True


def apply_edits(text: str, edits, spans=()) -> tuple[str, list[tuple[int, int]]]:
    """Apply non-overlapping edits; also shift ``spans`` that lie outside them."""
    ordered = sorted(edits, key=lambda e: (e.start, e.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ValueError("overlapping edits")
    parts = []
    pos = 0
    for e in ordered:
        if text[e.start:e.end] != e.original:
            raise ValueError(f"edit does not match text at {e.start}: {e.original!r}")
        parts.append(text[pos:e.start])
        parts.append(e.replacement)
        pos = e.end
    parts.append(text[pos:])

    def shift(x, inclusive):
        # inclusive: zero-width inserts at x land before x (span starts)
        delta = 0
        for e in ordered:
            if e.end < x or (e.end == x and (e.start < e.end or inclusive)):
                delta += len(e.replacement) - (e.end - e.start)
        return x + delta

    new_spans = []
    for s, t in spans:
        if any(e.start < t and s < e.end for e in ordered):
            raise ValueError("edit overlaps a protected span")
        new_spans.append((shift(s, True), shift(t, False)))
    return "".join(parts), new_spans
