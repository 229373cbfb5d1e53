"""Synonym / antonym store backed by a small TSV file.

Format, one entry per line (a header line and ``#`` comments are allowed)::

    lemma <TAB> pos <TAB> syn1|syn2|... <TAB> ant1|ant2|...

List order is significant: index 0 is the closest word and the one the
rewriters pick.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

POS_VALUES = ("noun", "verb", "adjective", "adverb")
HEADER = "lemma\tpos\tsynonyms\tantonyms"


class LexiconError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def _dedupe(words, lemma):
    seen = set()
    out = []
    for w in words:
        key = w.lower()
        if not w or key == lemma or key in seen:
            continue
        seen.add(key)
        out.append(w)
    return out


@dataclass(frozen=True)
class LexiconEntry:
    lemma: str
    pos: str
    synonyms: tuple[str, ...] = ()
    antonyms: tuple[str, ...] = ()


@dataclass(eq=False)
class Lexicon:
    entries: dict[tuple[str, str], LexiconEntry] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        lemma, pos = key
        return (lemma.lower(), pos) in self.entries

    def add(self, lemma: str, pos: str, synonyms=(), antonyms=()) -> LexiconEntry:
        lemma = lemma.strip().lower()
        if pos not in POS_VALUES:
            raise LexiconError(f"bad pos {pos!r} for {lemma!r}")
        if (lemma, pos) in self.entries:
            raise LexiconError(f"duplicate entry ({lemma!r}, {pos!r})")
        entry = LexiconEntry(
            lemma, pos, tuple(_dedupe(synonyms, lemma)), tuple(_dedupe(antonyms, lemma))
        )
        self.entries[(lemma, pos)] = entry
        return entry

    def get(self, lemma: str, pos: str) -> LexiconEntry | None:
        return self.entries.get((lemma.lower(), pos))

    def pos_of(self, lemma: str) -> list[str]:
        """All parts of speech the lexicon knows ``lemma`` under, in POS_VALUES order."""
        lemma = lemma.lower()
        return [p for p in POS_VALUES if (lemma, p) in self.entries]

    def lemmas(self, pos: str) -> set[str]:
        return {lemma for lemma, p in self.entries if p == pos}

    def synonym(self, lemma: str, pos: str) -> str | None:
        entry = self.get(lemma, pos)
        if entry is None or not entry.synonyms:
            return None
        return entry.synonyms[0]

    def antonym(self, lemma: str, pos: str) -> str | None:
        entry = self.get(lemma, pos)
        if entry is None or not entry.antonyms:
            return None
        return entry.antonyms[0]

    def dumps(self) -> str:
        lines = [HEADER]
        for e in self.entries.values():
            lines.append("\t".join([e.lemma, e.pos, "|".join(e.synonyms), "|".join(e.antonyms)]))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def parse_lexicon(text: str) -> Lexicon:
    lex = Lexicon()
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        if lineno == 1 and line.split("\t")[:2] == ["lemma", "pos"]:
            continue
        cols = line.split("\t")
        if len(cols) < 2 or len(cols) > 4:
            raise LexiconError(f"expected 2-4 tab-separated columns, got {len(cols)}", lineno)
        cols += [""] * (4 - len(cols))
        lemma, pos, syns, ants = cols
        if pos not in POS_VALUES:
            raise LexiconError(f"bad pos {pos!r}", lineno)
        try:
            lex.add(lemma, pos, syns.split("|") if syns else (), ants.split("|") if ants else ())
        except LexiconError as exc:
            raise LexiconError(str(exc), lineno) from None
    return lex


def load_lexicon(path) -> Lexicon:
    return parse_lexicon(Path(path).read_text(encoding="utf-8"))


def bundled_lexicon() -> Lexicon:
    text = resources.files("crsadv.data").joinpath("lexicon.tsv").read_text(encoding="utf-8")
    return parse_lexicon(text)
