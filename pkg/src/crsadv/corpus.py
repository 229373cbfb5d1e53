"""Dialogue corpora: loaders, the normalized corpus format, instance extraction.

Loaders replace ``@<id>`` item markers with the item title.  The machine
readable ids survive in ``Turn.mentioned_items`` and the character span of
each substituted title is kept in ``Turn.mentions`` so later rewrites can
leave titles alone.
"""
from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .knowledge import KnowledgeBase

logger = logging.getLogger(__name__)

MAX_WORDS = 256
SPEAKERS = ("seeker", "recommender")
SPLITS = ("train", "valid", "test")
SPLIT_RATIO = (8, 1, 1)
CORPUS_SCHEMA = 1

_REDIAL_MARKER = re.compile(r"@(\d+)")
_GENERIC_MARKER = re.compile(r"@([A-Za-z0-9_]+)")


class CorpusError(ValueError):
    def __init__(self, message: str, path=None, lineno: int | None = None):
        self.path = path
        self.lineno = lineno
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}".strip())


@dataclass
class Turn:
    speaker: str
    text: str
    mentioned_items: list[str] = field(default_factory=list)
    ground_truth: list[str] = field(default_factory=list)
    mentions: list[tuple[int, int, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "speaker": self.speaker,
            "text": self.text,
            "mentioned_items": list(self.mentioned_items),
            "ground_truth": list(self.ground_truth),
            "mentions": [list(m) for m in self.mentions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        if d.get("speaker") not in SPEAKERS:
            raise CorpusError(f"bad speaker {d.get('speaker')!r}")
        return cls(
            d["speaker"],
            d["text"],
            [str(x) for x in d.get("mentioned_items", [])],
            [str(x) for x in d.get("ground_truth", [])],
            [(int(s), int(e), str(i)) for s, e, i in d.get("mentions", [])],
        )

    @property
    def protected_spans(self) -> list[tuple[int, int]]:
        return [(s, e) for s, e, _ in self.mentions]


@dataclass
class Dialogue:
    id: str
    domain: str
    turns: list[Turn]

    def to_dict(self) -> dict:
        return {"id": self.id, "domain": self.domain, "turns": [t.to_dict() for t in self.turns]}

    @classmethod
    def from_dict(cls, d: dict) -> "Dialogue":
        return cls(str(d["id"]), d.get("domain", "movie"), [Turn.from_dict(t) for t in d["turns"]])


@dataclass
class EvalInstance:
    dialogue_id: str
    turn_index: int
    context: list[Turn]
    answer: Turn
    truth: list[str]
    domain: str = "movie"

    @property
    def instance_id(self) -> str:
        return f"{self.dialogue_id}#{self.turn_index}"

    @property
    def answer_index(self) -> int:
        for i in range(len(self.context) - 1, -1, -1):
            if self.context[i].speaker == "seeker":
                return i
        raise ValueError("instance has no seeker turn")

    def to_dict(self) -> dict:
        return {
            "dialogue_id": self.dialogue_id,
            "turn_index": self.turn_index,
            "domain": self.domain,
            "context": [t.to_dict() for t in self.context],
            "truth": list(self.truth),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalInstance":
        context = [Turn.from_dict(t) for t in d["context"]]
        inst = cls(d["dialogue_id"], int(d["turn_index"]), context, context[0],
                   [str(x) for x in d["truth"]], d.get("domain", "movie"))
        inst.answer = context[inst.answer_index]
        return inst


# -- text helpers ------------------------------------------------------------

def truncate_utterance(text: str, limit: int = MAX_WORDS) -> str:
    """Keep at most ``limit`` whitespace-delimited words; spacing is preserved."""
    words = list(re.finditer(r"\S+", text))
    if len(words) <= limit:
        return text
    return text[: words[limit - 1].end()]


def _substitute(text, titles, marker, where):
    """Replace item markers by titles; returns (text, mentioned ids, spans)."""
    out = []
    ids = []
    spans = []
    pos = 0
    length = 0
    for m in marker.finditer(text):
        item_id = m.group(1)
        title = titles.get(item_id)
        if not title:
            logger.warning("%s: unknown item id %s, mention dropped", where, item_id)
            continue
        chunk = text[pos:m.start()]
        out.append(chunk)
        length += len(chunk)
        spans.append((length, length + len(title), item_id))
        out.append(title)
        length += len(title)
        pos = m.end()
        if item_id not in ids:
            ids.append(item_id)
    out.append(text[pos:])
    return "".join(out), ids, spans


def _make_turn(speaker, raw_text, titles, marker, where, kb):
    text, ids, spans = _substitute(raw_text, titles, marker, where)
    cut = truncate_utterance(text)
    if cut != text:
        spans = [s for s in spans if s[1] <= len(cut)]
        ids = [i for i in ids if any(s[2] == i for s in spans)]
        text = cut
    truth = []
    if speaker == "recommender":
        truth = list(ids)
        if kb is not None:
            missing = [i for i in truth if i not in kb]
            if missing:
                logger.warning("%s: ground truth %s not in knowledge base, dropped", where, missing)
            truth = [i for i in truth if i in kb]
    return Turn(speaker, text, ids, truth, spans)


def _read_json_records(path):
    """Yield (lineno, record) from a JSON array file or a JSON-lines file."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"malformed JSON: {exc.msg}", path, exc.lineno) from None
        for i, rec in enumerate(data):
            yield i + 1, rec
        return
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"malformed JSON line: {exc.msg}", path, lineno) from None


# -- loaders -----------------------------------------------------------------

def load_redial(path, kb: KnowledgeBase | None = None) -> list[Dialogue]:
    """Load the REDIAL JSON-lines export."""
    dialogues = []
    for lineno, conv in _read_json_records(path):
        where = f"{path}:{lineno}"
        try:
            messages = conv["messages"]
            seeker_id = conv["initiatorWorkerId"]
            conv_id = str(conv["conversationId"])
        except (KeyError, TypeError) as exc:
            raise CorpusError(f"missing field {exc}", path, lineno) from None
        mentions = conv.get("movieMentions") or {}
        if isinstance(mentions, list):
            mentions = {}
        titles = {}
        for k, v in mentions.items():
            k = str(k)
            if not v and kb is not None and k in kb:
                v = kb.item(k).title
            if v:
                titles[k] = v
        turns = []
        for msg in messages:
            speaker = "seeker" if msg.get("senderWorkerId") == seeker_id else "recommender"
            turns.append(_make_turn(speaker, msg.get("text", ""), titles, _REDIAL_MARKER, where, kb))
        if not turns:
            logger.warning("%s: conversation %s has no messages, skipped", where, conv_id)
            continue
        dialogues.append(Dialogue(conv_id, "movie", turns))
    return dialogues


def load_opendialkg(path, kb: KnowledgeBase | None = None) -> list[Dialogue]:
    """Load an OpenDialKG JSON export, keeping recommendation dialogues only.

    Each record: ``{"dialogue_id", "task", "domain", "items": {id: title},
    "messages": [{"sender": "user"|"assistant", "message": str}]}``.
    Messages of type ``action`` (knowledge-graph walks) are ignored.
    """
    dialogues = []
    for lineno, rec in _read_json_records(path):
        where = f"{path}:{lineno}"
        if not isinstance(rec, dict) or "messages" not in rec:
            raise CorpusError("record without messages", path, lineno)
        task = str(rec.get("task", "recommendation")).lower()
        if task != "recommendation":
            continue
        domain = str(rec.get("domain", "movie")).lower().rstrip("s")
        if domain not in ("movie", "book"):
            raise CorpusError(f"bad domain {rec.get('domain')!r}", path, lineno)
        titles = {str(k): v for k, v in (rec.get("items") or {}).items() if v}
        turns = []
        for msg in rec["messages"]:
            if msg.get("type", "chat") != "chat":
                continue
            sender = msg.get("sender")
            if sender not in ("user", "assistant"):
                raise CorpusError(f"bad sender {sender!r}", path, lineno)
            speaker = "seeker" if sender == "user" else "recommender"
            text = msg.get("message", msg.get("text", ""))
            turns.append(_make_turn(speaker, text, titles, _GENERIC_MARKER, where, kb))
        if not turns:
            continue
        dialogue_id = str(rec.get("dialogue_id", rec.get("id", lineno)))
        dialogues.append(Dialogue(dialogue_id, domain, turns))
    return dialogues


LOADERS = {"redial": load_redial, "opendialkg": load_opendialkg}


def dump_corpus(dialogues, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for d in dialogues:
            f.write(json.dumps(d.to_dict(), ensure_ascii=False) + "\n")


def load_corpus(path) -> list[Dialogue]:
    """Read a normalized corpus file (one Dialogue per line)."""
    out = []
    seen = set()
    for lineno, rec in _read_json_records(path):
        try:
            d = Dialogue.from_dict(rec)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"bad dialogue record: {exc}", path, lineno) from None
        if d.id in seen:
            raise CorpusError(f"duplicate dialogue id {d.id}", path, lineno)
        seen.add(d.id)
        out.append(d)
    return out


# -- instances and splits ----------------------------------------------------

def extract_instances(dialogues, last_only: bool = False) -> list[EvalInstance]:
    """One instance per recommendation turn that follows at least one seeker turn."""
    out = []
    for d in dialogues:
        found = []
        last_seeker = None
        for i, turn in enumerate(d.turns):
            if turn.speaker == "recommender" and turn.ground_truth and last_seeker is not None:
                context = d.turns[:i]
                found.append(EvalInstance(d.id, i, context, context[last_seeker],
                                          list(turn.ground_truth), d.domain))
            if turn.speaker == "seeker":
                last_seeker = i
        if last_only:
            found = found[-1:]
        out.extend(found)
    return out


def apportion(n: int, ratio=SPLIT_RATIO) -> list[int]:
    """Largest-remainder apportionment of ``n`` units over ``ratio``."""
    total = sum(ratio)
    quotas = [n * r / total for r in ratio]
    counts = [math.floor(q) for q in quotas]
    rest = n - sum(counts)
    order = sorted(range(len(ratio)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def split(instances, seed: int) -> dict[str, str]:
    """Dialogue-grouped 8:1:1 split; returns ``{instance_id: split}``."""
    ids = sorted({inst.dialogue_id for inst in instances})
    random.Random(seed).shuffle(ids)
    counts = apportion(len(ids))
    assign = {}
    pos = 0
    for name, c in zip(SPLITS, counts):
        for did in ids[pos:pos + c]:
            assign[did] = name
        pos += c
    return {inst.instance_id: assign[inst.dialogue_id] for inst in instances}
