"""Offline item knowledge base: item genres, genre descriptions, genre members.

The snapshot is a JSON file::

    {"items":  [{"id", "title", "domain", "genres": [...]}, ...],
     "genres": {name: {"description": str, "members": [item ids]}}}

An item's first genre is its primary genre.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

DOMAINS = ("movie", "book")


class KBError(ValueError):
    pass


class UnknownItem(KeyError):
    pass


class NoEligibleGenre(LookupError):
    pass


class EmptyGenre(LookupError):
    pass


def item_sort_key(item_id: str):
    """Numeric ids sort numerically and before non-numeric ones."""
    s = str(item_id)
    return (0, int(s), "") if s.isdigit() else (1, 0, s)


@dataclass(frozen=True)
class Item:
    id: str
    title: str
    domain: str
    genres: tuple[str, ...]


@dataclass(frozen=True)
class Genre:
    name: str
    description: str
    members: tuple[str, ...]


@dataclass(eq=False)
class KnowledgeBase:
    items: dict[str, Item] = field(default_factory=dict)
    genres: dict[str, Genre] = field(default_factory=dict)

    def __contains__(self, item_id) -> bool:
        return str(item_id) in self.items

    def item(self, item_id) -> Item:
        try:
            return self.items[str(item_id)]
        except KeyError:
            raise UnknownItem(item_id) from None

    def genre_of(self, item_id) -> str:
        return self.item(item_id).genres[0]

    def description(self, genre: str) -> str:
        return self.genres[genre].description

    def sorted_ids(self) -> list[str]:
        return sorted(self.items, key=item_sort_key)

    def domains(self) -> set[str]:
        return {it.domain for it in self.items.values()}

    def genres_in_domain(self, domain: str | None) -> list[str]:
        names = sorted(self.genres)
        if domain is None:
            return names
        return [g for g in names
                if any(self.items[m].domain == domain for m in self.genres[g].members)]

    def mentioned_genres(self, text: str) -> set[str]:
        """Genre names that occur as whole words in ``text``."""
        low = text.lower()
        return {g for g in self.genres if re.search(rf"(?<!\w){re.escape(g.lower())}(?!\w)", low)}

    def contrast_genre(self, conversation_genres, target: str, rng: random.Random,
                       domain: str | None = None) -> str:
        excluded = set(conversation_genres) | {target}
        eligible = [g for g in self.genres_in_domain(domain) if g not in excluded]
        if not eligible:
            raise NoEligibleGenre(f"no genre outside {sorted(excluded)}")
        return rng.choice(eligible)

    def sample_item(self, genre: str, exclude, rng: random.Random,
                    domain: str | None = None) -> Item:
        if genre not in self.genres:
            raise KBError(f"unknown genre {genre!r}")
        exclude = {str(x) for x in exclude}
        pool = [m for m in sorted(self.genres[genre].members, key=item_sort_key)
                if m not in exclude and (domain is None or self.items[m].domain == domain)]
        if not pool:
            raise EmptyGenre(genre)
        return self.items[rng.choice(pool)]

    def to_dict(self) -> dict:
        return {
            "items": [{"id": it.id, "title": it.title, "domain": it.domain,
                       "genres": list(it.genres)} for it in self.items.values()],
            "genres": {g.name: {"description": g.description, "members": list(g.members)}
                       for g in self.genres.values()},
        }


def kb_from_dict(data: dict) -> KnowledgeBase:
    problems = []
    kb = KnowledgeBase()
    for raw in data.get("items", []):
        try:
            item = Item(str(raw["id"]), raw["title"], raw.get("domain", "movie"),
                        tuple(raw["genres"]))
        except (KeyError, TypeError) as exc:
            raise KBError(f"malformed item {raw!r}: missing {exc}") from None
        if item.id in kb.items:
            problems.append(f"duplicate item id {item.id}")
        if item.domain not in DOMAINS:
            problems.append(f"item {item.id}: bad domain {item.domain!r}")
        if not item.genres:
            problems.append(f"item {item.id}: no genres")
        kb.items[item.id] = item
    for name, raw in data.get("genres", {}).items():
        desc = str(raw.get("description", "")).strip()
        if not desc or desc[-1] not in ".!?":
            problems.append(f"genre {name!r}: description must be one sentence ending in punctuation")
        kb.genres[name] = Genre(name, desc, tuple(str(m) for m in raw.get("members", [])))

    for item in kb.items.values():
        for g in item.genres:
            if g not in kb.genres:
                problems.append(f"item {item.id}: unknown genre {g!r}")
            elif item.id not in kb.genres[g].members:
                problems.append(f"item {item.id}: missing from members of {g!r}")
    for genre in kb.genres.values():
        for m in genre.members:
            if m not in kb.items:
                problems.append(f"genre {genre.name!r}: unknown member {m}")
            elif genre.name not in kb.items[m].genres:
                problems.append(f"genre {genre.name!r}: member {m} does not list it")
    if problems:
        raise KBError("invalid knowledge base:\n  " + "\n  ".join(problems))
    return kb


def load_kb(path) -> KnowledgeBase:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise KBError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return kb_from_dict(data)


def bundled_kb() -> KnowledgeBase:
    text = resources.files("crsadv.data").joinpath("toy_kb.json").read_text(encoding="utf-8")
    return kb_from_dict(json.loads(text))
