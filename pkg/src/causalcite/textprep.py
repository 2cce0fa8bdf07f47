"""Confounder text preparation: mediator removal and tokenization."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable

_NUMBER = re.compile(
    r"(?:\d+(?:[.,]\d+)*|\.\d+)(?:\s*%|(?:st|nd|rd|th)(?![^\W\d_]))?",
    re.IGNORECASE,
)
_TOKEN = re.compile(r"[^\W_]+")


@dataclass(frozen=True, slots=True)
class CleanedText:
    paper_id: str
    text: str
    tokens: tuple[str, ...]


def read_blocklist(path=None) -> list[str]:
    """Phrases from a blocklist file; the bundled default when ``path`` is None."""
    if path is None:
        raw = resources.files("causalcite.data").joinpath("blocklist.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    phrases = []
    for line in raw.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            phrases.append(line)
    return phrases


class MediatorRemover:
    """Strips numbers and performance phrases from free text."""

    def __init__(self, phrases: Iterable[str]):
        self.phrases = tuple(dict.fromkeys(p.strip() for p in phrases if p.strip()))
        if self.phrases:
            # longest first so "outperforms" wins over "outperform"
            alts = sorted(self.phrases, key=len, reverse=True)
            body = "|".join(r"\s+".join(map(re.escape, p.split())) for p in alts)
            self._phrase = re.compile(rf"(?<![^\W_])(?:{body})(?![^\W_])", re.IGNORECASE)
        else:
            self._phrase = None

    def _once(self, text: str) -> str:
        text = _NUMBER.sub(" ", text)
        if self._phrase is not None:
            text = self._phrase.sub(" ", text)
        return " ".join(text.split())

    def __call__(self, raw: str) -> str:
        out = self._once(raw)
        # removals can splice a new phrase together; iterate to a fixpoint
        while out != raw:
            raw, out = out, self._once(out)
        return out


@lru_cache(maxsize=1)
def default_remover() -> MediatorRemover:
    return MediatorRemover(read_blocklist())


def remove_mediator(raw: str, remover: MediatorRemover | None = None) -> str:
    return (remover or default_remover())(raw)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def paper_text(title: str, abstract: str) -> str:
    return f"{title} {abstract}" if abstract else title


def clean_paper(paper_id: str, title: str, abstract: str,
                remover: MediatorRemover | None = None) -> CleanedText:
    text = remove_mediator(paper_text(title, abstract), remover)
    return CleanedText(paper_id, text, tuple(tokenize(text)))
