"""Phrase tables: intent key -> list of surface phrases.

File format, one table per file:

    # comment
    [intent]
    first phrase
    second phrase

Phrase choice is uniform under the book's seeded RNG so runs are replayable.
"""

from __future__ import annotations

import random
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .errors import ConfigurationError


def parse_phrases(text: str) -> dict[str, list[str]]:
    table: dict[str, list[str]] = {}
    current: Optional[str] = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            table.setdefault(current, [])
            continue
        if current is None:
            raise ConfigurationError(f"phrase outside any [intent]: {line!r}")
        table[current].append(line)
    return table


class PhraseBook:
    """Seeded lookup of phrases by intent."""

    def __init__(self, table: Mapping[str, list[str]], seed: int = 0) -> None:
        self._table = {k: list(v) for k, v in table.items()}
        self._rng = random.Random(seed)

    @classmethod
    def from_text(cls, text: str, seed: int = 0) -> "PhraseBook":
        return cls(parse_phrases(text), seed)

    @classmethod
    def from_file(cls, path: Union[str, Path], seed: int = 0) -> "PhraseBook":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), seed)

    @classmethod
    def builtin(cls, name: str = "demo", seed: int = 0) -> "PhraseBook":
        text = resources.files("srs.data.phrases").joinpath(
            f"{name}.phrases").read_text(encoding="utf-8")
        return cls.from_text(text, seed)

    def intents(self) -> list[str]:
        return sorted(self._table)

    def pick(self, intent: str) -> str:
        phrases = self._table.get(intent)
        if not phrases:
            raise ConfigurationError(f"no phrases for intent {intent!r}")
        return self._rng.choice(phrases)
