"""Text normalization, paragraph segmentation, tokenization, stop-word removal.

Every retrieval backend shares this pipeline so that a query and a corpus
statement are always compared on identically prepared token lists.  All
functions are pure; the corpus is an immutable list of :class:`Statement`.
"""

from __future__ import annotations

import importlib.resources
import re
import unicodedata
from dataclasses import dataclass, field

__all__ = [
    "Statement",
    "normalize_text",
    "segment_paragraphs",
    "tokenize",
    "load_stoplist",
    "default_stoplist",
    "build_corpus",
]

_NEWLINE_RUN = re.compile(r"\n+")
_BLANK_LINE_RUN = re.compile(r"\n[ \t]*\n(?:[ \t]*\n)*")


@dataclass(frozen=True)
class Statement:
    """One corpus paragraph: the unit every backend ranks.

    ``id`` is the paragraph's position in the corpus (dense from 0), ``raw``
    the segment text as extracted, ``tokens`` the filtered lowercase tokens.
    ``tokens`` may be empty when the paragraph contains only stop words.
    """

    id: int
    raw: str
    tokens: tuple[str, ...] = field(default_factory=tuple)

    def with_tokens(self, tokens) -> "Statement":
        return Statement(self.id, self.raw, tuple(tokens))


def normalize_text(raw: str) -> str:
    """Lowercase all cased letters; perform no other transformation."""
    return raw.lower()


def segment_paragraphs(raw: str, blank_lines: bool = False) -> list[Statement]:
    """Split text into paragraph statements.

    By default one or more consecutive newlines is a boundary; with
    ``blank_lines=True`` a boundary requires at least one blank line, so
    single line breaks stay inside a paragraph.  Whitespace-only segments
    are discarded and ids are assigned densely in document order.
    """
    splitter = _BLANK_LINE_RUN if blank_lines else _NEWLINE_RUN
    statements = []
    for segment in splitter.split(raw):
        segment = segment.strip()
        if segment:
            statements.append(Statement(id=len(statements), raw=segment))
    return statements


def _strip_edge_punctuation(token: str) -> str:
    # Unicode P* stripped from both edges; currency and other symbols stay.
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(raw: str, stops: frozenset[str] = frozenset()) -> list[str]:
    """Split lowercased text into filtered tokens.

    Splits on whitespace, strips punctuation from token edges (interior
    punctuation such as decimal points survives), drops empty results and
    stop words.  No stemming or lemmatization.  Input is expected to be
    lowercase already; it is lowercased again defensively so no output
    token ever carries an uppercase letter.
    """
    tokens = []
    for piece in raw.lower().split():
        token = _strip_edge_punctuation(piece)
        if token and token not in stops:
            tokens.append(token)
    return tokens


def load_stoplist(path) -> frozenset[str]:
    """Read a stoplist file: one word per line, '#' comments allowed."""
    words = set()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            word = line.split("#", 1)[0].strip()
            if word:
                words.add(word.lower())
    return frozenset(words)


def default_stoplist() -> frozenset[str]:
    """The packaged English stoplist (revision pinned by the test suite)."""
    ref = importlib.resources.files("semsearch.data").joinpath("stopwords_en.txt")
    words = set()
    for line in ref.read_text(encoding="utf-8").splitlines():
        word = line.split("#", 1)[0].strip()
        if word:
            words.add(word.lower())
    return frozenset(words)


def build_corpus(raw: str, stops: frozenset[str], blank_lines: bool = False) -> list[Statement]:
    """Segment ``raw`` and tokenize every statement with the shared rules."""
    return [
        stmt.with_tokens(tokenize(normalize_text(stmt.raw), stops))
        for stmt in segment_paragraphs(raw, blank_lines=blank_lines)
    ]
