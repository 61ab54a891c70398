"""Pre-trained word-vector tables: binary/text loaders, n-gram synthesis.

Tables can be multi-gigabyte, so both loaders stream in a single pass and
accept a vocabulary filter that keeps only the tokens a corpus needs.
Values are held at 32-bit precision exactly as stored in the file; the text
writer emits the shortest decimal form that reads back bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

__all__ = [
    "EmbeddingTable",
    "NgramTable",
    "load_word2vec_binary",
    "load_text_vectors",
    "save_text_vectors",
    "load_ngram_table",
    "extract_ngrams",
    "lookup_or_synthesize",
    "make_resolver",
]


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> float32 vector table.

    ``duplicates`` records tokens that appeared more than once in the source
    file (first occurrence kept).
    """

    dim: int
    vocab: dict[str, int]
    vectors: np.ndarray
    duplicates: tuple[str, ...] = ()

    def __post_init__(self):
        self.vectors.flags.writeable = False

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token in self.vocab

    def lookup(self, token: str):
        """The stored row for ``token``, or None."""
        row = self.vocab.get(token)
        if row is None:
            return None
        return self.vectors[row]

    def tokens(self) -> list[str]:
        """Tokens in row order."""
        ordered = [""] * len(self.vocab)
        for token, row in self.vocab.items():
            ordered[row] = token
        return ordered


@dataclass(frozen=True)
class NgramTable:
    """Character n-gram -> float32 vector table for OOV synthesis.

    Keys carry the '<'/'>' boundary markers and their lengths (markers
    included) lie within [nmin, nmax].
    """

    dim: int
    nmin: int
    nmax: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not (1 <= self.nmin <= self.nmax):
            raise ValueError("need 1 <= nmin <= nmax")
        for key, vec in self.vectors.items():
            if not (self.nmin <= len(key) <= self.nmax):
                raise ValueError(f"n-gram {key!r} outside length bounds")
            if vec.shape != (self.dim,):
                raise ValueError(f"n-gram {key!r} has dim {vec.shape}, want {self.dim}")


def _add_entry(vocab, rows, duplicates, token, vec):
    if token in vocab:
        duplicates.append(token)
        return
    vocab[token] = len(rows)
    rows.append(vec)


def _finish_table(dim, vocab, rows, duplicates):
    if rows:
        vectors = np.vstack(rows)
    else:
        vectors = np.empty((0, dim), dtype=np.float32)
    return EmbeddingTable(dim, vocab, vectors, tuple(duplicates))


def load_word2vec_binary(path, vocab_filter=None) -> EmbeddingTable:
    """Load the original binary format.

    Header line "<count> <dim>\\n", then per entry: token bytes terminated
    by one space, ``dim`` little-endian float32 values, and an optional
    newline.  ``vocab_filter`` (a set) keeps only listed tokens while still
    streaming the whole file once.
    """
    with open(path, "rb") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(f"{path}: malformed header {header[:40]!r}")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{path}: malformed header {header[:40]!r}") from None
        if count < 0 or dim <= 0:
            raise FormatError(f"{path}: nonsensical header counts ({count}, {dim})")

        vocab: dict[str, int] = {}
        rows: list[np.ndarray] = []
        duplicates: list[str] = []
        block = dim * 4
        for i in range(count):
            raw = bytearray()
            while True:
                b = fh.read(1)
                if not b:
                    raise FormatError(f"{path}: truncated at entry {i} of {count}")
                if b == b" ":
                    break
                raw += b
            token = raw.lstrip(b"\n\r").decode("utf-8")
            data = fh.read(block)
            if len(data) < block:
                raise FormatError(f"{path}: truncated vector at entry {i} of {count}")
            if fh.peek(1)[:1] == b"\n":
                fh.read(1)
            if vocab_filter is not None and token not in vocab_filter:
                continue
            vec = np.frombuffer(data, dtype="<f4").copy()
            _add_entry(vocab, rows, duplicates, token, vec)
    return _finish_table(dim, vocab, rows, duplicates)


def load_text_vectors(path, has_header=False, vocab_filter=None) -> EmbeddingTable:
    """Load whitespace-separated text vectors ("token v1 ... vdim" lines).

    ``has_header`` expects a first line "<count> <dim>" (the usual .vec
    convention); headerless files infer dim from the first data line.
    Whitespace-only lines are ignored.
    """
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    duplicates: list[str] = []
    dim = None
    declared = None
    seen = 0
    with open(path, "r", encoding="utf-8") as fh:
        if has_header:
            parts = fh.readline().split()
            try:
                declared, dim = int(parts[0]), int(parts[1])
            except (IndexError, ValueError):
                raise FormatError(f"{path}: malformed header line") from None
            if declared < 0 or dim <= 0:
                raise FormatError(f"{path}: nonsensical header counts")
        for lineno, line in enumerate(fh, start=2 if has_header else 1):
            parts = line.split()
            if not parts:
                continue
            token, fields = parts[0], parts[1:]
            if dim is None:
                dim = len(fields)
                if dim == 0:
                    raise FormatError(f"{path}:{lineno}: no vector values")
            if len(fields) != dim:
                raise FormatError(
                    f"{path}:{lineno}: expected {dim} values, found {len(fields)}"
                )
            seen += 1
            if vocab_filter is not None and token not in vocab_filter:
                continue
            try:
                vec = np.array([np.float32(f) for f in fields], dtype=np.float32)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric vector value") from None
            _add_entry(vocab, rows, duplicates, token, vec)
    if dim is None:
        raise FormatError(f"{path}: no data lines")
    if declared is not None and seen != declared:
        raise FormatError(f"{path}: header declares {declared} entries, found {seen}")
    return _finish_table(dim, vocab, rows, duplicates)


def save_text_vectors(table: EmbeddingTable, path, has_header=True) -> None:
    """Write a table in the text format, bit-exact at 32-bit precision.

    Each value is printed as the shortest decimal that parses back to the
    identical float32.
    """
    with open(path, "w", encoding="utf-8") as fh:
        if has_header:
            fh.write(f"{len(table)} {table.dim}\n")
        for token in table.tokens():
            row = table.vectors[table.vocab[token]]
            fh.write(token)
            for v in row:
                fh.write(" ")
                fh.write(str(float(v)))
            fh.write("\n")


def load_ngram_table(path, nmin=3, nmax=6, has_header=False) -> NgramTable:
    """Load an n-gram vector table from the text format.

    Tokens in the file are the n-gram strings themselves, boundary markers
    included.
    """
    table = load_text_vectors(path, has_header=has_header)
    vectors = {g: table.vectors[row] for g, row in table.vocab.items()}
    return NgramTable(table.dim, nmin, nmax, vectors)


def extract_ngrams(token: str, nmin: int = 3, nmax: int = 6) -> list[str]:
    """Character n-grams of '<token>' in position-major order.

    All contiguous substrings with length in [nmin, nmax], boundary markers
    counting toward the length; the full wrapped word appears whenever it is
    short enough.
    """
    if not token:
        raise ValueError("token must be non-empty")
    if not (1 <= nmin <= nmax):
        raise ValueError("need 1 <= nmin <= nmax")
    wrapped = f"<{token}>"
    grams = []
    for start in range(len(wrapped)):
        for length in range(nmin, nmax + 1):
            end = start + length
            if end > len(wrapped):
                break
            grams.append(wrapped[start:end])
    return grams


def lookup_or_synthesize(table: EmbeddingTable, ngrams: NgramTable | None, token: str):
    """Stored vector, else the sum of known n-gram vectors, else None."""
    row = table.lookup(token)
    if row is not None:
        return row
    if ngrams is None:
        return None
    total = None
    for gram in extract_ngrams(token, ngrams.nmin, ngrams.nmax):
        vec = ngrams.vectors.get(gram)
        if vec is None:
            continue
        total = vec.copy() if total is None else total + vec
    return total


def make_resolver(table: EmbeddingTable, ngrams: NgramTable | None = None):
    """A token -> vector-or-None callable over a table (plus optional n-grams)."""

    def resolve(token: str):
        return lookup_or_synthesize(table, ngrams, token)

    return resolve
