"""Token-ID sentences to initial state matrices.

A deterministic whitespace/punctuation tokenizer stands in for a subword
vocabulary so every experiment is self-contained; pre-tokenized ID files
are accepted for runs against imported weights.  The embedding itself is
factorized: a low-dimensional token table followed by a projection to the
hidden dimension, with an optional positional table added after projection.
"""

import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .encoder import truncated_normal

UNK, MASK, SEP = "[UNK]", "[MASK]", "[SEP]"
RESERVED = (UNK, MASK, SEP)

_WORD = re.compile(r"[a-z0-9]+")


class TokenizationError(ValueError):
    pass


def split_text(text: str) -> list:
    """Lowercased word pieces; reserved markers like [SEP] pass through whole."""
    out = []
    for chunk in text.split():
        if chunk in RESERVED:
            out.append(chunk)
        else:
            out.extend(_WORD.findall(chunk.lower()))
    return out


@dataclass(frozen=True)
class Vocabulary:
    ids: dict  # token -> contiguous id, reserved tokens first

    def __post_init__(self):
        if sorted(self.ids.values()) != list(range(len(self.ids))):
            raise ValueError("ids must be contiguous 0..V-1")
        for tok in RESERVED:
            if tok not in self.ids:
                raise ValueError(f"reserved token {tok} missing")

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def unk_id(self) -> int:
        return self.ids[UNK]

    @property
    def mask_id(self) -> int:
        return self.ids[MASK]

    @property
    def sep_id(self) -> int:
        return self.ids[SEP]


def build_vocab(corpus, max_size: int) -> Vocabulary:
    """Frequency-ranked vocabulary (ties alphabetical), reserved tokens first."""
    if max_size <= len(RESERVED):
        raise ValueError(f"max_size must exceed {len(RESERVED)} reserved tokens")
    counts = Counter()
    n_lines = 0
    for line in corpus:
        n_lines += 1
        counts.update(t for t in split_text(line) if t not in RESERVED)
    if n_lines == 0:
        raise TokenizationError("empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    tokens = list(RESERVED) + [t for t, _ in ranked[: max_size - len(RESERVED)]]
    return Vocabulary(ids={t: i for i, t in enumerate(tokens)})


def save_vocab(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok, i in sorted(vocab.ids.items(), key=lambda kv: kv[1]):
            fh.write(f"{tok}\t{i}\n")


def load_vocab(path) -> Vocabulary:
    ids = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                tok, i = line.rstrip("\n").split("\t")
                ids[tok] = int(i)
    return Vocabulary(ids=ids)


def tokenize(text: str, vocab: Vocabulary, n_tokens: int) -> np.ndarray:
    """Exactly n_tokens IDs: OOV maps to [UNK]; short input right-pads with [UNK]."""
    if n_tokens < 1:
        raise ValueError("n_tokens must be >= 1")
    pieces = split_text(text)
    if not pieces:
        raise TokenizationError("empty text")
    ids = [vocab.ids.get(tok, vocab.unk_id) for tok in pieces[:n_tokens]]
    ids.extend([vocab.unk_id] * (n_tokens - len(ids)))
    return np.asarray(ids, dtype=np.int64)


@dataclass(frozen=True)
class EmbeddingParams:
    token_table: np.ndarray  # (V, E)
    projection: np.ndarray   # (E, N_h)
    positional: np.ndarray   # (P_max, N_h)
    use_positional: bool = True

    def __post_init__(self):
        v, e = self.token_table.shape
        e2, h = self.projection.shape
        p, h2 = self.positional.shape
        if e != e2 or h != h2:
            raise ValueError("token_table, projection and positional dims inconsistent")
        if e > h:
            raise ValueError("embedding_dim must be <= hidden_dim (factorized reduction)")

    @property
    def vocab_size(self) -> int:
        return self.token_table.shape[0]

    @property
    def max_positions(self) -> int:
        return self.positional.shape[0]


def init_embedding_params(vocab_size: int, embedding_dim: int, hidden_dim: int,
                          max_positions: int, seed: int,
                          use_positional: bool = True) -> EmbeddingParams:
    """Same clipped-normal scheme as the encoder weights."""
    rng = np.random.default_rng(seed)
    return EmbeddingParams(
        token_table=truncated_normal(rng, (vocab_size, embedding_dim)),
        projection=truncated_normal(rng, (embedding_dim, hidden_dim)),
        positional=truncated_normal(rng, (max_positions, hidden_dim)),
        use_positional=use_positional,
    )


def embed(ids, params: EmbeddingParams) -> np.ndarray:
    """x_0 = u(s): row i is tokenTable[id_i] @ projection (+ positional[i])."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1 or len(ids) < 1:
        raise ValueError("ids must be a non-empty 1-d sequence")
    if ids.min() < 0 or ids.max() >= params.vocab_size:
        raise ValueError(f"token id out of range [0, {params.vocab_size})")
    if len(ids) > params.max_positions:
        raise ValueError(f"sentence length {len(ids)} exceeds {params.max_positions} positions")
    x0 = params.token_table[ids].astype(np.float64) @ params.projection
    if params.use_positional:
        x0 = x0 + params.positional[: len(ids)]
    return x0


def load_pretokenized(path) -> list:
    """One sentence per line, space-separated decimal token IDs."""
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                sentences.append(np.asarray([int(t) for t in line.split()], dtype=np.int64))
    return sentences
