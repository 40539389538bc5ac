"""Vocabulary, tokenizer and embedding tests."""

import numpy as np
import pytest

from tdlab.embedding import (EmbeddingParams, TokenizationError, build_vocab, embed,
                             init_embedding_params, load_pretokenized, load_vocab,
                             save_vocab, split_text, tokenize)


def test_build_vocab_frequency_order():
    vocab = build_vocab(["a b a"], max_size=10)
    assert {"[UNK]", "[MASK]", "[SEP]", "a", "b"} <= set(vocab.ids)
    assert vocab.ids["a"] < vocab.ids["b"]
    assert sorted(vocab.ids.values()) == list(range(vocab.size))


def test_build_vocab_deterministic():
    corpus = ["the cat sat", "the dog ran", "a cat ran"]
    assert build_vocab(corpus, 20).ids == build_vocab(corpus, 20).ids


def test_build_vocab_hand_counted_fixture():
    # counts: the:2 cat:2 ran:2 sat:1 dog:1 a:1 -> ranked by (-freq, token)
    corpus = ["the cat sat", "the dog ran", "a cat ran"]
    vocab = build_vocab(corpus, 20)
    order = [t for t, _ in sorted(vocab.ids.items(), key=lambda kv: kv[1])]
    assert order == ["[UNK]", "[MASK]", "[SEP]", "cat", "ran", "the", "a", "dog", "sat"]


def test_build_vocab_truncates_to_max_size():
    vocab = build_vocab(["a b c d e f"], max_size=5)
    assert vocab.size == 5  # 3 reserved + 2 most frequent


def test_build_vocab_empty_corpus_rejected():
    with pytest.raises(TokenizationError):
        build_vocab([], max_size=10)


def test_split_text_lowercases_and_strips_punctuation():
    assert split_text("The cat, the DOG!") == ["the", "cat", "the", "dog"]
    assert split_text("one [SEP] two") == ["one", "[SEP]", "two"]


def test_tokenize_direct_lookup():
    vocab = build_vocab(["a b"], 10)
    assert list(tokenize("a b", vocab, 2)) == [vocab.ids["a"], vocab.ids["b"]]


def test_tokenize_oov_and_padding():
    vocab = build_vocab(["a b"], 10)
    assert list(tokenize("a zq", vocab, 2)) == [vocab.ids["a"], vocab.unk_id]
    assert list(tokenize("a", vocab, 4)) == [vocab.ids["a"]] + [vocab.unk_id] * 3


def test_tokenize_truncates_to_prefix():
    words = [f"w{i}" for i in range(40)]
    vocab = build_vocab([" ".join(words)], 60)
    full = [vocab.ids.get(w, vocab.unk_id) for w in words]
    assert list(tokenize(" ".join(words), vocab, 32)) == full[:32]


def test_tokenize_empty_text_rejected():
    vocab = build_vocab(["a"], 10)
    with pytest.raises(TokenizationError):
        tokenize("  ", vocab, 4)


def test_vocab_round_trip(tmp_path):
    vocab = build_vocab(["a b c a"], 10)
    path = tmp_path / "vocab.tsv"
    save_vocab(vocab, path)
    assert load_vocab(path).ids == vocab.ids


# ---------------------------------------------------------------- embed

def hand_params(use_positional=False):
    token_table = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 3.0]])          # V=3, E=2
    projection = np.array([[1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 3.0, 4.0]])  # E=2, H=4
    positional = np.arange(20.0).reshape(5, 4)                            # P=5
    return EmbeddingParams(token_table=token_table, projection=projection,
                           positional=positional, use_positional=use_positional)


def test_embed_manual_matrix_product():
    params = hand_params()
    x0 = embed([0, 1, 2], params)
    expected = np.array([[1.0, 2.0, 0.0, 0.0],
                         [0.0, 0.0, 3.0, 4.0],
                         [2.0, 4.0, 9.0, 12.0]])
    assert np.allclose(x0, expected, atol=1e-15)
    with_pos = embed([0, 1, 2], hand_params(use_positional=True))
    assert np.allclose(with_pos, expected + np.arange(12.0).reshape(3, 4), atol=1e-15)


def test_embed_zero_table_gives_zero_state():
    params = hand_params()
    zeroed = EmbeddingParams(token_table=np.zeros_like(params.token_table),
                             projection=params.projection,
                             positional=params.positional, use_positional=False)
    assert not embed([0, 1, 2], zeroed).any()


def test_embed_repeated_token_identical_rows():
    x0 = embed([2, 0, 2], hand_params())
    assert (x0[0] == x0[2]).all()


def test_embed_linearity_in_token_table():
    params = hand_params()
    scaled = EmbeddingParams(token_table=3.0 * params.token_table,
                             projection=params.projection,
                             positional=params.positional, use_positional=False)
    assert np.allclose(embed([0, 1, 2], scaled), 3.0 * embed([0, 1, 2], params),
                       atol=1e-12)


def test_embed_permutation_permutes_rows():
    params = hand_params()
    ids = np.array([2, 0, 1, 2])
    perm = np.array([3, 1, 0, 2])
    assert (embed(ids[perm], params) == embed(ids, params)[perm]).all()


def test_embed_shape_contract():
    params = init_embedding_params(vocab_size=9, embedding_dim=4, hidden_dim=16,
                                   max_positions=8, seed=0)
    assert embed([0, 1, 2, 3, 4], params).shape == (5, 16)


def test_embed_id_out_of_range():
    with pytest.raises(ValueError):
        embed([0, 3], hand_params())
    with pytest.raises(ValueError):
        embed([0, -1], hand_params())


def test_embed_length_capped_by_positions():
    with pytest.raises(ValueError):
        embed([0] * 6, hand_params())  # P_max = 5


def test_init_embedding_params_clipped_scheme():
    params = init_embedding_params(vocab_size=50, embedding_dim=8, hidden_dim=32,
                                   max_positions=16, seed=3)
    for table in (params.token_table, params.projection, params.positional):
        assert np.abs(table).max() <= 0.04
    again = init_embedding_params(vocab_size=50, embedding_dim=8, hidden_dim=32,
                                  max_positions=16, seed=3)
    assert (params.token_table == again.token_table).all()


def test_embedding_dim_must_not_exceed_hidden():
    with pytest.raises(ValueError):
        EmbeddingParams(token_table=np.zeros((4, 8)), projection=np.zeros((8, 4)),
                        positional=np.zeros((4, 4)))


def test_load_pretokenized(tmp_path):
    path = tmp_path / "ids.txt"
    path.write_text("1 2 3\n\n4 5\n")
    sentences = load_pretokenized(path)
    assert [list(s) for s in sentences] == [[1, 2, 3], [4, 5]]
