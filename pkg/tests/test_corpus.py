import math
import random

import numpy as np
import pytest

from actkit import corpus
from actkit.corpus import (
    AttributeVocab,
    ScriptCorpus,
    SynonymLexicon,
    WeightMatrix,
    binarize_weights,
    build_documents,
    freq_weights,
    load_lexicon,
    load_script_corpus,
    load_vocab,
    load_weights_csv,
    match_count,
    normalize_l1,
    save_lexicon,
    save_script_corpus,
    save_vocab,
    save_weights_csv,
    tfidf_weights,
    tokenize_document,
)


def test_tokenize_basic():
    assert tokenize_document("Wash the cucumber.") == ["wash", "the", "cucumber"]


def test_tokenize_hyphen_split():
    assert tokenize_document("cutting-board") == ["cutting", "board"]


def test_tokenize_empty_and_punct_only():
    assert tokenize_document("") == []
    assert tokenize_document("...!?;") == []


def test_tokenize_strips_all_listed_punctuation():
    assert tokenize_document("(pan), \"lid\"; pot: done!") == [
        "pan", "lid", "pot", "done"]


def test_match_count_single_token():
    toks = tokenize_document("wash the cucumber then wash hands")
    assert match_count("wash", toks) == 2


def test_match_count_ngram_non_overlapping():
    toks = ["cut", "apart", "cut", "apart"]
    assert match_count("cut apart", toks) == 2
    # greedy scan consumes positions, occurrences cannot share tokens
    assert match_count("cut apart", ["cut", "apart", "apart"]) == 1


def test_match_count_synonym_mode():
    lex = SynonymLexicon({("wash", "verb"): ("rinse",)})
    toks = ["rinse", "then", "wash"]
    assert match_count("wash", toks, lex, mode="synonym", kind="activity") == 2
    # literal mode ignores the lexicon
    assert match_count("wash", toks, lex, mode="literal", kind="activity") == 1


def test_match_count_synonym_pos_must_match_kind():
    lex = SynonymLexicon({("wash", "noun"): ("rinse",)})
    toks = ["rinse", "then", "wash"]
    # "wash" as activity looks up verbs only, so the noun row is ignored
    assert match_count("wash", toks, lex, mode="synonym", kind="activity") == 1


def test_match_count_token_positions_counted_once():
    # synonym equal to the label must not double count
    lex = SynonymLexicon({("wash", "verb"): ("wash", "rinse")})
    assert match_count("wash", ["wash"], lex, mode="synonym", kind="activity") == 1


def test_match_count_label_missing_from_lexicon_degrades_to_literal():
    lex = SynonymLexicon({("stir", "verb"): ("mix",)})
    toks = ["mix", "and", "wash"]
    assert match_count("wash", toks, lex, mode="synonym", kind="activity") == 1


def test_match_count_bad_mode():
    with pytest.raises(ValueError):
        match_count("wash", ["wash"], mode="fuzzy")


def test_match_count_monotone_under_appending():
    rng = random.Random(0)
    alphabet = ["wash", "cut", "board", "pan", "stir", "the"]
    lex = SynonymLexicon({("wash", "verb"): ("rinse", "clean up")})
    for _ in range(200):
        toks = [rng.choice(alphabet) for _ in range(rng.randrange(0, 12))]
        extra = [rng.choice(alphabet + ["rinse", "clean", "up"])
                 for _ in range(rng.randrange(0, 6))]
        for label, kind in [("wash", "activity"), ("cut board", "object")]:
            before = match_count(label, toks, lex, "synonym", kind)
            after = match_count(label, toks + extra, lex, "synonym", kind)
            assert after >= before


def test_match_count_literal_at_most_synonym():
    rng = random.Random(1)
    lex = SynonymLexicon({("wash", "verb"): ("rinse",), ("pan", "noun"): ("skillet",)})
    words = ["wash", "rinse", "pan", "skillet", "then", "the"]
    for _ in range(200):
        toks = [rng.choice(words) for _ in range(rng.randrange(0, 15))]
        for label, kind in [("wash", "activity"), ("pan", "object")]:
            lit = match_count(label, toks, lex, "literal", kind)
            syn = match_count(label, toks, lex, "synonym", kind)
            assert lit <= syn


def _toy_documents():
    # three composites; "board" appears in two documents
    corpus_obj = ScriptCorpus({
        "salad": [["wash the cucumber", "cut it on the board",
                   "wash the board"]],
        "tea": [["boil water", "pour water"]],
        "sandwich": [["cut the bread on the board"]],
    })
    return build_documents(corpus_obj)


def _toy_vocab():
    return AttributeVocab.from_pairs([
        ("wash", "activity"), ("cut", "activity"), ("boil", "activity"),
        ("board", "object"), ("water", "object"),
    ])


def test_build_documents_concatenates_in_order():
    docs = _toy_documents()
    assert docs["tea"] == ["boil", "water", "pour", "water"]


def test_freq_weights_counts():
    W = freq_weights(_toy_documents(), _toy_vocab())
    assert W.composites == ("salad", "tea", "sandwich")
    salad = dict(zip(W.attributes, W.row("salad")))
    assert salad == {"wash": 2, "cut": 1, "boil": 0, "board": 2, "water": 0}


def test_tfidf_known_values():
    # frozen oracle: count * ln(num_docs / doc_freq), natural log
    docs = _toy_documents()
    W = tfidf_weights(docs, _toy_vocab())
    salad = dict(zip(W.attributes, W.row("salad")))
    # "wash" appears only in salad: 2 * ln(3/1)
    assert salad["wash"] == pytest.approx(2 * math.log(3.0), abs=1e-12)
    # "board" appears in salad (twice) and sandwich: 2 * ln(3/2)
    assert salad["board"] == pytest.approx(2 * math.log(1.5), abs=1e-12)
    # attribute matching nowhere gets zero rather than a zero division
    assert salad["water"] * 0 == 0
    vocab2 = AttributeVocab.from_pairs([("knife", "object")])
    W2 = tfidf_weights(docs, vocab2)
    assert np.all(W2.values == 0)


def test_tfidf_four_times_ln_three_halves():
    # count 4 in one document, attribute present in 2 of 3 documents
    docs = {
        "a": ["peel"] * 4,
        "b": ["peel", "stir"],
        "c": ["stir"],
    }
    vocab = AttributeVocab.from_pairs([("peel", "activity")])
    W = tfidf_weights(docs, vocab)
    assert W.values[0, 0] == pytest.approx(4 * math.log(1.5), abs=1e-12)


def test_tfidf_single_document_collapses_to_zero():
    docs = {"only": ["wash", "wash"]}
    vocab = AttributeVocab.from_pairs([("wash", "activity")])
    W = tfidf_weights(docs, vocab)
    assert np.all(W.values == 0)


def test_tfidf_zero_count_stays_zero():
    rng = random.Random(2)
    words = ["wash", "cut", "pan", "the"]
    for _ in range(50):
        docs = {f"d{i}": [rng.choice(words) for _ in range(rng.randrange(1, 10))]
                for i in range(3)}
        vocab = _toy_vocab()
        F = freq_weights(docs, vocab)
        T = tfidf_weights(docs, vocab)
        assert np.all((F.values == 0) <= (T.values == 0))


def test_freq_scales_with_document_repetition():
    # concatenating a document with itself doubles every count
    docs = _toy_documents()
    doubled = {k: v + v for k, v in docs.items()}
    W1 = freq_weights(docs, _toy_vocab())
    W2 = freq_weights(doubled, _toy_vocab())
    assert np.array_equal(W2.values, 2 * W1.values)


def test_normalize_l1_rows_sum_to_one():
    W = freq_weights(_toy_documents(), _toy_vocab())
    N = normalize_l1(W)
    sums = N.values.sum(axis=1)
    assert np.allclose(sums, 1.0)
    assert N.normalized
    assert N.empty_rows == ()


def test_normalize_l1_flags_empty_rows():
    W = WeightMatrix(np.array([[0.0, 0.0], [1.0, 3.0]]), ("a", "b"), ("x", "y"))
    N = normalize_l1(W)
    assert N.empty_rows == ("a",)
    assert np.array_equal(N.values[0], [0.0, 0.0])
    assert np.allclose(N.values[1], [0.25, 0.75])


def test_normalize_idempotent():
    W = freq_weights(_toy_documents(), _toy_vocab())
    N1 = normalize_l1(W)
    N2 = normalize_l1(N1)
    assert np.allclose(N1.values, N2.values)


def test_binarize_weights():
    W = WeightMatrix(np.array([[0.0, 2.0, 5.0], [0.0, 0.0, 0.0]]),
                     ("a", "b"), ("x", "y", "z"))
    B = binarize_weights(W)
    assert np.allclose(B.values[0], [0.0, 0.5, 0.5])
    assert B.empty_rows == ("b",)
    assert B.normalized


def test_weight_matrix_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        WeightMatrix(np.array([[-1.0]]), ("a",), ("x",))
    with pytest.raises(ValueError):
        WeightMatrix(np.array([[np.nan]]), ("a",), ("x",))


def test_vocab_validation():
    with pytest.raises(ValueError):
        AttributeVocab.from_pairs([("wash", "activity"), ("wash", "object")])
    with pytest.raises(ValueError):
        AttributeVocab.from_pairs([("wash", "verbish")])
    vocab = AttributeVocab.from_pairs([("Cutting-Board", "object")])
    assert vocab.labels == ("cutting board",)


def test_vocab_hash_changes_with_content():
    v1 = AttributeVocab.from_pairs([("wash", "activity")])
    v2 = AttributeVocab.from_pairs([("wash", "activity"), ("pan", "object")])
    assert v1.content_hash() != v2.content_hash()


def test_multiword_label_matching_in_documents():
    docs = {"d": tokenize_document("put it on the cutting-board now")}
    vocab = AttributeVocab.from_pairs([("cutting board", "object")])
    W = freq_weights(docs, vocab)
    assert W.values[0, 0] == 1


# ---------------------------------------------------------------------------
# file round trips

def test_script_corpus_round_trip(tmp_path):
    c = ScriptCorpus({
        "salad": [["wash the cucumber", "cut it"], ["peel the carrot"]],
        "tea": [["boil water"]],
    })
    save_script_corpus(c, tmp_path / "corpus")
    loaded = load_script_corpus(tmp_path / "corpus")
    assert loaded.scenarios == c.scenarios


def test_load_script_corpus_rejects_empty(tmp_path):
    (tmp_path / "corpus" / "salad").mkdir(parents=True)
    (tmp_path / "corpus" / "salad" / "seq0.txt").write_text("\n\n")
    with pytest.raises(ValueError):
        load_script_corpus(tmp_path / "corpus")


def test_lexicon_round_trip(tmp_path):
    lex = SynonymLexicon({("wash", "verb"): ("rinse", "clean"),
                          ("pan", "noun"): ("skillet",)})
    save_lexicon(lex, tmp_path / "lex.tsv")
    loaded = load_lexicon(tmp_path / "lex.tsv")
    assert loaded.rows == lex.rows


def test_lexicon_rejects_duplicate_headword(tmp_path):
    (tmp_path / "lex.tsv").write_text("wash\tverb\trinse\nwash\tverb\tclean\n")
    with pytest.raises(ValueError):
        load_lexicon(tmp_path / "lex.tsv")


def test_weights_csv_round_trip(tmp_path):
    W = normalize_l1(freq_weights(_toy_documents(), _toy_vocab()))
    save_weights_csv(W, tmp_path / "w.csv")
    loaded = load_weights_csv(tmp_path / "w.csv")
    assert loaded.composites == W.composites
    assert loaded.attributes == W.attributes
    # 9 significant digits survive a round trip at 1e-8 relative
    assert np.allclose(loaded.values, W.values, rtol=1e-8, atol=1e-12)


def test_weights_csv_has_9_significant_digits(tmp_path):
    W = WeightMatrix(np.array([[1 / 3, 2 / 3]]), ("c",), ("x", "y"))
    save_weights_csv(normalize_l1(W), tmp_path / "w.csv")
    text = (tmp_path / "w.csv").read_text()
    assert "0.333333333" in text


def test_vocab_round_trip(tmp_path):
    vocab = _toy_vocab()
    save_vocab(vocab, tmp_path / "vocab.csv")
    assert load_vocab(tmp_path / "vocab.csv").entries == vocab.entries
