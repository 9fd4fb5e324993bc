from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spellforge.corpus import SentenceRecord, Vocabulary, VocabKind, derive_char_vocab
from spellforge.noise import (NATURAL, NOISE_KINDS, CorruptionConfig, LexiconFormatError,
                              MisspellingClass, MisspellingLexicon, NoiseKind, ParallelExample,
                              classify_misspelling, corrupt_corpus, corrupt_sentence,
                              keyboard_adjacency, load_lexicon, read_examples,
                              replacement_count, sample_replacement_count, split_known,
                              synth_misspell, synth_misspell_with_kind, write_examples)

from conftest import ScriptedRng

WORDS = Vocabulary(VocabKind.Word, ["their", "cat", "from", "form", "noise", "correct"])
CHARS = derive_char_vocab(WORDS)


def test_lexicon_skips_identity_and_dedups(tmp_path):
    a = tmp_path / "a.tsv"
    b = tmp_path / "b.tsv"
    a.write_text("receive\treceive\ntheir\tthier\n")
    b.write_text("their\tthier\n")
    lex = load_lexicon(a, b)
    assert lex.pairs() == [("their", "thier")]
    assert lex.skipped_identical == 1


def test_lexicon_parse_error_line(tmp_path):
    p = tmp_path / "bad.tsv"
    p.write_text("their\tthier\na\tb\tc\n")
    with pytest.raises(LexiconFormatError) as e:
        load_lexicon(p)
    assert e.value.lineno == 2


def test_lexicon_case_sensitive():
    lex = MisspellingLexicon.from_pairs([("The", "Teh")])
    assert lex.get("the") == [] and lex.get("The") == ["Teh"]


def test_split_known_sizes():
    lex = MisspellingLexicon.from_pairs([(f"w{i}", f"v{i}") for i in range(10)])
    k1, full = split_known(lex, 0.8, seed=3)
    k2, _ = split_known(lex, 0.8, seed=3)
    assert len(k1) == 8 and k1 == k2 and full is lex
    assert set(k1.pairs()) <= set(lex.pairs())
    assert split_known(lex, 1.0)[0] == lex


def test_swap_is_one_internal_transposition(rng):
    for _ in range(50):
        out = synth_misspell("noise", NoiseKind.Swap, CHARS, rng)
        assert sorted(out) == sorted("noise")
        diff = [i for i, (a, b) in enumerate(zip(out, "noise")) if a != b]
        assert len(diff) == 2 and diff[1] == diff[0] + 1
        assert out[0] == "n" and out[-1] == "e"


def test_middle_random_keeps_ends(rng):
    for _ in range(50):
        out = synth_misspell("correct", NoiseKind.MiddleRandom, CHARS, rng)
        assert out[0] == "c" and out[-1] == "t"
        assert sorted(out[1:-1]) == sorted("orrec") and out != "correct"


def test_fully_random_is_permutation(rng):
    out = synth_misspell("noise", NoiseKind.FullyRandom, CHARS, rng)
    assert sorted(out) == sorted("noise") and out != "noise"


def test_keyboard_typo_scripted():
    adj = keyboard_adjacency()
    assert "s" in adj["a"]
    # index 1 among eligible positions of "cat", then neighbour slot of 's'
    out = synth_misspell("cat", NoiseKind.KeyboardTypo, CHARS,
                         ScriptedRng([1, adj["a"].index("s")]))
    assert out == "cst"


def test_keyboard_adjacency_symmetric():
    adj = keyboard_adjacency()
    for k, ns in adj.items():
        for n in ns:
            assert k in adj[n]


def test_random_generate_uses_char_vocab(rng):
    for _ in range(50):
        out = synth_misspell("cat", NoiseKind.RandomGenerate, CHARS, rng, max_word_len=5)
        assert 1 <= len(out) <= 5 and set(out) <= set(CHARS.symbols) and out != "cat"


def test_unpermutable_word_falls_back(rng):
    out, kind = synth_misspell_with_kind("aaaa", NoiseKind.MiddleRandom, CHARS, rng)
    assert out != "aaaa"


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=20),
       st.sampled_from(NOISE_KINDS), st.integers(0, 2**32 - 1))
@settings(max_examples=300, deadline=None)
def test_synth_always_differs(word, kind, seed):
    out = synth_misspell(word, kind, CHARS, np.random.default_rng(seed))
    assert out != word and 1 <= len(out) <= 20


def test_replacement_count_examples():
    assert replacement_count(10, 0.05) == 1
    assert replacement_count(200, 1.0) == 200
    assert replacement_count(9, 0.25) == 2


def test_replacement_count_million_draws():
    rng = np.random.default_rng(0)
    cfg = CorruptionConfig()
    ns = rng.integers(1, 201, size=10**6)
    alpha = np.minimum(np.abs(rng.normal(0, cfg.sigma, size=ns.size)), 1.0)
    m = np.maximum(np.floor(alpha * ns).astype(int), 1)
    assert m.min() >= 1 and (m <= ns).all()
    # scalar sampler agrees with the vectorised formula on a sample
    for n in (1, 5, 200):
        draws = [sample_replacement_count(n, cfg, rng) for _ in range(2000)]
        assert 1 <= min(draws) and max(draws) <= n


def test_classify():
    assert classify_misspelling("thier", WORDS) is MisspellingClass.NonWord
    assert classify_misspelling("form", WORDS) is MisspellingClass.RealWord
    assert classify_misspelling("their", WORDS) is MisspellingClass.RealWord


def test_forced_natural_corruption():
    lex = MisspellingLexicon.from_pairs([("their", "thier")])
    clean = SentenceRecord(("their", "cat"))
    rng = np.random.default_rng(0)
    ex = corrupt_sentence(clean, lex, CorruptionConfig(), WORDS, CHARS, rng, positions=[0, 1])
    assert ex.noisy == ("thier", "cat")
    assert ex.corrupted == ((0, NATURAL),)
    ex.check()


def test_missing_entries_skipped_without_synthetic():
    lex = MisspellingLexicon.from_pairs([("their", "thier")])
    clean = SentenceRecord(("cat", "cat", "cat"))
    ex = corrupt_sentence(clean, lex, CorruptionConfig(), WORDS, CHARS, np.random.default_rng(1))
    assert ex.noisy == clean.tokens and ex.corrupted == ()


def test_synthetic_fills_missing_entries():
    clean = SentenceRecord(("cat", "noise", "correct"))
    cfg = CorruptionConfig(sigma=5.0, synthetic_fraction=0.5, seed=0)
    ex = corrupt_sentence(clean, MisspellingLexicon(), cfg, WORDS, CHARS,
                          np.random.default_rng(2))
    assert ex.corrupted and all(src != NATURAL for _, src in ex.corrupted)
    ex.check()


def test_parallel_example_check_catches_bad_marking():
    ex = ParallelExample(SentenceRecord(("a", "b")), ("a", "c"), ())
    with pytest.raises(AssertionError):
        ex.check()


def test_corpus_invariants_roundtrip_and_determinism(toy, toy_resources, tmp_path):
    _, sentences, lexicon = toy
    cfg = CorruptionConfig(seed=9, synthetic_fraction=0.5)
    wv, cv = toy_resources.word_vocab, toy_resources.char_vocab
    a, stats = corrupt_corpus(sentences, lexicon, cfg, wv, cv)
    b, _ = corrupt_corpus(sentences, lexicon, cfg, wv, cv)
    for ex in a:
        ex.check()
    assert a == b
    write_examples(tmp_path / "a.jsonl", a)
    write_examples(tmp_path / "b.jsonl", b)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert read_examples(tmp_path / "a.jsonl") == a
    d = stats.as_dict()
    assert d["sentences"] == len(sentences)
    assert sum(d["by_source"].values()) == d["corrupted_positions"]
    assert 0 <= stats.real_word_fraction <= 1
    assert Counter(src for ex in a for _, src in ex.corrupted) == stats.by_source
