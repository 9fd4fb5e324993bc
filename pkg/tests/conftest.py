import numpy as np
import pytest

from spellforge.corpus import SentenceRecord, Vocabulary, VocabKind, derive_char_vocab
from spellforge.models.data import Resources
from spellforge.noise import CorruptionConfig, corrupt_corpus
from spellforge.tokenize import train_subword
from spellforge.toy import ToyLanguage


def sents(*lines):
    return [SentenceRecord(tuple(line.split()), f"s{i}") for i, line in enumerate(lines)]


@pytest.fixture(scope="session")
def toy():
    lang = ToyLanguage.generate(120, seed=3)
    return lang, lang.sentences(60, seed=4), lang.lexicon(seed=5)


@pytest.fixture(scope="session")
def toy_resources(toy):
    lang, sentences, _ = toy
    wv = Vocabulary(VocabKind.Word, lang.vocabulary)
    cv = derive_char_vocab(wv)
    sub = train_subword([SentenceRecord(tuple(lang.vocabulary))], len(cv.symbols) + 60)
    return Resources(wv, cv, sub)


@pytest.fixture(scope="session")
def toy_examples(toy, toy_resources):
    _, sentences, lexicon = toy
    ex, _ = corrupt_corpus(sentences, lexicon, CorruptionConfig(seed=1),
                           toy_resources.word_vocab, toy_resources.char_vocab)
    return ex


class ScriptedRng:
    """Stands in for a numpy Generator, replaying fixed integer draws."""

    def __init__(self, ints):
        self.ints = list(ints)

    def integers(self, low, high=None, size=None):
        return self.ints.pop(0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
