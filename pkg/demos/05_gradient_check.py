"""
Checking gradients against finite differences
==============================================

Builds each architecture in float64 and compares the analytic gradient of
the training loss with central differences on a sample of parameters.
"""

import numpy as np

from spellforge import autodiff as ad
from spellforge.autodiff import EncoderConfig
from spellforge.corpus import SentenceRecord, Vocabulary, VocabKind, derive_char_vocab
from spellforge.models import Resources, build_model
from spellforge.models.verify import gradcheck_model
from spellforge.noise import CorruptionConfig, corrupt_corpus
from spellforge.tokenize import train_subword
from spellforge.toy import ToyLanguage

lang = ToyLanguage.generate(60, seed=0)
wv = Vocabulary(VocabKind.Word, lang.vocabulary)
cv = derive_char_vocab(wv)
res = Resources(wv, cv, train_subword([SentenceRecord(tuple(lang.vocabulary))], 60))
examples, _ = corrupt_corpus(lang.sentences(3, seed=1), lang.lexicon(), CorruptionConfig(seed=2),
                             wv, cv)

with ad.precision(np.float64):
    cfg = lambda n: EncoderConfig(16, 2, 2, n)  # noqa: E731
    for arch in ("word", "char", "wordchar", "subword"):
        model = build_model(arch, res, cfg(64), cfg(21), cfg(128), seed=0)
        report = gradcheck_model(model, examples)
        print(f"{arch:>8}: max relative error {report.max_rel_error:.2e} over "
              f"{report.checked} entries, worst {report.worst[0]}")
