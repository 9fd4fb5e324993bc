"""
Scoring a spelling corrector
============================

Every position falls into one of four outcomes depending on whether the
input was misspelled and whether the output matches the gold word.
Precision weighs more than recall in the F0.5 score.
"""

from spellforge.corpus import Vocabulary, VocabKind
from spellforge.eval import (OutcomeCounts, classify_outcome, compute_metrics, evaluate_sentences,
                             f_beta, report_to_text)

vocab = Vocabulary(VocabKind.Word, ["the", "cat", "sat", "on", "mat", "hat", "their", "there"])

noisy = [["teh", "cat", "sat", "on", "there", "mat"], ["the", "hat", "sta"]]
pred = [["the", "cat", "sat", "on", "their", "hat"], ["the", "cat", "sat"]]
gold = [["the", "cat", "sat", "on", "their", "mat"], ["the", "cat", "sat"]]

for n, p, g in zip(noisy[0], pred[0], gold[0]):
    print(f"{n:>6} -> {p:<6} gold {g:<6} {classify_outcome(n, p, g).name}")

triples = [t for s in zip(noisy, pred, gold) for t in zip(*s)]
print(compute_metrics(OutcomeCounts.from_triples(triples)))

# real-word errors (there -> their) and non-word errors (teh) are also scored apart
print(report_to_text(evaluate_sentences(noisy, pred, gold, vocab), "toy example"))

# F0.5 for a precision/recall pair, e.g. P=0.751 and R=0.928
print(round(f_beta(0.751, 0.928, 0.5), 3))
