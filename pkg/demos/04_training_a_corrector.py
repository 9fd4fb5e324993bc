"""
Training a small word + character corrector
===========================================

Trains the word+char model on a toy corpus for 25 epochs, then
corrects fresh sentences.  Runs in about a minute on one core.
"""

from spellforge.autodiff import EncoderConfig
from spellforge.eval import report_to_text
from spellforge.models import TrainSchedule, build_model, correct_batch, evaluate_model, train
from spellforge.pipeline import DataConfig, build_data
from spellforge.toy import ToyLanguage

lang = ToyLanguage.generate(300, seed=0)
bundle = build_data(lang.sentences(600, seed=1), lang.lexicon(),
                    DataConfig(dev_size=100, test_size=100), need_randchar=False)
res = bundle.resources
print(len(bundle.train_natural), "training sentences")

enc = lambda n: EncoderConfig(32, 1, 4, n, dropout_rate=0.1)  # noqa: E731
model = build_model("wordchar", res, enc(64), enc(21), seed=0)
result = train(model, bundle.train_natural, bundle.dev,
               TrainSchedule(epochs=25, batch_size=32, lr=2e-3), seed=0,
               progress=lambda e: print(f"epoch {e.epoch:2d} loss {e.loss:.3f} "
                                        f"dev F0.5 {e.dev_f:.3f}"))
print("best epoch", result.best_epoch)

print(report_to_text(evaluate_model(model, bundle.test), "test"))

for ex, fixed in zip(bundle.test[:5], correct_batch(model, [e.noisy for e in bundle.test[:5]])):
    print(" noisy:", " ".join(ex.noisy))
    print(" fixed:", " ".join(fixed))
    print("  gold:", " ".join(ex.clean.tokens))
