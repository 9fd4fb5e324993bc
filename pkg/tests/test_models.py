import math

import numpy as np
import pytest

from spellforge import autodiff as ad
from spellforge.autodiff import ConfigError, EncoderConfig
from spellforge.corpus import SentenceRecord, Vocabulary, VocabKind
from spellforge.models import (CheckpointFormatError, CheckpointHashError,
                               CheckpointTruncatedError, CheckpointVersionError, MaskCounts,
                               Resources, SubwordTagModel, TrainSchedule, WordCharModel,
                               build_model, correct_batch, correct_sentence, desk_config,
                               load_checkpoint, load_model_config, make_batch, mask_tokens,
                               mlm_pretrain, new_subword_encoder, reference_config, prepare,
                               read_checkpoint, save_checkpoint, select_best, train,
                               word_accuracy, write_model_config)
from spellforge.models.checkpoint import decode_checkpoint, encode_checkpoint, model_checkpoint
from spellforge.models.mlm import MaskedLM
from spellforge.models.training import EpochLog
from spellforge.models.verify import gradcheck_model
from spellforge.noise import ParallelExample


def cfg(max_len, hidden=16, layers=1):
    return EncoderConfig(hidden, layers, 2, max_len, dropout_rate=0.0)


def model(arch, res, seed=0, hidden=16):
    return build_model(arch, res, cfg(64, hidden), cfg(21, hidden), cfg(128, hidden), seed)


def batch_of(res, sentences):
    return make_batch(prepare([tuple(s) for s in sentences], res), res)


@pytest.fixture(scope="module")
def words(toy_resources):
    return toy_resources.word_vocab.symbols


def test_wordchar_logit_shape(toy_resources, words):
    m = model("wordchar", toy_resources)
    out = m.forward(batch_of(toy_resources, [words[:5], words[:3]]))
    assert out.shape == (2, 5, len(words))


def test_reference_width_concatenation(toy_resources, words):
    wc = EncoderConfig(512, 1, 8, 256, dropout_rate=0.0)
    cc = EncoderConfig(256, 1, 8, 21, dropout_rate=0.0)
    m = WordCharModel(toy_resources, wc, cc)
    b = batch_of(toy_resources, [words[:5]])
    assert m.features(b).shape == (1, 5, 768)
    assert m.forward(b).shape == (1, 5, len(words))


def test_features_are_word_and_cls_concatenated(toy_resources, words):
    m = model("wordchar", toy_resources)
    m.eval()
    b = batch_of(toy_resources, [words[:4]])
    feats = m.features(b).data
    h_word = m.word_encoder(b.word_ids, b.word_mask).data
    h_cls = m.char_encoder(b.char_ids, b.char_mask).data[:, 0]
    assert np.allclose(feats[0, :, :16], h_word[0])
    assert np.allclose(feats[0, :, 16:], h_cls)
    # the output layer is affine in the concatenated vector
    W, bias = m.output.weight.data, m.output.bias.data
    assert np.allclose(m.forward(b).data[0], feats[0] @ W + bias, atol=1e-5)


def test_word_only_ignores_oov_spelling(toy_resources, words):
    m = model("word", toy_resources)
    m.eval()
    a = m.forward(batch_of(toy_resources, [[words[0], "qqqzz", words[1]]])).data
    b = m.forward(batch_of(toy_resources, [[words[0], "xyxyxy", words[1]]])).data
    assert np.array_equal(a, b)


def test_char_only_is_per_word(toy_resources, words):
    m = model("char", toy_resources)
    m.eval()
    a = m.forward(batch_of(toy_resources, [[words[0], words[1], words[2]]])).data
    b = m.forward(batch_of(toy_resources, [[words[2], words[1], words[0]]])).data
    assert np.allclose(a[0, 1], b[0, 1], atol=1e-6)
    assert np.allclose(a[0, 0], b[0, 2], atol=1e-6)


def test_subword_logit_shape_and_determinism(toy_resources, words):
    m = model("subword", toy_resources)
    m.eval()
    b = batch_of(toy_resources, [words[:3]])
    n_sub = b.spans[0][-1][1]
    out = m.forward(b)
    assert out.shape == (1, n_sub, 2 * len(words))
    assert np.array_equal(m.predict_tags(b), m.predict_tags(b))


def test_model_needs_an_encoder(toy_resources):
    with pytest.raises(ConfigError):
        WordCharModel(toy_resources, None, None)
    with pytest.raises(ConfigError):
        WordCharModel(toy_resources, None, cfg(10))  # cannot hold [CLS] + 20 chars
    with pytest.raises(ConfigError):
        build_model("nope", toy_resources)


@pytest.mark.parametrize("arch", ["word", "char", "wordchar", "subword"])
def test_stand_alone_contract(toy_resources, words, arch):
    m = model(arch, toy_resources)
    sents = [[words[0], "zzqx", words[3]], [words[1]], []]
    out = correct_batch(m, sents)
    assert [len(s) for s in out] == [3, 1, 0]
    assert all(w in set(words) for s in out for w in s)
    if arch != "subword":
        assert out[0][1] != "zzqx"  # non-words can never survive


def test_long_input_is_windowed(toy_resources, words):
    m = build_model("word", toy_resources, cfg(4))
    noisy = (words * 3)[:11]
    assert len(correct_sentence(noisy, m)) == 11
    s = build_model("subword", toy_resources, subword_config=cfg(6))
    assert len(correct_sentence(noisy, s)) == 11


def test_wordchar_gradcheck_three_tokens(toy_examples, toy_resources):
    ex = next(e for e in toy_examples if len(e.noisy) >= 3)
    ex = ParallelExample(SentenceRecord(ex.clean.tokens[:3]), ex.noisy[:3],
                         tuple(c for c in ex.corrupted if c[0] < 3))
    with ad.precision(np.float64):
        m = model("wordchar", toy_resources)
        report = gradcheck_model(m, [ex], n_samples=200, step=1e-5)
    assert report.checked >= 200
    assert report.passed, report


def test_gradcheck_needs_float64(toy_examples, toy_resources):
    with pytest.raises(ValueError, match="float64"):
        gradcheck_model(model("word", toy_resources), toy_examples[:1])


def test_select_best():
    log = [EpochLog(1, 0.1, 1e-3, 0, dev_f=0.65), EpochLog(2, 0.9, 1e-3, 0, dev_f=0.70),
           EpochLog(3, 0.05, 1e-3, 0, dev_f=0.70)]
    assert select_best(log).epoch == 2
    assert select_best([EpochLog(1, 1, 0, 0), EpochLog(2, 1, 0, 0)]).epoch == 2


def test_zero_lr_leaves_parameters(toy_examples, toy_resources):
    m = model("wordchar", toy_resources)
    before = m.state_dict()
    train(m, toy_examples[:8], [], TrainSchedule(epochs=1, batch_size=4, lr=0.0))
    after = m.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_training_is_deterministic(toy_examples, toy_resources):
    runs = []
    for _ in range(2):
        m = model("wordchar", toy_resources, seed=3)
        r = train(m, toy_examples[:16], toy_examples[16:24],
                  TrainSchedule(epochs=2, batch_size=8, lr=1e-3), seed=5)
        runs.append((r.best_dev_f, [e.loss for e in r.log]))
    assert runs[0] == runs[1]


@pytest.mark.parametrize("arch", ["wordchar", "subword"])
def test_overfit_one_sentence(toy_examples, toy_resources, arch):
    ex = next(e for e in toy_examples if e.corrupted)
    m = build_model(arch, toy_resources, cfg(64, 32), cfg(21, 32), cfg(128, 32), seed=0)
    train(m, [ex], [], TrainSchedule(epochs=150, batch_size=1, lr=3e-3,
                                     target_train_accuracy=1.0))
    assert correct_sentence(ex.noisy, m) == list(ex.clean.tokens)


def test_word_accuracy(toy_examples, toy_resources):
    m = model("word", toy_resources)
    acc = word_accuracy(m, toy_examples[:5])
    assert 0.0 <= acc <= 1.0


# --- masked-LM ---------------------------------------------------------------------

def test_mask_split_counts(toy_resources):
    vocab = toy_resources.subword.vocab
    rng = np.random.default_rng(0)
    ids = rng.integers(vocab.num_specials, len(vocab), size=(200, 50))
    valid = np.ones_like(ids, bool)
    counts = MaskCounts()
    inputs, targets = mask_tokens(ids, valid, vocab, rng, 0.1, counts)
    assert counts.selected == (targets >= 0).sum()
    assert counts.masked + counts.randomized + counts.kept == counts.selected
    frac = np.array([counts.masked, counts.randomized, counts.kept]) / counts.selected
    assert np.allclose(frac, [0.8, 0.1, 0.1], atol=0.03)
    assert (inputs[targets < 0] == ids[targets < 0]).all()
    assert (inputs == vocab.id_of["<mask>"]).sum() == counts.masked


def test_mask_counts_deterministic(toy_resources):
    vocab = toy_resources.subword.vocab
    ids = np.full((50, 20), vocab.num_specials)
    valid = np.ones_like(ids, bool)
    runs = []
    for _ in range(2):
        c = MaskCounts()
        mask_tokens(ids, valid, vocab, np.random.default_rng(7), 0.15, c)
        runs.append(c)
    assert runs[0] == runs[1]


def test_every_row_gets_a_target(toy_resources):
    vocab = toy_resources.subword.vocab
    ids = np.full((30, 3), vocab.num_specials)
    valid = np.ones_like(ids, bool)
    _, targets = mask_tokens(ids, valid, vocab, np.random.default_rng(0), 0.0)
    assert ((targets >= 0).sum(axis=1) == 1).all()


def test_mlm_initial_loss_near_log_vocab(toy, toy_resources):
    _, sentences, _ = toy
    sub = toy_resources.subword
    enc = new_subword_encoder(cfg(128, 32), sub, seed=0)
    result = mlm_pretrain(enc, sentences, sub, steps=3, seed=0)
    assert result.losses[0] == pytest.approx(math.log(len(sub.vocab)), abs=0.3)
    m = SubwordTagModel(toy_resources, cfg(128, 32))
    m.load_encoder(result.state)
    assert np.array_equal(m.encoder.token_embedding.data, result.state["token_embedding"])


# --- checkpoints and config files --------------------------------------------------

def test_checkpoint_round_trip(tmp_path, toy_examples, toy_resources):
    m = model("wordchar", toy_resources)
    r = train(m, toy_examples[:4], [], TrainSchedule(epochs=1, batch_size=4, lr=1e-3))
    p1, p2 = tmp_path / "a.spfg", tmp_path / "b.spfg"
    save_checkpoint(m, p1, step=1, optimizer=r.optimizer)
    back = load_checkpoint(p1, toy_resources)
    save_checkpoint(back, p2, step=1, optimizer=r.optimizer)
    assert p1.read_bytes() == p2.read_bytes()
    ck = read_checkpoint(p1)
    assert ck.step == 1 and any(k.startswith("optimizer.m.") for k in ck.tensors)
    b = batch_of(toy_resources, [toy_resources.word_vocab.symbols[:3]])
    m.eval()
    assert np.array_equal(m.forward(b).data, back.forward(b).data)


def test_checkpoint_errors(tmp_path, toy_resources):
    m = model("word", toy_resources)
    blob = encode_checkpoint(model_checkpoint(m))
    with pytest.raises(CheckpointTruncatedError):
        decode_checkpoint(blob[:-3])
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(b"XXXX" + blob[4:])
    with pytest.raises(CheckpointFormatError):
        decode_checkpoint(blob + b"\0")
    with pytest.raises(CheckpointVersionError):
        decode_checkpoint(blob[:4] + (99).to_bytes(4, "little") + blob[8:])
    path = tmp_path / "m.spfg"
    path.write_bytes(blob)
    other = Resources(Vocabulary(VocabKind.Word, ["x", "y"]), toy_resources.char_vocab)
    with pytest.raises(CheckpointHashError):
        load_checkpoint(path, other)


def test_config_file_round_trip(tmp_path):
    cfg_ = desk_config()
    write_model_config(cfg_, tmp_path / "m.ini")
    back = load_model_config(tmp_path / "m.ini")
    assert back.encoders == cfg_.encoders
    assert back.schedule.lr == cfg_.schedule.lr
    assert reference_config().encoder("word").hidden_size == 512
    (tmp_path / "bad.ini").write_text("[word]\nhidden = 3\n")
    with pytest.raises(ConfigError):
        load_model_config(tmp_path / "bad.ini")


def test_partial_config_keeps_base(tmp_path):
    (tmp_path / "p.ini").write_text("[char]\nhidden_size = 64\nnum_attention_heads = 4\n")
    c = load_model_config(tmp_path / "p.ini")
    assert c.encoder("char").hidden_size == 64
    assert c.encoder("word") == desk_config().encoder("word")


def test_masked_lm_head_shape(toy_resources):
    sub = toy_resources.subword
    enc = new_subword_encoder(cfg(128), sub)
    lm = MaskedLM(enc, np.random.default_rng(0))
    ids = np.full((2, 4), sub.vocab.num_specials)
    valid = np.ones_like(ids, bool)
    targets = ids.copy()
    assert lm.loss(ids, targets, valid).shape == ()


def test_pretraining_speeds_up_overfitting():
    from statistics import median

    from spellforge.corpus import derive_char_vocab
    from spellforge.noise import CorruptionConfig, corrupt_corpus
    from spellforge.tokenize import train_subword
    from spellforge.toy import ToyLanguage

    lang = ToyLanguage.generate(100, 0)
    wv = Vocabulary(VocabKind.Word, lang.vocabulary)
    cv = derive_char_vocab(wv)
    sents = lang.sentences(60, seed=1)
    sub = train_subword(sents, len(cv.symbols) + 80)
    res = Resources(wv, cv, sub)
    examples, _ = corrupt_corpus(sents, lang.lexicon(), CorruptionConfig(seed=2), wv, cv)
    config = cfg(128, 32)
    schedule = TrainSchedule(300, 16, 3e-3, target_train_accuracy=0.99)
    cold_epochs, warm_epochs = [], []
    for seed in range(3):
        cold = SubwordTagModel(res, config, seed=seed)
        cold_epochs.append(train(cold, examples, [], schedule, seed=seed).epochs_run)
        pre = mlm_pretrain(new_subword_encoder(config, sub, seed=seed), sents, sub, steps=300,
                           seed=seed, lr=3e-3, batch_size=16)
        warm = SubwordTagModel(res, config, seed=seed)
        warm.load_encoder(pre.state)
        warm_epochs.append(train(warm, examples, [], schedule, seed=seed).epochs_run)
    assert max(cold_epochs + warm_epochs) < 300
    assert median(warm_epochs) <= median(cold_epochs)
