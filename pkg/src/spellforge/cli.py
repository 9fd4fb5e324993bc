"""Command-line entry point.

Every subcommand accepts ``--config FILE``.  For ``run`` and ``ablate`` it
is a JSON pipeline config; for the others an INI file whose ``[cli]``
section supplies flag defaults (flags given on the command line win) and
whose ``[word]``/``[char]``/``[subword]``/``[train]`` sections describe
the model.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff.nn import ConfigError
from .corpus import (MAX_SENT_LEN, MAX_WORD_LEN, WORD_VOCAB_SIZE, CorpusError, SplitSpec,
                     Vocabulary, VocabKind, build_word_vocab, derive_char_vocab,
                     filter_sentences, read_sentences, split_corpus, write_sentences)
from .eval import BETA, evaluate, evaluate_sentences, render_report
from .models.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .models.config import desk_config, load_model_config
from .models.correctors import ARCHS, build_model
from .models.data import Resources
from .models.inference import correct_batch
from .models.mlm import mlm_pretrain, new_subword_encoder
from .models.training import TrainingDiverged, TrainSchedule, evaluate_model, train
from .models.verify import gradcheck_model
from .noise import (CorruptionConfig, LexiconFormatError, corrupt_corpus, load_lexicon,
                    read_examples, split_known, write_examples)
from .pipeline import PipelineConfig, PipelineConfigError, StageError, run_pipeline
from .tokenize import SubwordModel, train_subword

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3


class UsageError(Exception):
    pass


def _emit(event: str, **fields) -> None:
    sys.stderr.write(json.dumps({"event": event, **fields}, sort_keys=True) + "\n")


def _resources(directory, max_word_len: int = MAX_WORD_LEN, subword_dir=None) -> Resources:
    d = Path(directory)
    if not (d / "word.vocab").is_file():
        raise UsageError(f"no word.vocab in {d}")
    res = Resources.load(d)
    res.max_word_len = max_word_len
    if subword_dir is not None:
        res.subword = SubwordModel.load(subword_dir)
    return res


def _model_config(args):
    return load_model_config(args.config) if args.config else desk_config()


# --- subcommands -----------------------------------------------------------------

def cmd_build_vocab(args) -> int:
    sents = list(read_sentences(args.input))
    vocab = build_word_vocab(sents, args.max_size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "word.vocab")
    chars = derive_char_vocab(vocab)
    chars.save(out / "char.vocab")
    _emit("build-vocab", sentences=len(sents), word_vocab=len(vocab), char_vocab=len(chars),
          digest=vocab.digest())
    return EXIT_OK


def cmd_split(args) -> int:
    vocab = Vocabulary.load(Path(args.vocab) / "word.vocab", VocabKind.Word)
    sents = list(read_sentences(args.input))
    kept = list(filter_sentences(sents, vocab, args.max_sent_len, args.max_word_len))
    train_s, dev_s, test_s = split_corpus(
        kept, SplitSpec(args.seed, args.dev_size, args.test_size, args.train_size))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train_s), ("dev", dev_s), ("test", test_s)):
        write_sentences(out / f"{name}.txt", part)
    _emit("split", read=len(sents), kept=len(kept), train=len(train_s), dev=len(dev_s),
          test=len(test_s))
    return EXIT_OK


def cmd_corrupt(args) -> int:
    res = _resources(args.vocab, args.max_word_len)
    lexicon = load_lexicon(*args.lexicon)
    known, full = split_known(lexicon, args.known_fraction, args.known_seed)
    lex = full if args.use == "full" else known
    if args.use == "full" and args.synthetic_fraction > 0:
        raise UsageError("evaluation data (--use full) must not contain synthetic misspellings")
    cfg = CorruptionConfig(args.sigma, args.synthetic_fraction, args.seed, args.max_word_len)
    examples, stats = corrupt_corpus(read_sentences(args.input), lex, cfg, res.word_vocab,
                                     res.char_vocab)
    write_examples(args.out, examples)
    _emit("corrupt", examples=len(examples), lexicon=args.use, lexicon_pairs=len(lex),
          **stats.as_dict())
    return EXIT_OK


def cmd_train_subword(args) -> int:
    model = train_subword(read_sentences(args.input), args.vocab_size)
    model.save(args.out)
    _emit("train-subword", merges=len(model.merges), vocab=len(model.vocab))
    return EXIT_OK


def cmd_pretrain_mlm(args) -> int:
    subword = SubwordModel.load(args.subword)
    mc = _model_config(args)
    encoder = new_subword_encoder(mc.encoder("subword"), subword, args.seed)
    result = mlm_pretrain(encoder, list(read_sentences(args.input)), subword, args.mask_rate,
                          args.steps, args.seed, args.lr or mc.schedule.lr, args.batch_size)
    np.savez(args.out, **result.state)
    c = result.counts
    _emit("pretrain-mlm", steps=args.steps, first_loss=result.losses[0],
          last_loss=result.losses[-1], selected=c.selected, masked=c.masked,
          randomized=c.randomized, kept=c.kept)
    return EXIT_OK


def cmd_train(args) -> int:
    data = Path(args.data)
    sub_dir = data if (data / "subword.merges").exists() else None
    if args.arch == "subword" and sub_dir is None:
        raise UsageError(f"--arch subword needs subword.vocab/subword.merges in {data}")
    res = _resources(data, args.max_word_len, sub_dir)
    train_set = read_examples(data / args.train_file)
    dev_path = data / args.dev_file
    dev_set = read_examples(dev_path) if dev_path.is_file() else []
    mc = _model_config(args)
    s = mc.schedule
    schedule = TrainSchedule(args.epochs or s.epochs, args.batch_size or s.batch_size,
                             args.lr or s.lr, s.beta, s.target_train_accuracy)
    dtype = np.float64 if args.f64_check else np.float32
    with ad.precision(dtype):
        model = build_model(args.arch, res, mc.encoder("word"), mc.encoder("char"),
                            mc.encoder("subword"), args.seed)
        if args.init_encoder:
            if args.arch != "subword":
                raise UsageError("--init-encoder only applies to --arch subword")
            with np.load(args.init_encoder) as z:
                model.load_encoder({k: z[k] for k in z.files})
        if args.f64_check:
            report = gradcheck_model(model, train_set[:4])
            _emit("gradcheck", max_rel_error=report.max_rel_error, checked=report.checked,
                  passed=report.passed)
            if not report.passed:
                raise StageError("gradcheck", ValueError(
                    f"max relative error {report.max_rel_error:.3g} >= {report.tolerance:g}"))
        progress = lambda e: _emit("epoch", epoch=e.epoch, loss=e.loss, lr=e.lr,  # noqa: E731
                                   dev_f=e.dev_f, seconds=round(e.seconds, 3))
        result = train(model, train_set, dev_set, schedule, args.seed, progress)
    save_checkpoint(model, args.out, step=result.best_epoch, optimizer=result.optimizer,
                    extra={"seed": args.seed, "best_dev_f": result.best_dev_f})
    _emit("train", arch=args.arch, best_epoch=result.best_epoch, best_dev_f=result.best_dev_f,
          skipped_too_long=result.skipped_too_long)
    return EXIT_OK


def _read_token_lines(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]


def cmd_correct(args) -> int:
    data = Path(args.data)
    sub_dir = data if (data / "subword.merges").exists() else None
    res = _resources(data, args.max_word_len, sub_dir)
    model = load_checkpoint(args.model, res)
    noisy = _read_token_lines(args.input)
    fixed = correct_batch(model, noisy)
    text = "".join(" ".join(s) + "\n" for s in fixed)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    vocab = Vocabulary.load(args.vocab, VocabKind.Word)
    if args.triples:
        with open(args.triples, encoding="utf-8") as fh:
            triples = [tuple(json.loads(line)) for line in fh if line.strip()]
        report = evaluate(triples, vocab, args.beta)
    else:
        if not (args.gold and args.pred):
            raise UsageError("eval needs --gold and --pred, or --triples")
        gold = read_examples(args.gold)
        pred = _read_token_lines(args.pred)
        report = evaluate_sentences([g.noisy for g in gold], pred,
                                    [g.clean.tokens for g in gold], vocab, args.beta)
    text = render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _pipeline_config(args) -> PipelineConfig:
    if not args.config:
        raise UsageError(f"{args.command} needs --config PIPELINE.json")
    cfg = PipelineConfig.load(args.config)
    if getattr(args, "arms", None):
        cfg.arms = args.arms
    if getattr(args, "seeds", None):
        cfg.seeds = args.seeds
    if args.workdir:
        cfg.workdir = args.workdir
    return cfg


def cmd_run(args) -> int:
    result = run_pipeline(_pipeline_config(args), force=args.force)
    _emit("run", run_dir=str(result.run_dir), skipped=result.skipped)
    return EXIT_OK


def cmd_ablate(args) -> int:
    result = run_pipeline(_pipeline_config(args), force=args.force)
    sys.stdout.write((result.run_dir / "reports" / "ablation.txt").read_text())
    return EXIT_OK


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spellforge", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--config", help="config file (see module docstring)")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker count; all stages are single-threaded, kept for determinism")
        return sp

    sp = command("build-vocab", cmd_build_vocab, "word and char vocabularies from a corpus")
    sp.add_argument("--input", required=True)
    sp.add_argument("--max-size", type=int, default=WORD_VOCAB_SIZE)
    sp.add_argument("--out", required=True, help="output directory")

    sp = command("split", cmd_split, "filter and split a corpus into train/dev/test")
    sp.add_argument("--input", required=True)
    sp.add_argument("--vocab", required=True, help="directory holding word.vocab")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dev-size", type=int, required=True)
    sp.add_argument("--test-size", type=int, required=True)
    sp.add_argument("--train-size", type=int)
    sp.add_argument("--max-sent-len", type=int, default=MAX_SENT_LEN)
    sp.add_argument("--max-word-len", type=int, default=MAX_WORD_LEN)
    sp.add_argument("--out", required=True)

    sp = command("corrupt", cmd_corrupt, "inject misspellings into clean sentences")
    sp.add_argument("--input", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--lexicon", required=True, nargs="+")
    sp.add_argument("--known-fraction", type=float, default=0.8)
    sp.add_argument("--known-seed", type=int, default=0)
    sp.add_argument("--use", choices=("known", "full"), default="known",
                    help="known list for train/dev, full list for test")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--synthetic-fraction", type=float, default=0.0)
    sp.add_argument("--sigma", type=float, default=0.2)
    sp.add_argument("--max-word-len", type=int, default=MAX_WORD_LEN)
    sp.add_argument("--out", required=True)

    sp = command("train-subword", cmd_train_subword, "learn a subword segmentation")
    sp.add_argument("--input", required=True)
    sp.add_argument("--vocab-size", type=int, required=True)
    sp.add_argument("--out", required=True)

    sp = command("pretrain-mlm", cmd_pretrain_mlm, "masked-LM pretraining of a subword encoder")
    sp.add_argument("--input", required=True)
    sp.add_argument("--subword", required=True, help="directory with subword files")
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument("--mask-rate", type=float, default=0.15)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="encoder weights (.npz)")

    sp = command("train", cmd_train, "train a corrector")
    sp.add_argument("--arch", choices=ARCHS, required=True)
    sp.add_argument("--data", required=True,
                    help="directory with vocabularies, train.jsonl and optional dev.jsonl")
    sp.add_argument("--train-file", default="train.jsonl")
    sp.add_argument("--dev-file", default="dev.jsonl")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--max-word-len", type=int, default=MAX_WORD_LEN)
    sp.add_argument("--init-encoder", help="masked-LM weights for --arch subword")
    sp.add_argument("--f64-check", action="store_true",
                    help="train in float64 after a finite-difference gradient check")
    sp.add_argument("--out", required=True, help="checkpoint path")

    sp = command("correct", cmd_correct, "correct whitespace-tokenized sentences")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True, help="vocabulary directory the model was trained on")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out")
    sp.add_argument("--max-word-len", type=int, default=MAX_WORD_LEN)

    sp = command("eval", cmd_eval, "score corrections")
    sp.add_argument("--gold", help="parallel examples (.jsonl) with noisy and clean tokens")
    sp.add_argument("--pred", help="predicted sentences, one per line")
    sp.add_argument("--triples", help="JSON lines of [noisy, predicted, gold]")
    sp.add_argument("--vocab", required=True, help="word.vocab file")
    sp.add_argument("--beta", type=float, default=BETA)
    sp.add_argument("--format", choices=("text", "csv", "json"), default="text")
    sp.add_argument("--out")

    for name, fn, help_ in (("run", cmd_run, "run the whole pipeline"),
                            ("ablate", cmd_ablate, "train several arms and print the table")):
        sp = command(name, fn, help_)
        sp.add_argument("--workdir")
        sp.add_argument("--force", action="store_true")
        if name == "ablate":
            sp.add_argument("--arms", nargs="+")
            sp.add_argument("--seeds", nargs="+", type=int)
    return p


def _ini_defaults(path, parser: argparse.ArgumentParser, command: str) -> dict:
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise UsageError(f"cannot read config file {path}")
    if not cp.has_section("cli"):
        return {}
    sp = parser._subparsers._group_actions[0].choices[command]
    actions = {a.dest: a for a in sp._actions}
    out = {}
    for key, raw in cp.items("cli"):
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"[cli] unknown option {key!r} for {command}")
        a = actions[dest]
        if a.nargs == 0:
            out[dest] = cp.getboolean("cli", key)
        elif a.nargs in ("+", "*"):
            out[dest] = [a.type(x) if a.type else x for x in raw.split()]
        else:
            out[dest] = a.type(raw) if a.type else raw
    return out


def _peek(argv) -> tuple[str | None, str | None]:
    """Subcommand and ``--config`` value, read before required flags are enforced."""
    command = config = None
    it = iter(argv)
    for tok in it:
        if tok == "--config":
            config = next(it, None)
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
        elif command is None and not tok.startswith("-"):
            command = tok
    return command, config


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    command, config = _peek(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    if config and command in subparsers and command not in ("run", "ablate"):
        defaults = _ini_defaults(config, parser, command)
        sp = subparsers[command]
        for a in sp._actions:
            if a.dest in defaults:
                a.required = False
        sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as e:
        _emit("error", kind="config", message=str(e))
        return EXIT_CONFIG
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        _emit("error", kind="config", message="--threads must be >= 1")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (UsageError, PipelineConfigError, ConfigError, LexiconFormatError, CheckpointError,
            FileNotFoundError) as e:
        _emit("error", kind="config", command=args.command, message=str(e))
        return EXIT_CONFIG
    except StageError as e:
        _emit("error", kind="stage", stage=e.stage, message=str(e.cause))
        return EXIT_STAGE
    except (TrainingDiverged, CorpusError, ValueError, FloatingPointError, OSError) as e:
        _emit("error", kind="stage", stage=args.command, message=str(e))
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
