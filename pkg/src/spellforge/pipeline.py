"""End-to-end runs: vocab -> split -> corrupt -> train -> evaluate -> report."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import median
from typing import Sequence

import numpy as np

from . import __version__
from .corpus import (MAX_SENT_LEN, MAX_WORD_LEN, WORD_VOCAB_SIZE, SplitSpec, build_word_vocab,
                     derive_char_vocab, filter_sentences, read_sentences, split_corpus,
                     write_sentences)
from .eval import MetricsReport, breakdown_table, comparison_table, emit_report
from .models.checkpoint import save_checkpoint
from .models.config import ModelConfig, desk_config, load_model_config
from .models.correctors import ARCHS, build_model
from .models.data import Resources
from .models.mlm import mlm_pretrain, new_subword_encoder
from .models.training import TrainResult, TrainSchedule, evaluate_model, train
from .noise import (NATURAL, CorruptionConfig, MisspellingLexicon, corrupt_corpus,
                    heldout_lexicon, load_lexicon, split_known, write_examples)
from .tokenize import train_subword

log = logging.getLogger(__name__)


class PipelineConfigError(ValueError):
    """Bad or inconsistent configuration (CLI exit code 2)."""


class StageError(RuntimeError):
    """A pipeline stage failed (CLI exit code 3)."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class DataConfig:
    max_size: int = WORD_VOCAB_SIZE
    max_sent_len: int = MAX_SENT_LEN
    max_word_len: int = MAX_WORD_LEN
    split_seed: int = 0
    dev_size: int = 100
    test_size: int = 100
    train_size: int | None = None
    known_fraction: float = 0.8
    known_seed: int = 0
    sigma: float = 0.2
    corrupt_seed: int = 0
    train_synthetic_fraction: float = 0.5  # used by "+randchar" arms only
    subword_vocab_size: int = 1000


@dataclass
class PipelineConfig:
    corpus: str = ""
    lexicons: list[str] = field(default_factory=list)
    workdir: str = "runs"
    data: DataConfig = field(default_factory=DataConfig)
    arms: list[str] = field(default_factory=lambda: ["wordchar"])
    model_config: str | None = None  # INI file; desk defaults otherwise
    epochs: int | None = None
    batch_size: int | None = None
    lr: float | None = None
    mlm_steps: int = 200
    seeds: list[int] = field(default_factory=lambda: [0])

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise PipelineConfigError(f"unknown pipeline keys: {sorted(unknown)}")
        data = d.pop("data", {}) or {}
        bad = set(data) - set(DataConfig.__dataclass_fields__)
        if bad:
            raise PipelineConfigError(f"unknown data keys: {sorted(bad)}")
        return cls(data=DataConfig(**data), **d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, TypeError) as e:
            raise PipelineConfigError(f"cannot load pipeline config {path}: {e}") from None

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validate(self) -> None:
        if not self.corpus or not Path(self.corpus).is_file():
            raise PipelineConfigError(f"corpus file not found: {self.corpus!r}")
        if not self.lexicons:
            raise PipelineConfigError("at least one lexicon file is required")
        for p in self.lexicons:
            if not Path(p).is_file():
                raise PipelineConfigError(f"lexicon file not found: {p!r}")
        if self.model_config and not Path(self.model_config).is_file():
            raise PipelineConfigError(f"model config not found: {self.model_config!r}")
        for arm in self.arms:
            parse_arm(arm)
        if not self.seeds:
            raise PipelineConfigError("at least one seed is required")


@dataclass(frozen=True)
class Arm:
    arch: str
    randchar: bool = False
    mlm: bool = False

    @property
    def name(self) -> str:
        return self.arch + ("+mlm" if self.mlm else "") + ("+randchar" if self.randchar else "")


def parse_arm(spec: str) -> Arm:
    """``wordchar``, ``wordchar+randchar``, ``subword+mlm+randchar`` ..."""
    parts = spec.split("+")
    arch, mods = parts[0], set(parts[1:])
    if arch not in ARCHS:
        raise PipelineConfigError(f"unknown arch {arch!r} in arm {spec!r}; expected {ARCHS}")
    if mods - {"randchar", "mlm"}:
        raise PipelineConfigError(f"unknown arm modifier(s) {sorted(mods - {'randchar', 'mlm'})}")
    if "mlm" in mods and arch != "subword":
        raise PipelineConfigError("masked-LM pretraining only applies to the subword arch")
    return Arm(arch, "randchar" in mods, "mlm" in mods)


@dataclass
class DataBundle:
    resources: Resources
    clean_train: list
    train_natural: list
    train_randchar: list | None
    dev: list
    test: list
    known: MisspellingLexicon
    full: MisspellingLexicon
    stats: dict = field(default_factory=dict)
    test_heldout: list = field(default_factory=list)  # only misspellings unseen in training

    def ensure_subword(self, target_size: int) -> None:
        if self.resources.subword is None:
            self.resources.subword = train_subword(self.clean_train, target_size)


def build_data(sentences, lexicon: MisspellingLexicon, cfg: DataConfig,
               need_randchar: bool = True) -> DataBundle:
    """Vocabulary, filtering, split and corruption in one go.

    Dev is corrupted from the known 80% list, test from the full list, both
    with natural misspellings only.  A second copy of the test sentences is
    corrupted with the held-out pairs alone (sentences left clean are
    dropped) to probe robustness to unseen misspellings.
    """
    sentences = list(sentences)
    word_vocab = build_word_vocab(sentences, cfg.max_size)
    char_vocab = derive_char_vocab(word_vocab)
    kept = list(filter_sentences(sentences, word_vocab, cfg.max_sent_len, cfg.max_word_len))
    spec = SplitSpec(cfg.split_seed, cfg.dev_size, cfg.test_size, cfg.train_size)
    train_s, dev_s, test_s = split_corpus(kept, spec)
    known, full = split_known(lexicon, cfg.known_fraction, cfg.known_seed)

    def corrupt(sents, lex, synthetic, offset):
        c = CorruptionConfig(cfg.sigma, synthetic, cfg.corrupt_seed + offset, cfg.max_word_len)
        return corrupt_corpus(sents, lex, c, word_vocab, char_vocab)

    train_nat, st_nat = corrupt(train_s, known, 0.0, 0)
    train_rc, st_rc = (corrupt(train_s, known, cfg.train_synthetic_fraction, 0)
                       if need_randchar else (None, None))
    dev, st_dev = corrupt(dev_s, known, 0.0, 1)
    test, st_test = corrupt(test_s, full, 0.0, 2)
    heldout, st_ho = corrupt(test_s, heldout_lexicon(full, known), 0.0, 3)
    heldout = [ex for ex in heldout if ex.corrupted]
    stats = {
        "sentences_in": len(sentences), "sentences_kept": len(kept),
        "word_vocab": len(word_vocab), "char_vocab": len(char_vocab),
        "lexicon_pairs": len(full), "known_pairs": len(known),
        "train": st_nat.as_dict(), "dev": st_dev.as_dict(), "test": st_test.as_dict(),
        "test_heldout": st_ho.as_dict(),
    }
    if st_rc is not None:
        stats["train_randchar"] = st_rc.as_dict()
    return DataBundle(Resources(word_vocab, char_vocab, None, cfg.max_word_len), train_s,
                      train_nat, train_rc, dev, test, known, full, stats, heldout)


def assert_natural_only(examples) -> None:
    for ex in examples:
        if any(src != NATURAL for _, src in ex.corrupted):
            raise AssertionError(f"synthetic misspelling in {ex.clean.source_id}")


@dataclass
class ArmResult:
    arm: Arm
    seed: int
    dev: MetricsReport
    test: MetricsReport
    training: TrainResult
    model: object = None
    heldout: MetricsReport | None = None


def train_arm(arm: Arm, bundle: DataBundle, model_cfg: ModelConfig, seed: int = 0,
              subword_vocab_size: int = 1000, mlm_steps: int = 200, progress=None) -> ArmResult:
    res = bundle.resources
    if arm.arch == "subword":
        bundle.ensure_subword(subword_vocab_size)
    model = build_model(arm.arch, res, model_cfg.encoder("word"), model_cfg.encoder("char"),
                        model_cfg.encoder("subword"), seed)
    if arm.mlm:
        encoder = new_subword_encoder(model_cfg.encoder("subword"), res.subword, seed)
        pre = mlm_pretrain(encoder, bundle.clean_train, res.subword, steps=mlm_steps, seed=seed,
                           lr=model_cfg.schedule.lr, batch_size=model_cfg.schedule.batch_size)
        model.load_encoder(pre.state)
    train_set = bundle.train_randchar if arm.randchar else bundle.train_natural
    if train_set is None:
        raise PipelineConfigError(f"arm {arm.name} needs the +randchar training set")
    result = train(model, train_set, bundle.dev, model_cfg.schedule, seed, progress)
    dev = evaluate_model(model, bundle.dev, model_cfg.schedule.beta)
    test = evaluate_model(model, bundle.test, model_cfg.schedule.beta)
    heldout = (evaluate_model(model, bundle.test_heldout, model_cfg.schedule.beta)
               if bundle.test_heldout else None)
    return ArmResult(arm, seed, dev, test, result, model, heldout)


@dataclass
class AblationReport:
    results: dict[str, list[ArmResult]]

    def median(self, arm: str, split: str, metric: str) -> float | None:
        """Median over seeds; ``metric`` like ``overall.f_beta`` or ``real_word.f_beta``."""
        scope, name = metric.split(".")
        vals = []
        for r in self.results[arm]:
            report = getattr(r, split)
            if report is None:
                return None
            part = getattr(report, scope)
            if part is None:
                return None
            vals.append(getattr(part, name))
        return median(vals)

    def representative(self, arm: str) -> ArmResult:
        """The seed whose dev F-beta is the median (lower middle for even counts)."""
        runs = sorted(self.results[arm], key=lambda r: r.dev.overall.f_beta)
        return runs[(len(runs) - 1) // 2]

    def tables(self) -> str:
        rows = [(arm, self.representative(arm).dev, self.representative(arm).test)
                for arm in self.results]
        return comparison_table(rows) + "\n" + breakdown_table(rows)

    def summary(self) -> dict:
        out = {}
        for arm in self.results:
            out[arm] = {
                f"{split}.{m}": self.median(arm, split, m)
                for split in ("dev", "test", "heldout")
                for m in ("overall.accuracy", "overall.precision", "overall.recall",
                          "overall.f_beta", "real_word.f_beta", "non_word.detection_recall",
                          "non_word.correction_precision")
            }
        return out


def ablation_matrix(arms: Sequence[str], bundle: DataBundle, model_cfg: ModelConfig,
                    seeds: Sequence[int] = (0,), subword_vocab_size: int = 1000,
                    mlm_steps: int = 200, progress=None) -> AblationReport:
    """Train every arm on the shared data for every seed."""
    parsed = [parse_arm(a) for a in arms]
    results = {}
    for arm in parsed:
        results[arm.name] = [
            train_arm(arm, bundle, model_cfg, seed, subword_vocab_size, mlm_steps, progress)
            for seed in seeds
        ]
    return AblationReport(results)


# --- run directories -----------------------------------------------------------

def _emit(event: str, **fields) -> None:
    sys.stderr.write(json.dumps({"event": event, **fields}, sort_keys=True) + "\n")


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _model_config(cfg: PipelineConfig) -> ModelConfig:
    mc = load_model_config(cfg.model_config) if cfg.model_config else desk_config()
    s = mc.schedule
    mc.schedule = TrainSchedule(cfg.epochs or s.epochs, cfg.batch_size or s.batch_size,
                                cfg.lr or s.lr)
    return mc


@dataclass
class RunResult:
    run_dir: Path
    manifest: dict
    ablation: AblationReport | None
    skipped: bool = False


def run_pipeline(cfg: PipelineConfig, force: bool = False) -> RunResult:
    """Run every stage into ``workdir/run-<config hash>``.

    A finished run with the same config hash is left untouched unless
    ``force`` is set.
    """
    cfg.validate()
    digest = cfg.digest()
    run_dir = Path(cfg.workdir) / f"run-{digest[:12]}"
    manifest_path = run_dir / "manifest.json"
    if manifest_path.exists() and not force:
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("config_hash") == digest and manifest.get("complete"):
            _emit("skip", run_dir=str(run_dir))
            return RunResult(run_dir, manifest, None, skipped=True)
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": digest, "config": cfg.to_dict(), "seeds": cfg.seeds,
        "versions": {"spellforge": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "stages": {}, "outputs": {}, "complete": False,
    }

    def stage(name, fn):
        t0 = time.perf_counter()
        _emit("stage_start", stage=name)
        try:
            out = fn()
        except (PipelineConfigError, StageError):
            raise
        except Exception as e:  # noqa: BLE001 - reported with the stage name
            manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
            raise StageError(name, e) from e
        manifest["stages"][name] = {"seconds": round(time.perf_counter() - t0, 3)}
        _emit("stage_done", stage=name, seconds=manifest["stages"][name]["seconds"])
        return out

    arms = [parse_arm(a) for a in cfg.arms]
    mc = stage("config", lambda: _model_config(cfg))
    lexicon = stage("load-lexicon", lambda: load_lexicon(*cfg.lexicons))
    bundle = stage("build-data", lambda: build_data(
        read_sentences(cfg.corpus), lexicon, cfg.data, any(a.randchar for a in arms)))
    assert_natural_only(bundle.dev)
    assert_natural_only(bundle.test)

    def write_data():
        data_dir = run_dir / "data"
        data_dir.mkdir(exist_ok=True)
        bundle.resources.save(data_dir)
        for name, sents in (("train", bundle.clean_train),):
            write_sentences(data_dir / f"{name}.txt", sents)
        write_examples(data_dir / "train.jsonl", bundle.train_natural)
        if bundle.train_randchar is not None:
            write_examples(data_dir / "train_randchar.jsonl", bundle.train_randchar)
        write_examples(data_dir / "dev.jsonl", bundle.dev)
        write_examples(data_dir / "test.jsonl", bundle.test)
        write_examples(data_dir / "test_heldout.jsonl", bundle.test_heldout)
        (data_dir / "corruption_stats.json").write_text(
            json.dumps(bundle.stats, indent=2, sort_keys=True))

    stage("write-data", write_data)
    if any(a.arch == "subword" for a in arms):
        stage("train-subword", lambda: (bundle.ensure_subword(cfg.data.subword_vocab_size),
                                        bundle.resources.subword.save(run_dir / "data")))

    def run_arms():
        progress = lambda e: _emit("epoch", epoch=e.epoch, loss=round(e.loss, 6),  # noqa: E731
                                   dev_f=e.dev_f)
        return ablation_matrix(cfg.arms, bundle, mc, cfg.seeds, cfg.data.subword_vocab_size,
                               cfg.mlm_steps, progress)

    ablation = stage("train", run_arms)

    def write_reports():
        rep_dir = run_dir / "reports"
        ck_dir = run_dir / "checkpoints"
        rep_dir.mkdir(exist_ok=True)
        ck_dir.mkdir(exist_ok=True)
        for arm, runs in ablation.results.items():
            for r in runs:
                tag = f"{arm}.seed{r.seed}"
                save_checkpoint(r.model, ck_dir / f"{tag}.spfg", step=r.training.best_epoch)
                for split in ("dev", "test", "heldout"):
                    if getattr(r, split) is None:
                        continue
                    for fmt, ext in (("json", "json"), ("csv", "csv"), ("text", "txt")):
                        emit_report(getattr(r, split), rep_dir / f"{tag}.{split}.{ext}", fmt)
        (rep_dir / "ablation.txt").write_text(ablation.tables())
        (rep_dir / "ablation.json").write_text(
            json.dumps(ablation.summary(), indent=2, sort_keys=True))

    stage("report", write_reports)
    for p in sorted(run_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            manifest["outputs"][str(p.relative_to(run_dir))] = _file_digest(p)
    manifest["complete"] = True
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return RunResult(run_dir, manifest, ablation)
