from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..autodiff.optim import REFERENCE_LR, Adam
from ..eval import BETA, MetricsReport, evaluate_sentences
from ..tokenize import DecodeStats
from .correctors import SubwordTagModel
from .data import DatasetStats, bucketed_batches, make_batch, prepare
from .inference import correct_batch

log = logging.getLogger(__name__)


@dataclass
class TrainSchedule:
    epochs: int = 10
    batch_size: int = 32
    lr: float = REFERENCE_LR
    beta: float = BETA
    target_train_accuracy: float | None = None  # stop once reached
    eval_batch_size: int = 128


@dataclass
class EpochLog:
    epoch: int
    loss: float
    lr: float
    seconds: float
    dev_f: float | None = None
    dev: dict | None = None
    train_accuracy: float | None = None
    skipped_steps: int = 0


@dataclass
class TrainResult:
    best_epoch: int
    best_dev_f: float | None
    best_state: dict
    log: list[EpochLog] = field(default_factory=list)
    stopped_early: bool = False
    skipped_too_long: int = 0
    optimizer: Adam | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.log)


class TrainingDiverged(RuntimeError):
    """Non-finite loss; the model holds the last good parameters."""

    def __init__(self, epoch: int, result: TrainResult):
        super().__init__(f"training diverged in epoch {epoch}")
        self.epoch = epoch
        self.result = result


def select_best(log_entries: list[EpochLog]) -> EpochLog:
    """Highest dev F-beta wins; earlier epochs win ties; no dev scores: last epoch."""
    scored = [e for e in log_entries if e.dev_f is not None]
    if not scored:
        return log_entries[-1]
    return max(scored, key=lambda e: (e.dev_f, -e.epoch))


def evaluate_model(model, examples, beta: float = BETA, batch_size: int = 128) -> MetricsReport:
    stats = DecodeStats()
    noisy = [ex.noisy for ex in examples]
    preds = correct_batch(model, noisy, batch_size, stats)
    gold = [ex.clean.tokens for ex in examples]
    counters = {"bio2_disagreements": stats.disagreements,
                "bio2_malformed_roles": stats.malformed_roles}
    return evaluate_sentences(noisy, preds, gold, model.resources.word_vocab, beta, counters)


def word_accuracy(model, examples, batch_size: int = 128) -> float:
    preds = correct_batch(model, [ex.noisy for ex in examples], batch_size)
    right = total = 0
    for ex, p in zip(examples, preds):
        right += sum(a == b for a, b in zip(p, ex.clean.tokens))
        total += len(p)
    return right / total


def train(model, train_set, dev_set, schedule: TrainSchedule, seed: int = 0,
          progress=None) -> TrainResult:
    """Minibatch Adam training with per-epoch dev selection by F-beta.

    The model ends up holding the selected parameters.  ``progress`` is
    called with each :class:`EpochLog`.
    """
    if not train_set:
        raise ValueError("empty training set")
    res = model.resources
    ds_stats = DatasetStats()
    is_sub = isinstance(model, SubwordTagModel)
    items = prepare(train_set, res, model.max_subwords if is_sub else None, ds_stats)
    if not items:
        raise ValueError("every training sentence was skipped")
    if not is_sub:
        items = [it for it in items if len(it.enc) <= model.max_words] or items
    key = (lambda it: len(it.enc.subword_ids)) if is_sub else None
    rng = np.random.default_rng(seed)
    model.set_dropout_rng(np.random.default_rng([seed, 1]))
    n_batches = math.ceil(len(items) / schedule.batch_size)
    opt = Adam(model.named_parameters(), lr=schedule.lr,
               total_steps=schedule.epochs * n_batches)
    result = TrainResult(0, None, model.state_dict(), skipped_too_long=ds_stats.skipped_too_long,
                         optimizer=opt)
    last_good = result.best_state
    for epoch in range(1, schedule.epochs + 1):
        t0 = time.perf_counter()
        model.train()
        lr = opt.current_lr()
        total, count = 0.0, 0
        skipped_before = opt.state.skipped
        for idx in bucketed_batches(items, schedule.batch_size, rng, key):
            batch = make_batch([items[i] for i in idx], res)
            model.zero_grad()
            loss = model.loss(batch)
            value = float(loss.data)
            if not math.isfinite(value):
                model.load_state_dict(last_good)
                raise TrainingDiverged(epoch, result)
            loss.backward()
            opt.step()
            total += value
            count += 1
        entry = EpochLog(epoch, total / count, lr, 0.0,
                         skipped_steps=opt.state.skipped - skipped_before)
        if dev_set:
            report = evaluate_model(model, dev_set, schedule.beta, schedule.eval_batch_size)
            entry.dev_f = report.overall.f_beta
            entry.dev = report.to_dict()["overall"]
        if schedule.target_train_accuracy is not None:
            entry.train_accuracy = word_accuracy(model, train_set, schedule.eval_batch_size)
        entry.seconds = time.perf_counter() - t0
        result.log.append(entry)
        last_good = model.state_dict()
        if select_best(result.log) is entry:
            result.best_epoch, result.best_dev_f = epoch, entry.dev_f
            result.best_state = last_good
        if progress is not None:
            progress(entry)
        log.info("epoch %d loss %.4f dev_f %s", epoch, entry.loss, entry.dev_f)
        if (schedule.target_train_accuracy is not None
                and entry.train_accuracy >= schedule.target_train_accuracy):
            result.stopped_early = True
            break
    model.load_state_dict(result.best_state)
    model.eval()
    return result
