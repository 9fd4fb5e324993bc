from __future__ import annotations

from typing import Sequence

from ..tokenize import DecodeStats
from .correctors import SubwordTagModel
from .data import Item, make_batch


def _windows(enc_lengths: Sequence[int], limit: int) -> list[tuple[int, int]]:
    """Split word indices into consecutive runs whose summed length fits ``limit``."""
    out, start, used = [], 0, 0
    for i, n in enumerate(enc_lengths):
        if used and used + n > limit:
            out.append((start, i))
            start, used = i, 0
        used += n
    out.append((start, len(enc_lengths)))
    return out


def _split_long(model, noisy: Sequence[str]) -> list[Sequence[str]]:
    res = model.resources
    if isinstance(model, SubwordTagModel):
        lengths = [len(res.subword.segment(w)) for w in noisy]
        limit = model.max_subwords
    else:
        lengths = [1] * len(noisy)
        limit = model.max_words
    if sum(lengths) <= limit:
        return [noisy]
    return [noisy[a:b] for a, b in _windows(lengths, limit)]


def correct_batch(model, sentences: Sequence[Sequence[str]], batch_size: int = 64,
                  stats: DecodeStats | None = None) -> list[list[str]]:
    """Correct many sentences; output token counts always equal input counts.

    Inputs longer than the encoder allows are corrected window by window.
    """
    was_training = model.training
    model.eval()
    res = model.resources
    pieces, owner = [], []
    for s_idx, noisy in enumerate(sentences):
        if not noisy:
            continue
        for chunk in _split_long(model, list(noisy)):
            pieces.append(Item(res.encode(chunk)))
            owner.append(s_idx)
    order = sorted(range(len(pieces)), key=lambda i: len(pieces[i].enc.subword_ids)
                   or len(pieces[i].enc))
    predicted: list[list[int]] = [None] * len(pieces)
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        preds = model.predict(make_batch([pieces[i] for i in idx], res), stats)
        for i, p in zip(idx, preds):
            predicted[i] = p
    out: list[list[str]] = [[] for _ in sentences]
    entries = res.word_vocab.entries
    for i, s_idx in enumerate(owner):
        out[s_idx].extend(entries[w] for w in predicted[i])
    model.train(was_training)
    return out


def correct_sentence(noisy: Sequence[str], model) -> list[str]:
    """Stand-alone correction of one tokenized sentence (same length out)."""
    return correct_batch(model, [noisy])[0]
