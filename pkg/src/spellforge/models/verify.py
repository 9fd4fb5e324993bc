from __future__ import annotations

import numpy as np

from ..autodiff.gradcheck import GradCheckReport, finite_difference_check
from .data import make_batch, prepare


def gradcheck_model(model, examples, tolerance: float = 1e-4, n_samples: int = 200,
                    seed: int = 0, step: float = 1e-4) -> GradCheckReport:
    """Finite-difference check of a model's training loss on a fixed batch.

    The model must have been built in float64 (see ``autodiff.precision``).
    The default step is larger than the kernel-level 1e-5: with a loss of a
    few nats, roundoff in the differences at 1e-5 already reaches ~1e-4
    relative error on the smallest attention gradients.
    """
    bad = [(n, p.dtype) for n, p in model.named_parameters() if p.dtype != np.float64]
    if bad:
        raise ValueError(f"gradient check needs float64 parameters; {bad[0][0]} is {bad[0][1]}")
    batch = make_batch(prepare(examples, model.resources), model.resources)
    model.eval()
    return finite_difference_check(lambda: model.loss(batch), list(model.named_parameters()),
                                   n_samples=n_samples, step=step, tolerance=tolerance,
                                   seed=seed)
