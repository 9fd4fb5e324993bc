"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    tolerance: float
    worst: tuple[str, tuple] | None = None
    per_tensor: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _sample_indices(named, n_samples: int, rng):
    """At least one entry per tensor; the rest spread in proportion to size."""
    sizes = np.array([p.data.size for _, p in named], dtype=float)
    quota = np.minimum(np.maximum(1, np.floor(n_samples * sizes / sizes.sum())), sizes)
    quota = quota.astype(int)
    # top up from the largest tensors until n_samples entries (or everything) is covered
    for i in np.argsort(-sizes, kind="stable"):
        short = n_samples - quota.sum()
        if short <= 0:
            break
        quota[i] += min(short, int(sizes[i]) - quota[i])
    plan = []
    for (name, p), q in zip(named, quota):
        flat = rng.choice(p.data.size, size=q, replace=False)
        plan.extend((name, np.unravel_index(i, p.shape)) for i in np.sort(flat))
    return plan


def relative_error(a: float, b: float, floor: float = 1e-6) -> float:
    # the floor keeps roundoff on near-zero gradients (~1e-11 absolute) from dominating
    return abs(a - b) / max(abs(a), abs(b), floor)


def finite_difference_check(loss_fn, named_params, n_samples: int = 200, step: float = 1e-5,
                            tolerance: float = 1e-4, seed: int = 0,
                            analytic: dict[str, np.ndarray] | None = None) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn()`` with central differences.

    ``loss_fn`` must be deterministic (dropout off) and return a scalar
    Tensor.  Pass ``analytic`` to check a precomputed gradient instead of
    running backward.  Failures are reported, never raised.
    """
    named = list(named_params)
    params = dict(named)
    if analytic is None:
        for _, p in named:
            p.grad = np.zeros_like(p.data)
        loss: Tensor = loss_fn()
        loss.backward()
        analytic = {name: p.grad.copy() for name, p in named}
    rng = np.random.default_rng(seed)
    worst, max_err, per_tensor = None, 0.0, {}
    plan = _sample_indices(named, n_samples, rng)
    for name, idx in plan:
        p = params[name]
        orig = p.data[idx].copy()
        p.data[idx] = orig + step
        up = float(loss_fn().data)
        p.data[idx] = orig - step
        down = float(loss_fn().data)
        p.data[idx] = orig
        numeric = (up - down) / (2 * step)
        err = relative_error(float(analytic[name][idx]), numeric)
        per_tensor[name] = max(per_tensor.get(name, 0.0), err)
        if worst is None or err > max_err:
            max_err = err
            worst = (name, tuple(int(i) for i in idx))
    return GradCheckReport(max_err, len(plan), tolerance, worst, per_tensor)
