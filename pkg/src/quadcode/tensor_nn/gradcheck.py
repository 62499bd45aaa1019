"""Finite-difference verification of whole-model gradients.

The analytic gradients come from one evaluation-mode backward pass over a
fixed example batch; the numeric side perturbs a seeded subsample of each
parameter's coordinates by +/-epsilon and re-runs the forward. Evaluation
mode matters: dropout must be the identity so the loss is a deterministic
function of the parameters.

Coordinates a parameter pins by construction (see Parameter.pinned) are
excluded; everything else is fair game, dead ReLU paths included (there the
perturbed losses are bit-identical, so numeric and analytic agree at 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import rng
from ..errors import QuadcodeError
from . import ops
from .layers import EVAL, Parameter


@dataclass(frozen=True)
class ParamCheck:
    name: str
    coords_checked: int
    max_rel_error: float


@dataclass(frozen=True)
class GradCheckReport:
    checks: tuple[ParamCheck, ...]
    epsilon: float

    @property
    def max_rel_error(self) -> float:
        return max((c.max_rel_error for c in self.checks), default=0.0)

    def lines(self) -> list[str]:
        out = [f"{c.name:<24} coords {c.coords_checked:>3}  max rel err {c.max_rel_error:.3e}" for c in self.checks]
        out.append(f"{'overall':<24} {'':>10}  max rel err {self.max_rel_error:.3e}")
        return out


def relative_error(a: float, n: float) -> float:
    return abs(a - n) / (abs(a) + abs(n) + 1e-12)


def _mean_loss(model, examples, accumulate: bool = False) -> float:
    """Evaluation-mode mean cross entropy; optionally fills Parameter.grad.

    A model here is anything with forward_logits(indices, ctx) and
    backward_from_logits(caches, grad); examples carry .indices and .label.
    """
    n = len(examples)
    total = 0.0
    for example in examples:
        logits, caches = model.forward_logits(example.indices, EVAL)
        loss, probs = ops.softmax_cross_entropy(logits, example.label)
        total += loss
        if accumulate:
            grad = ops.softmax_cross_entropy_backward(probs, example.label) / n
            model.backward_from_logits(caches, grad)
    return total / n


def _candidate_coords(p: Parameter) -> np.ndarray:
    if p.pinned is None:
        return np.arange(p.size)
    return np.flatnonzero(~p.pinned.reshape(-1))


def finite_difference_check(
    model,
    examples,
    epsilon: float = 1e-5,
    max_coords_per_param: int = 6,
    seed: int = 0,
) -> GradCheckReport:
    """Central-difference check of every parameter against the backward pass.

    Reports each parameter's worst relative error |a-n| / (|a|+|n|+1e-12)
    over a seeded coordinate subsample.
    """
    if not examples:
        raise QuadcodeError("gradient check needs at least one example")
    params = model.parameters()
    for p in params:
        p.zero_grad()
    _mean_loss(model, examples, accumulate=True)
    analytic = [p.grad.copy().reshape(-1) for p in params]
    for p in params:
        p.zero_grad()

    checks = []
    for index, (p, grads) in enumerate(zip(params, analytic)):
        candidates = _candidate_coords(p)
        if candidates.size == 0:
            checks.append(ParamCheck(p.name, 0, 0.0))
            continue
        gen = rng.stream(seed, rng.GRADCHECK, index)
        take = min(max_coords_per_param, candidates.size)
        coords = gen.choice(candidates, size=take, replace=False)
        flat = p.value.reshape(-1)
        worst = 0.0
        for coord in coords:
            original = flat[coord]
            flat[coord] = original + epsilon
            plus = _mean_loss(model, examples)
            flat[coord] = original - epsilon
            minus = _mean_loss(model, examples)
            flat[coord] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            worst = max(worst, relative_error(float(grads[coord]), numeric))
        checks.append(ParamCheck(p.name, take, worst))
    return GradCheckReport(tuple(checks), epsilon)
