# ============================================================================
# found_tts/model/gradients.py
# ============================================================================

"""
Gradient Primitives
===================

Stop-gradient, gradient reversal and the straight-through estimator as
custom autograd functions, plus a central-difference gradient checker that
runs in double precision.
"""

import math
from typing import Callable, Dict, Optional

import numpy as np
import torch
import torch.nn as nn
from torch.func import functional_call

from ..core.common import GradCheckResult
from ..core.errors import GradCheckError

__all__ = [
    'StopGradient',
    'GradientReversal',
    'stop_gradient',
    'gradient_reversal',
    'straight_through',
    'finite_diff_check',
    'parameter_function',
]

_REL_FLOOR = 1e-4


class StopGradient(torch.autograd.Function):
    """Identity forward, zero partial derivatives backward"""

    @staticmethod
    def forward(ctx, x):
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return torch.zeros_like(grad_output)


class GradientReversal(torch.autograd.Function):
    """
    Gradient Reversal Layer.

    Forward pass: identity.
    Backward pass: multiplies the incoming gradient by -lambda.
    """

    @staticmethod
    def forward(ctx, x, lambda_):
        ctx.lambda_ = lambda_
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output.neg() * ctx.lambda_, None


def stop_gradient(x: torch.Tensor) -> torch.Tensor:
    return StopGradient.apply(x)


def gradient_reversal(x: torch.Tensor, lambda_: float = 1.0) -> torch.Tensor:
    if not lambda_ > 0:
        raise ValueError(f"Gradient reversal strength must be positive, got {lambda_}")
    return GradientReversal.apply(x, float(lambda_))


def straight_through(z_e: torch.Tensor, z_q: torch.Tensor) -> torch.Tensor:
    """Forward value of z_q, gradient routed entirely to z_e"""
    if z_e.shape != z_q.shape:
        raise ValueError(f"Straight-through shapes differ: {tuple(z_e.shape)} vs {tuple(z_q.shape)}")
    return z_e + stop_gradient(z_q - z_e)


def _scalar(value: torch.Tensor) -> float:
    if value.numel() != 1:
        raise ValueError(f"Gradient check needs a scalar function, got shape {tuple(value.shape)}")
    result = float(value.detach().reshape(()).item())
    if not math.isfinite(result):
        raise GradCheckError(f"Function evaluated to a non-finite value ({result})")
    return result


def finite_diff_check(
    f: Callable[[torch.Tensor], torch.Tensor],
    x: torch.Tensor,
    epsilon: float = 1e-4,
    n_probes: int = 32,
    seed: int = 0,
    oracle: Optional[Callable[[torch.Tensor], torch.Tensor]] = None,
    reject: Optional[Callable[[torch.Tensor, torch.Tensor], bool]] = None,
) -> GradCheckResult:
    """
    Compare the autograd gradient of a scalar function with central
    differences on randomly chosen coordinates.

    Args:
        f: scalar-valued differentiable function; its autograd gradient is checked
        x: point to check at; converted to float64
        epsilon: perturbation size
        n_probes: number of coordinates to probe
        seed: coordinate-selection seed
        oracle: function the central differences are taken of (defaults to f);
            lets a caller hold stopped branches constant
        reject: predicate on (x + eps*e_i, x - eps*e_i); True skips the coordinate,
            used to avoid non-smooth points such as quantizer boundaries

    Returns:
        GradCheckResult with the worst absolute and relative error
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if n_probes < 1:
        raise ValueError("n_probes must be at least 1")
    oracle = oracle or f

    point = x.detach().to(torch.float64).clone().requires_grad_(True)
    value = f(point)
    _scalar(value)
    (analytic,) = torch.autograd.grad(value, point, allow_unused=True)
    if analytic is None:
        analytic = torch.zeros_like(point)
    analytic = analytic.detach().reshape(-1)

    base = point.detach().reshape(-1)
    order = np.random.default_rng(seed).permutation(base.numel())

    max_abs, max_rel, probed = 0.0, 0.0, 0
    with torch.no_grad():
        for coordinate in order:
            if probed >= n_probes:
                break
            plus = base.clone()
            minus = base.clone()
            plus[coordinate] += epsilon
            minus[coordinate] -= epsilon
            plus = plus.reshape(point.shape)
            minus = minus.reshape(point.shape)
            if reject is not None and reject(plus, minus):
                continue
            numeric = (_scalar(oracle(plus)) - _scalar(oracle(minus))) / (2.0 * epsilon)
            exact = float(analytic[coordinate])
            abs_err = abs(exact - numeric)
            rel_err = abs_err / max(abs(exact), abs(numeric), _REL_FLOOR)
            max_abs = max(max_abs, abs_err)
            max_rel = max(max_rel, rel_err)
            probed += 1

    if probed == 0:
        raise GradCheckError("Every probed coordinate was rejected")
    return GradCheckResult(max_abs_err=max_abs, max_rel_err=max_rel, probed_coordinates=probed)


def parameter_function(
    module: nn.Module,
    name: str,
    loss: Callable[..., torch.Tensor],
    *args,
) -> Callable[[torch.Tensor], torch.Tensor]:
    """
    Scalar function of one named parameter, for gradient checks on models.

    `loss` receives the module output of `module(*args)` evaluated with the
    parameter replaced by the probe value.
    """
    params: Dict[str, torch.Tensor] = dict(module.named_parameters())
    if name not in params:
        raise KeyError(f"{module.__class__.__name__} has no parameter {name!r}")

    def evaluate(value: torch.Tensor) -> torch.Tensor:
        return loss(functional_call(module, {name: value}, args))

    return evaluate
