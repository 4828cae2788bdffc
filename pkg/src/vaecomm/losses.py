"""Variational loss terms.

Reductions follow one convention everywhere: sum over the last axis (latent
dims or categories), then mean over whatever leading axes remain (batch and
block positions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeMismatchError
from .tensor import Tensor

PRED_CLIP = 1e-12


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    kl_term: float
    reconstruction_term: float
    beta: float


def kl_standard_normal(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(N(mu, exp(logvar)) || N(0, I)) in closed form.

    Per example: -0.5 * sum_j (1 + logvar_j - mu_j^2 - exp(logvar_j)),
    then averaged over leading axes. Always >= 0, and 0 only at mu=0, logvar=0.
    """
    if mu.shape != logvar.shape:
        raise ShapeMismatchError(f"mu/logvar shapes differ: {mu.shape} vs {logvar.shape}")
    per = 1.0 + logvar - mu.square() - logvar.exp()
    return per.sum(axis=-1).mean() * -0.5


def binary_cross_entropy(pred: Tensor, target: Tensor) -> Tensor:
    """Multi-label BCE: -sum_m [t log p + (1-t) log(1-p)], averaged over
    leading axes. Predictions are clipped to [1e-12, 1 - 1e-12] first.
    """
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"pred/target shapes differ: {pred.shape} vs {target.shape}")
    t = target.data
    if not np.all((t == 0.0) | (t == 1.0)):
        raise DomainError("target entries must be exactly 0 or 1")
    p = pred.clip(PRED_CLIP, 1.0 - PRED_CLIP)
    term = target * p.log() + (1.0 - target) * (1.0 - p).log()
    return -(term.sum(axis=-1).mean())


def beta_vae_loss(pred: Tensor, target: Tensor, mu: Tensor, logvar: Tensor,
                  beta: float) -> tuple[Tensor, LossBreakdown]:
    """Total loss to minimize: beta * KL + BCE.

    Returns the differentiable scalar plus a float breakdown of the terms.
    """
    if beta < 0.0:
        raise DomainError(f"beta must be non-negative, got {beta}")
    kl = kl_standard_normal(mu, logvar)
    recon = binary_cross_entropy(pred, target)
    total = kl * beta + recon
    return total, LossBreakdown(
        total=float(total),
        kl_term=float(kl),
        reconstruction_term=float(recon),
        beta=beta,
    )


def monte_carlo_expectation(f, mu: np.ndarray, logvar: np.ndarray,
                            n_samples: int, seed: int) -> float | np.ndarray:
    """Estimate E_{h ~ N(mu, exp(logvar))}[f(h)] by reparameterized sampling.

    Draws are stacked on a new leading axis, so ``f`` receives an array of
    shape (n_samples, *mu.shape) and must be vectorized over it. Used as the
    sampling-based oracle against closed-form expectations.
    """
    if n_samples < 1:
        raise DomainError(f"n_samples must be >= 1, got {n_samples}")
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ShapeMismatchError(f"mu/logvar shapes differ: {mu.shape} vs {logvar.shape}")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n_samples,) + mu.shape)
    h = mu + np.exp(0.5 * logvar) * eps
    vals = np.asarray(f(h), dtype=np.float64)
    est = vals.mean(axis=0)
    return est.item() if np.ndim(est) == 0 or est.size == 1 else est
