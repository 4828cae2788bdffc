"""Finite-difference verification for every differentiable component.

Each registry entry builds a fresh, randomly configured instance of one layer
or loss and a scalar-valued closure over a single input tensor. run_all drives
many seeded trials per component and reports the worst relative error seen, so
a broken backward anywhere in the stack surfaces with its component named.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import (
    Activation,
    BatchNorm1D,
    Conv1D,
    GaussianSampling,
    PowerNormalization,
    softmax,
)
from .losses import beta_vae_loss, binary_cross_entropy, kl_standard_normal
from .seeding import derive_seed
from .tensor import Tensor, finite_difference_check


@dataclass(frozen=True)
class ComponentReport:
    name: str
    trials: int
    max_rel_err: float
    passed: bool


def _probe(rng, shape):
    # a fixed random linear readout turns any output into a scalar
    w = rng.normal(size=shape)
    return lambda t: (t * Tensor(w)).sum()


def _elementwise_chain(rng):
    x0 = rng.uniform(0.5, 2.0, size=(3, 4))
    shift = Tensor(rng.normal(size=(3, 4)))
    def f(x):
        y = (x * 0.7 + shift) * x
        return (y.square() + y.exp() * 0.1).sum()
    return f, x0


def _log_sqrt_chain(rng):
    x0 = rng.uniform(0.5, 3.0, size=(2, 5))
    def f(x):
        return (x.log() + x.sqrt()).mean()
    return f, x0


def _clip_interior(rng):
    # inputs kept away from the clip edges, where the derivative jumps
    x0 = rng.uniform(-0.8, 0.8, size=(4, 3))
    def f(x):
        return (x.clip(-1.0, 1.0).square()).sum()
    return f, x0


def _matmul(rng):
    x0 = rng.normal(size=(3, 4))
    w = Tensor(rng.normal(size=(4, 2)))
    probe = _probe(rng, (3, 2))
    return lambda x: probe(x.matmul(w)), x0


def _reductions(rng):
    x0 = rng.normal(size=(2, 3, 4))
    def f(x):
        return x.sum(axis=2).mean(axis=1).sum() + x.mean() * 0.5
    return f, x0


def _conv(rng, kernel_size, stride):
    batch, length = 2, 6
    c_in = int(rng.integers(2, 5))
    c_out = int(rng.integers(2, 5))
    conv = Conv1D(c_in, c_out, kernel_size=kernel_size, stride=stride,
                  rng=np.random.default_rng(rng.integers(2**32)))
    conv.weight.data = rng.normal(size=conv.weight.shape) * 0.5
    conv.bias.data = rng.normal(size=conv.bias.shape) * 0.1
    x0 = rng.normal(size=(batch, length, c_in))
    out_len = -(-length // stride)
    probe = _probe(rng, (batch, out_len, c_out))
    return conv, probe, x0


def _conv_k1_input(rng):
    conv, probe, x0 = _conv(rng, kernel_size=1, stride=1)
    return lambda x: probe(conv(x)), x0


def _conv_k3_input(rng):
    stride = int(rng.integers(1, 3))
    conv, probe, x0 = _conv(rng, kernel_size=3, stride=stride)
    return lambda x: probe(conv(x)), x0


def _conv_weight(rng):
    conv, probe, x0 = _conv(rng, kernel_size=int(rng.integers(1, 4)), stride=1)
    xc = Tensor(x0)
    def f(w):
        conv.weight = w
        return probe(conv(xc))
    return f, conv.weight.data.copy()


def _batchnorm(rng, training):
    channels = int(rng.integers(2, 5))
    bn = BatchNorm1D(channels)
    bn.training = training
    bn.gamma.data = rng.uniform(0.5, 1.5, size=channels)
    bn.shift.data = rng.normal(size=channels) * 0.3
    if not training:
        bn.running_mean = rng.normal(size=channels) * 0.2
        bn.running_var = rng.uniform(0.5, 2.0, size=channels)
    x0 = rng.normal(size=(3, 4, channels))
    probe = _probe(rng, (3, 4, channels))
    return lambda x: probe(bn(x)), x0


def _batchnorm_train(rng):
    return _batchnorm(rng, training=True)


def _batchnorm_eval(rng):
    return _batchnorm(rng, training=False)


def _sampling(rng):
    dim = int(rng.integers(2, 5))
    layer = GaussianSampling(dim)
    eps = rng.normal(size=(2, 3, dim))
    logvar = Tensor(rng.normal(size=(2, 3, dim)) * 0.5)
    probe = _probe(rng, (2, 3, dim))
    def f(mu):
        return probe(layer(mu, logvar, eps=eps))
    return f, rng.normal(size=(2, 3, dim))


def _sampling_logvar(rng):
    dim = int(rng.integers(2, 5))
    layer = GaussianSampling(dim)
    eps = rng.normal(size=(2, 3, dim))
    mu = Tensor(rng.normal(size=(2, 3, dim)))
    probe = _probe(rng, (2, 3, dim))
    def f(logvar):
        return probe(layer(mu, logvar, eps=eps))
    return f, rng.normal(size=(2, 3, dim)) * 0.5


def _power_norm(rng):
    layer = PowerNormalization()
    x0 = rng.normal(size=(2, 3, 4)) + 0.1
    probe = _probe(rng, (2, 3, 4))
    return lambda x: probe(layer(x)), x0


def _power_norm_per_position(rng):
    layer = PowerNormalization(per_position=True)
    x0 = rng.normal(size=(2, 3, 4)) + 0.1
    probe = _probe(rng, (2, 3, 4))
    return lambda x: probe(layer(x)), x0


def _elu(rng):
    act = Activation("elu")
    x0 = rng.normal(size=(3, 5))
    probe = _probe(rng, (3, 5))
    return lambda x: probe(act(x)), x0


def _relu(rng):
    act = Activation("relu")
    # keep samples away from the kink at zero, where the derivative jumps
    x0 = rng.uniform(0.2, 2.0, size=(3, 5)) * rng.choice([-1.0, 1.0], size=(3, 5))
    probe = _probe(rng, (3, 5))
    return lambda x: probe(act(x)), x0


def _softmax(rng):
    x0 = rng.normal(size=(2, 3, 4))
    probe = _probe(rng, (2, 3, 4))
    return lambda x: probe(softmax(x)), x0


def _kl_mu(rng):
    logvar = Tensor(rng.normal(size=(3, 2, 4)) * 0.5)
    return lambda mu: kl_standard_normal(mu, logvar), rng.normal(size=(3, 2, 4))


def _kl_logvar(rng):
    mu = Tensor(rng.normal(size=(3, 2, 4)))
    return lambda lv: kl_standard_normal(mu, lv), rng.normal(size=(3, 2, 4)) * 0.5


def _bce(rng):
    target = np.zeros((2, 3, 4))
    target[..., 0] = 1.0
    tgt = Tensor(target)
    # probabilities kept strictly inside (0, 1), away from the clip floor
    x0 = rng.uniform(0.05, 0.95, size=(2, 3, 4))
    return lambda pred: binary_cross_entropy(pred, tgt), x0


def _beta_vae(rng):
    target = np.zeros((2, 3, 4))
    target[..., 1] = 1.0
    tgt = Tensor(target)
    pred = Tensor(rng.uniform(0.05, 0.95, size=(2, 3, 4)))
    logvar = Tensor(rng.normal(size=(2, 3, 4)) * 0.5)
    def f(mu):
        total, _ = beta_vae_loss(pred, tgt, mu, logvar, beta=1e-2)
        return total
    return f, rng.normal(size=(2, 3, 4))


REGISTRY = (
    ("elementwise_chain", _elementwise_chain),
    ("log_sqrt_chain", _log_sqrt_chain),
    ("clip_interior", _clip_interior),
    ("matmul", _matmul),
    ("reductions", _reductions),
    ("conv1d_k1_input", _conv_k1_input),
    ("conv1d_k3_input", _conv_k3_input),
    ("conv1d_weight", _conv_weight),
    ("batchnorm_train", _batchnorm_train),
    ("batchnorm_eval", _batchnorm_eval),
    ("gaussian_sampling_mu", _sampling),
    ("gaussian_sampling_logvar", _sampling_logvar),
    ("power_norm", _power_norm),
    ("power_norm_per_position", _power_norm_per_position),
    ("elu", _elu),
    ("relu", _relu),
    ("softmax", _softmax),
    ("kl_mu", _kl_mu),
    ("kl_logvar", _kl_logvar),
    ("binary_cross_entropy", _bce),
    ("beta_vae_loss", _beta_vae),
)


def component_names() -> list[str]:
    return [name for name, _ in REGISTRY]


def run_component(name: str, trials: int = 100, rel_tol: float = 1e-4,
                  seed: int = 0) -> ComponentReport:
    builders = dict(REGISTRY)
    if name not in builders:
        raise KeyError(f"unknown component {name!r}; known: {component_names()}")
    index = component_names().index(name)
    worst = 0.0
    ok = True
    for trial in range(trials):
        rng = np.random.default_rng(derive_seed(seed, index, trial))
        f, x0 = builders[name](rng)
        report = finite_difference_check(f, Tensor(np.asarray(x0, dtype=np.float64)),
                                         rel_tol=rel_tol)
        worst = max(worst, report.max_rel_err)
        ok = ok and report.passed
    return ComponentReport(name=name, trials=trials, max_rel_err=worst, passed=ok)


def run_all(trials: int = 100, rel_tol: float = 1e-4, seed: int = 0) -> list[ComponentReport]:
    return [run_component(name, trials=trials, rel_tol=rel_tol, seed=seed)
            for name, _ in REGISTRY]
