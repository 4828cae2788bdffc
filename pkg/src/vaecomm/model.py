"""Transceiver assembly: encoder, sampling, power normalization, decoder.

The transmitter maps one-hot messages to a power-constrained latent signal;
the receiver maps the channel output back to a categorical distribution.
Every convolution is position-wise (kernel size 1), so a trained system can
be applied to any block length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import CHANNEL_KINDS, ChannelModel
from .errors import ConfigError, DomainError
from .layers import (
    Activation,
    BatchNorm1D,
    Conv1D,
    GaussianSampling,
    PowerNormalization,
    softmax,
)
from .losses import LossBreakdown, beta_vae_loss
from .seeding import derive_seed
from .tensor import Tensor

VALID_LATENT_MULTIPLIERS = (2, 4)

_INIT_STREAM = 0
_SAMPLING_STREAM = 1


@dataclass(frozen=True)
class SystemConfig:
    """Static description of one transceiver."""

    k: int
    n: int
    latent_multiplier: int = 2
    hidden_filters: int = 256
    beta: float = 1e-4
    channel_kind: str = "awgn"
    block_length: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k <= 16:
            raise ConfigError(f"k must be in [1, 16], got {self.k}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.latent_multiplier not in VALID_LATENT_MULTIPLIERS:
            raise ConfigError(
                f"latent_multiplier must be one of {VALID_LATENT_MULTIPLIERS}, got {self.latent_multiplier}"
            )
        if self.hidden_filters < 1:
            raise ConfigError(f"hidden_filters must be >= 1, got {self.hidden_filters}")
        if self.beta < 0.0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}")
        if self.channel_kind not in CHANNEL_KINDS:
            raise ConfigError(f"channel_kind must be one of {CHANNEL_KINDS}, got {self.channel_kind!r}")
        if self.block_length < 1:
            raise ConfigError(f"block_length must be >= 1, got {self.block_length}")

    @property
    def M(self) -> int:
        """Message alphabet size, 2^k."""
        return 1 << self.k

    @property
    def code_rate(self) -> float:
        """Bits per channel use, k/n."""
        return self.k / self.n

    @property
    def latent_dim(self) -> int:
        return self.latent_multiplier * self.n


@dataclass
class EndToEndResult:
    probs: Tensor
    mu: Tensor
    logvar: Tensor
    signal: Tensor
    loss: Tensor
    breakdown: LossBreakdown


class CommSystem:
    """End-to-end learned transceiver built from a :class:`SystemConfig`."""

    def __init__(self, config: SystemConfig):
        self.config = config
        self.training = True
        rng = np.random.default_rng(derive_seed(config.seed, _INIT_STREAM))
        M, F, D = config.M, config.hidden_filters, config.latent_dim

        self.tx_conv1 = Conv1D(M, F, rng=rng, name="tx_conv1")
        self.tx_act1 = Activation("elu", name="tx_act1")
        self.tx_conv2 = Conv1D(F, F, rng=rng, name="tx_conv2")
        self.tx_act2 = Activation("elu", name="tx_act2")
        self.tx_bn = BatchNorm1D(F, name="tx_bn")
        self.mu_head = Conv1D(F, D, rng=rng, name="mu_head")
        self.logvar_head = Conv1D(F, D, rng=rng, name="logvar_head")
        self.sampling = GaussianSampling(D, seed=derive_seed(config.seed, _SAMPLING_STREAM))
        self.power_norm = PowerNormalization()

        self.rx_conv1 = Conv1D(D, F, rng=rng, name="rx_conv1")
        self.rx_act1 = Activation("elu", name="rx_act1")
        self.rx_bn = BatchNorm1D(F, name="rx_bn")
        self.rx_conv2 = Conv1D(F, M, rng=rng, name="rx_conv2")

    # -- mode handling -------------------------------------------------------

    def train_mode(self) -> "CommSystem":
        return self._set_training(True)

    def eval_mode(self) -> "CommSystem":
        return self._set_training(False)

    def _set_training(self, flag: bool) -> "CommSystem":
        self.training = flag
        self.tx_bn.training = flag
        self.rx_bn.training = flag
        self.sampling.training = flag
        return self

    # -- parameters ------------------------------------------------------------

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        pairs = []
        for lname in ("tx_conv1", "tx_conv2", "mu_head", "logvar_head", "rx_conv1", "rx_conv2"):
            layer = getattr(self, lname)
            pairs.append((f"{lname}.weight", layer.weight))
            pairs.append((f"{lname}.bias", layer.bias))
        for lname in ("tx_bn", "rx_bn"):
            layer = getattr(self, lname)
            pairs.append((f"{lname}.gamma", layer.gamma))
            pairs.append((f"{lname}.shift", layer.shift))
        return pairs

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(t.size for t in self.parameters())

    # -- forward passes -----------------------------------------------------------

    def transmit(self, onehot) -> tuple[Tensor, Tensor, Tensor]:
        """One-hot messages (batch, L, M) to power-normalized signal, plus
        the posterior mu and logvar the signal was drawn from."""
        x = self._check_onehot(onehot)
        h = self.tx_act1(self.tx_conv1(x))
        h = self.tx_act2(self.tx_conv2(h))
        h = self.tx_bn(h)
        mu = self.mu_head(h)
        logvar = self.logvar_head(h)
        latent = self.sampling(mu, logvar)
        signal = self.power_norm(latent)
        return signal, mu, logvar

    def receive(self, y: Tensor) -> Tensor:
        """Channel output (batch, L, latent_dim) to per-position probabilities."""
        h = self.rx_act1(self.rx_conv1(y))
        h = self.rx_bn(h)
        return softmax(self.rx_conv2(h))

    def end_to_end(self, onehot, channel: ChannelModel) -> EndToEndResult:
        x = self._check_onehot(onehot)
        signal, mu, logvar = self.transmit(x)
        probs = self.receive(channel.apply(signal))
        loss, breakdown = beta_vae_loss(probs, x, mu, logvar, self.config.beta)
        return EndToEndResult(probs=probs, mu=mu, logvar=logvar, signal=signal,
                              loss=loss, breakdown=breakdown)

    def trace(self, onehot, channel: ChannelModel) -> list[tuple[str, np.ndarray]]:
        """Layer-by-layer forward capture, for locating non-finite values."""
        x = self._check_onehot(onehot)
        steps: list[tuple[str, np.ndarray]] = []

        def rec(name, t):
            steps.append((name, t.data))
            return t

        h = rec("tx_conv1", self.tx_conv1(x))
        h = rec("tx_act1", self.tx_act1(h))
        h = rec("tx_conv2", self.tx_conv2(h))
        h = rec("tx_act2", self.tx_act2(h))
        h = rec("tx_bn", self.tx_bn(h))
        mu = rec("mu_head", self.mu_head(h))
        logvar = rec("logvar_head", self.logvar_head(h))
        latent = rec("sampling", self.sampling(mu, logvar))
        signal = rec("power_norm", self.power_norm(latent))
        y = rec("channel", channel.apply(signal))
        h = rec("rx_conv1", self.rx_conv1(y))
        h = rec("rx_act1", self.rx_act1(h))
        h = rec("rx_bn", self.rx_bn(h))
        h = rec("rx_conv2", self.rx_conv2(h))
        rec("softmax", softmax(h))
        return steps

    def _check_onehot(self, onehot) -> Tensor:
        x = onehot if isinstance(onehot, Tensor) else Tensor(np.asarray(onehot, dtype=np.float64))
        if x.ndim != 3 or x.shape[2] != self.config.M:
            raise DomainError(
                f"expected one-hot input of shape (batch, L, {self.config.M}), got {x.shape}"
            )
        d = x.data
        if not np.all((d == 0.0) | (d == 1.0)) or not np.all(d.sum(axis=2) == 1.0):
            raise DomainError("input rows must be exactly one-hot")
        return x
