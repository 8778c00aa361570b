"""BPSK over AWGN and fast Rayleigh fading, with channel LLRs.

Sign convention used everywhere in the package: bit 0 maps to +1, bit 1 to
-1, so a positive LLR favours bit 0.

SNR convention: ``ebn0_db`` is Eb/N0 and the noise variance is
``1 / (2 * code_rate * 10**(ebn0_db / 10))`` for unit-energy symbols.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

L_MAX = 20.0


class ChannelError(ValueError):
    pass


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, stream)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream),)))


def ebn0_to_sigma2(ebn0_db, code_rate: float):
    return 1.0 / (2.0 * code_rate * 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0))


@dataclass(frozen=True)
class ChannelConfig:
    kind: str = "awgn"
    ebn0_db: float = 0.0
    code_rate: float = 0.5
    stream: int = 0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("awgn", "rayleigh"):
            raise ChannelError(f"unknown channel kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not 0.0 < self.code_rate <= 1.0:
            raise ChannelError(f"code rate must lie in (0, 1], got {self.code_rate}")

    @property
    def sigma2(self) -> float:
        return float(ebn0_to_sigma2(self.ebn0_db, self.code_rate))


@dataclass
class LlrFrame:
    llr: np.ndarray
    truth_bits: np.ndarray
    channel: ChannelConfig

    def __post_init__(self):
        if self.llr.shape != self.truth_bits.shape:
            raise ChannelError("llr and truth_bits shapes differ")
        if not np.all(np.isfinite(self.llr)):
            raise ChannelError("non-finite channel LLR")


def modulate_bpsk(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def _bits_of(symbols: np.ndarray) -> np.ndarray:
    return (symbols < 0).astype(np.uint8)


def _sigma2_array(config: ChannelConfig, shape, sigma2):
    """Per-frame noise variance broadcast against ``shape``."""
    if sigma2 is None:
        sigma2 = config.sigma2
    s2 = np.asarray(sigma2, dtype=np.float64)
    if np.any(s2 <= 0):
        raise ChannelError("noise variance must be positive")
    if s2.ndim == 1 and len(shape) == 2:
        s2 = s2[:, None]
    return s2


def transmit_awgn(symbols, config: ChannelConfig, rng: np.random.Generator,
                  sigma2=None, noiseless: bool = False) -> LlrFrame:
    """``y = x + n`` with ``L_ch = 2 y / sigma2``.

    ``sigma2`` may be a per-frame vector (used by the trainer to mix SNRs).
    ``noiseless`` replaces the channel by ``L_MAX * x``.
    """
    x = np.asarray(symbols, dtype=np.float64)
    if noiseless:
        return LlrFrame(L_MAX * x, _bits_of(x), config)
    s2 = _sigma2_array(config, x.shape, sigma2)
    y = x + np.sqrt(s2) * rng.standard_normal(x.shape)
    llr = (2.0 / s2) * y
    return LlrFrame(llr, _bits_of(x), config)


RAYLEIGH_SCALE = 1.0 / np.sqrt(2.0)


def draw_fading(rng: np.random.Generator, shape) -> np.ndarray:
    """Rayleigh amplitudes with ``E[alpha^2] = 1``."""
    return rng.rayleigh(RAYLEIGH_SCALE, size=shape)


def transmit_rayleigh(symbols, config: ChannelConfig, rng: np.random.Generator,
                      sigma2=None, alpha=None, noiseless: bool = False) -> LlrFrame:
    """Fast fading ``y = alpha x + n`` with perfect CSI, ``L_ch = 2 alpha y / sigma2``.

    Passing ``alpha`` fixes the fades (test hook); no fading draws are then
    consumed, so ``alpha=1`` matches :func:`transmit_awgn` bit for bit.
    """
    x = np.asarray(symbols, dtype=np.float64)
    if noiseless:
        return LlrFrame(L_MAX * x, _bits_of(x), config)
    s2 = _sigma2_array(config, x.shape, sigma2)
    if alpha is None:
        a = draw_fading(rng, x.shape)
    else:
        a = np.broadcast_to(np.asarray(alpha, dtype=np.float64), x.shape)
    y = a * x + np.sqrt(s2) * rng.standard_normal(x.shape)
    llr = (2.0 / s2) * a * y
    return LlrFrame(llr, _bits_of(x), config)


def transmit(symbols, config: ChannelConfig, rng, **kwargs) -> LlrFrame:
    if config.kind == "awgn":
        kwargs.pop("alpha", None)
        return transmit_awgn(symbols, config, rng, **kwargs)
    return transmit_rayleigh(symbols, config, rng, **kwargs)
