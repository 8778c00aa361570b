"""Stochastic binarizer for the soft A-vector, with straight-through backward.

``a_soft`` holds logits; ``sigmoid(a_soft[i])`` is the probability that
position ``i`` carries information.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .diff_bp import GateBatch

LOGIT_CLAMP = 30.0


@dataclass
class SoftAVector:
    a_soft: np.ndarray

    def __post_init__(self):
        self.a_soft = np.asarray(self.a_soft, dtype=np.float64)
        if self.a_soft.ndim != 1 or not np.all(np.isfinite(self.a_soft)):
            raise ValueError("a_soft must be a finite 1-D vector")

    @property
    def N(self) -> int:
        return self.a_soft.size

    @property
    def probs(self) -> np.ndarray:
        return expit(self.a_soft)

    def clamp(self) -> "SoftAVector":
        np.clip(self.a_soft, -LOGIT_CLAMP, LOGIT_CLAMP, out=self.a_soft)
        return self


def _logits(a_soft) -> np.ndarray:
    return a_soft.a_soft if isinstance(a_soft, SoftAVector) else np.asarray(a_soft, dtype=np.float64)


def sample_hard(a_soft, batch_size: int, rng: np.random.Generator) -> GateBatch:
    """One Bernoulli(sigmoid(a_soft)) realization per sample and position."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    p = expit(_logits(a_soft))
    g = (rng.random((batch_size, p.size)) < p).astype(np.float64)
    return GateBatch(g, "hard")


def soft_gate(a_soft, batch_size: int) -> GateBatch:
    p = expit(_logits(a_soft))
    return GateBatch(np.tile(p, (batch_size, 1)), "soft")


def straight_through_backward(d_gates, a_soft=None, scale_by_sigmoid: bool = False) -> np.ndarray:
    """Map per-sample gate gradients ``(B, N)`` to a logit gradient ``(N,)``.

    Identity through the sampler, averaged over the batch. With
    ``scale_by_sigmoid`` the result is multiplied by ``sigmoid'(a_soft)``
    (ablation switch; needs ``a_soft``).
    """
    d = np.asarray(d_gates, dtype=np.float64)
    if d.ndim == 1:
        d = d[None, :]
    if d.ndim != 2:
        raise ValueError(f"expected (B, N) gate gradients, got shape {d.shape}")
    grad = d.mean(axis=0)
    if scale_by_sigmoid:
        if a_soft is None:
            raise ValueError("scale_by_sigmoid needs a_soft")
        logits = _logits(a_soft)
        if logits.shape != grad.shape:
            raise ValueError("a_soft and gradient shapes differ")
        p = expit(logits)
        grad = grad * p * (1.0 - p)
    return grad


# checkpoint files ----------------------------------------------------------

def format_checkpoint(a_soft: SoftAVector, step: int, phase: str, seed: int) -> str:
    lines = [f"N={a_soft.N}", f"step={step}", f"phase={phase}", f"seed={seed}"]
    lines += [repr(float(v)) for v in a_soft.a_soft]
    return "\n".join(lines) + "\n"


def write_checkpoint(path, a_soft: SoftAVector, step: int, phase: str, seed: int) -> None:
    Path(path).write_text(format_checkpoint(a_soft, step, phase, seed))


def parse_checkpoint(text: str) -> tuple[SoftAVector, dict]:
    header: dict = {}
    values = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
            header[key.strip()] = val.strip()
        else:
            values.append(float(line))
    for key in ("N", "step", "phase", "seed"):
        if key not in header:
            raise ValueError(f"checkpoint missing header '{key}'")
    header["N"] = int(header["N"])
    header["step"] = int(header["step"])
    header["seed"] = int(header["seed"])
    if len(values) != header["N"]:
        raise ValueError(f"checkpoint lists {len(values)} logits, header says N={header['N']}")
    return SoftAVector(np.array(values)), header


def read_checkpoint(path) -> tuple[SoftAVector, dict]:
    return parse_checkpoint(Path(path).read_text())
