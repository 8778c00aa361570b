"""Training losses: information-bit cross-entropy, rate penalty, convergence penalty."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.0
    lambda2: float = 0.0
    R_target: float = 0.5

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "R_target"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")
        if not 0.0 < self.R_target <= 1.0:
            raise ValueError("R_target must lie in (0, 1]")


@dataclass
class LossBreakdown:
    l_ber: float
    l_rate: float
    l_conv: float
    total: float
    grad_u_llr: np.ndarray | None
    grad_a_soft: np.ndarray


def loss_ber(u_llr, u_true, info_mask):
    """Cross-entropy over information positions, averaged over the batch.

    Positive LLR means bit 0, so ``sigmoid(L)`` is read as P(bit = 0). Each
    sample is normalized by its own number of information positions; a sample
    without any contributes nothing. Returns ``(loss, d loss / d u_llr)``.
    """
    L = np.atleast_2d(np.asarray(u_llr, dtype=np.float64))
    u = np.broadcast_to(np.atleast_2d(np.asarray(u_true, dtype=np.float64)), L.shape)
    mask = np.broadcast_to(np.atleast_2d(np.asarray(info_mask, dtype=bool)), L.shape)
    k = mask.sum(axis=1)
    if not np.any(k):
        raise ValueError("empty information mask")
    B = L.shape[0]
    w = np.where(mask, 1.0 / np.maximum(k, 1)[:, None], 0.0) / B
    # -(1-u) log sig(L) - u log(1 - sig(L))
    per_bit = (1.0 - u) * np.logaddexp(0.0, -L) + u * np.logaddexp(0.0, L)
    loss = float(np.sum(w * per_bit))
    grad = w * (expit(L) - (1.0 - u))
    return loss, grad


def loss_rate(a_soft, R_target: float):
    a = np.asarray(a_soft, dtype=np.float64)
    p = expit(a)
    diff = p.mean() - R_target
    return float(diff ** 2), 2.0 * diff * p * (1.0 - p) / a.size


def loss_conv(a_soft):
    a = np.asarray(a_soft, dtype=np.float64)
    e = np.exp(-np.abs(a))
    return float(e.mean()), -np.sign(a) * e / a.size


def total_loss(l_ber: float, grad_ber_a: np.ndarray, l_rate: float, grad_rate: np.ndarray,
               l_conv: float, grad_conv: np.ndarray, weights: LossWeights,
               grad_u_llr=None) -> LossBreakdown:
    """Weighted sum; ``grad_ber_a`` is the BER gradient already mapped onto ``a_soft``."""
    total = l_ber + weights.lambda1 * l_rate + weights.lambda2 * l_conv
    grad = grad_ber_a + weights.lambda1 * grad_rate + weights.lambda2 * grad_conv
    return LossBreakdown(l_ber, l_rate, l_conv, total, grad_u_llr, grad)


LOG_COLUMNS = ("step", "phase", "l_ber", "l_rate", "l_conv", "total", "R_avg")


class LossLog:
    """Append-only training-log CSV."""

    def __init__(self, path=None):
        self.rows: list[tuple] = []
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            with self.path.open("w", newline="") as fh:
                csv.writer(fh).writerow(LOG_COLUMNS)

    def append(self, step: int, phase: str, parts: LossBreakdown, R_avg: float) -> None:
        row = (step, phase, parts.l_ber, parts.l_rate, parts.l_conv, parts.total, R_avg)
        self.rows.append(row)
        if self.path is not None:
            with self.path.open("a", newline="") as fh:
                csv.writer(fh).writerow([row[0], row[1]] + [repr(float(v)) for v in row[2:]])
