"""Belief-propagation decoding on the polar butterfly graph.

Messages live in ``L`` and ``R`` arrays of shape ``(n + 1, B, N)`` (column,
frame, position). Column 0 is the ``u`` side and column ``n`` the channel
side. One iteration is a right-to-left L-sweep over stages ``n..1``
followed by a left-to-right R-sweep over stages ``1..n``; all PEs of a stage
update together. Every message is clipped to ``[-L_MAX, L_MAX]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import L_MAX
from .polar_core import CodeConfig, log2_exact, stage_view


def boxplus(x, y):
    """Numerically stable ``ln((1 + e^(x+y)) / (e^x + e^y))``.

    Computed in magnitude form and clipped to ``[0, min(|x|, |y|)]`` so the
    sign and magnitude bounds hold exactly, not just up to rounding.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ax, ay = np.abs(x), np.abs(y)
    m = np.minimum(ax, ay)
    mag = m + np.log1p(np.exp(-(ax + ay))) - np.log1p(np.exp(-np.abs(ax - ay)))
    return np.sign(x) * np.sign(y) * np.clip(mag, 0.0, m)


def boxplus_naive(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.log((1.0 + np.exp(x + y)) / (np.exp(x) + np.exp(y)))


def clip(v):
    return np.clip(v, -L_MAX, L_MAX)


def pe_update(L_in1, L_in2, R_in1, R_in2):
    """One processing element. Returns ``(L_out1, L_out2, R_out1, R_out2)``."""
    t = boxplus(R_in1, L_in1)
    R_out1 = boxplus(R_in1, L_in2 + R_in2)
    R_out2 = t + R_in2
    L_out1 = boxplus(L_in1, L_in2 + R_in2)
    L_out2 = t + L_in2
    return clip(L_out1), clip(L_out2), clip(R_out1), clip(R_out2)


@dataclass
class DecodeResult:
    u_llr: np.ndarray
    x_llr: np.ndarray
    u_hat: np.ndarray
    x_hat: np.ndarray
    iterations_run: int


def hard_decision(llr) -> np.ndarray:
    return (np.asarray(llr) < 0).astype(np.uint8)


def frozen_prior(config: CodeConfig) -> np.ndarray:
    """Column-0 R prior: ``+L_MAX`` on frozen zeros, ``-L_MAX`` on frozen ones."""
    prior = np.zeros(config.N)
    frozen = list(config.frozen_set)
    if frozen:
        prior[frozen] = L_MAX * (1.0 - 2.0 * np.asarray(config.frozen_values, dtype=float))
    return prior


def stage_ports(L, R, N, s):
    """PE inputs of stage ``s``: ``(L_in1, L_in2, R_in1, R_in2)`` as views."""
    lv = stage_view(L[s], N, s)
    rv = stage_view(R[s - 1], N, s)
    return lv[..., 0, :], lv[..., 1, :], rv[..., 0, :], rv[..., 1, :]


def l_sweep_stage(L, R, N, s):
    """Update ``L[s-1]`` from ``L[s]`` and ``R[s-1]``."""
    a, b, r1, r2 = stage_ports(L, R, N, s)
    out = stage_view(L[s - 1], N, s)
    out[..., 0, :] = clip(boxplus(a, b + r2))
    out[..., 1, :] = clip(boxplus(r1, a) + b)


def r_sweep_stage(L, R, N, s):
    """Update ``R[s]`` from ``R[s-1]`` and ``L[s]``."""
    a, b, r1, r2 = stage_ports(L, R, N, s)
    out = stage_view(R[s], N, s)
    out[..., 0, :] = clip(boxplus(r1, b + r2))
    out[..., 1, :] = clip(boxplus(r1, a) + r2)


def run_bp(llr_ch: np.ndarray, prior: np.ndarray, n_it: int):
    """Run ``n_it`` flooding iterations; returns the final ``(L, R)``.

    ``llr_ch`` is ``(B, N)``; ``prior`` broadcasts against it.
    """
    B, N = llr_ch.shape
    n = log2_exact(N)
    L = np.zeros((n + 1, B, N))
    R = np.zeros((n + 1, B, N))
    L[n] = clip(llr_ch)
    R[0] = prior
    for _ in range(n_it):
        for s in range(n, 0, -1):
            l_sweep_stage(L, R, N, s)
        for s in range(1, n + 1):
            r_sweep_stage(L, R, N, s)
    return L, R


def decode(config: CodeConfig, llr_ch, n_it: int) -> DecodeResult:
    """Decode one frame ``(N,)`` or a batch ``(B, N)`` with a fixed iteration count."""
    if n_it < 1:
        raise ValueError(f"N_it must be >= 1, got {n_it}")
    llr = np.asarray(llr_ch, dtype=np.float64)
    single = llr.ndim == 1
    llr2 = llr[None, :] if single else llr
    if llr2.ndim != 2 or llr2.shape[1] != config.N:
        raise ValueError(f"expected channel LLRs of length N={config.N}, got shape {llr.shape}")
    L, R = run_bp(llr2, frozen_prior(config), n_it)
    n = config.n
    u_llr = L[0] + R[0]
    x_llr = L[n] + R[n]
    u_hat = hard_decision(u_llr)[:, list(config.info_set)]
    x_hat = hard_decision(x_llr)
    if single:
        u_llr, x_llr, u_hat, x_hat = u_llr[0], x_llr[0], u_hat[0], x_hat[0]
    return DecodeResult(u_llr, x_llr, u_hat, x_hat, n_it)
