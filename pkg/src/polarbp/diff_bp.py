"""Unrolled BP with a recorded tape and a hand-written reverse pass.

The trainable input is the gate vector ``g`` (1 = information, 0 = frozen)
that sets the column-0 prior ``R[0] = (1 - g) * L_MAX``. The forward pass
calls the exact stage kernels of :mod:`polarbp.bp_decoder`, so hard gates
give bit-identical outputs to :func:`polarbp.bp_decoder.decode`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as sigmoid

from .bp_decoder import boxplus, l_sweep_stage, r_sweep_stage, stage_ports, clip
from .channel import L_MAX
from .polar_core import log2_exact, stage_view


def boxplus_grad(x, y):
    """Partial derivatives ``(df/dx, df/dy)`` of the boxplus."""
    s = sigmoid(x + y)
    return s - sigmoid(x - y), s - sigmoid(y - x)


@dataclass(frozen=True)
class UnrolledGraph:
    N: int
    n: int
    n_it: int

    @property
    def layer_count(self) -> int:
        return 2 * self.n_it * (self.n + 1)


def unroll(N: int, n_it: int) -> UnrolledGraph:
    n = log2_exact(N)
    if n_it < 1:
        raise ValueError(f"N_it must be >= 1, got {n_it}")
    return UnrolledGraph(N, n, n_it)


@dataclass
class GateBatch:
    """Per-sample gates ``(B, N)``, or ``(N_it, B, N)`` for untied per-iteration gates."""

    g: np.ndarray
    mode: str = "soft"

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=np.float64)
        if self.mode not in ("hard", "soft"):
            raise ValueError(f"gate mode must be 'hard' or 'soft', got {self.mode!r}")
        if self.mode == "hard" and not np.all((self.g == 0) | (self.g == 1)):
            raise ValueError("hard gates must be 0 or 1")

    @property
    def untied(self) -> bool:
        return self.g.ndim == 3

    def prior(self, t: int) -> np.ndarray:
        g = self.g[t] if self.untied else self.g
        return (1.0 - g) * L_MAX


@dataclass
class Tape:
    graph: UnrolledGraph
    gates: GateBatch
    batch: int
    # (iteration, sweep, stage, a, b, r1, r2) per layer, in execution order
    layers: list = field(default_factory=list)

    def clip_pattern(self) -> np.ndarray:
        """Flattened mask of PE outputs left untouched by the clip."""
        masks = []
        for _, sweep, _, a, b, r1, r2 in self.layers:
            t = boxplus(r1, a)
            if sweep == "L":
                outs = (boxplus(a, b + r2), t + b)
            else:
                outs = (boxplus(r1, b + r2), t + r2)
            masks.extend((np.abs(v) <= L_MAX).ravel() for v in outs)
        return np.concatenate(masks)


def forward(graph: UnrolledGraph, llr_ch, gates: GateBatch):
    """Run the unrolled decoder. Returns ``(u_llr, tape)`` with ``u_llr`` ``(B, N)``."""
    llr = np.asarray(getattr(llr_ch, "llr", llr_ch), dtype=np.float64)
    if llr.ndim == 1:
        llr = llr[None, :]
    B, N = llr.shape
    if N != graph.N:
        raise ValueError(f"LLR length {N} does not match graph N={graph.N}")
    gshape = gates.g.shape[-2:] if gates.g.ndim >= 2 else (1, gates.g.shape[-1])
    if gshape[-1] != N or gshape[0] not in (1, B):
        raise ValueError(f"gate shape {gates.g.shape} incompatible with batch ({B}, {N})")
    if gates.untied and gates.g.shape[0] != graph.n_it:
        raise ValueError("untied gates need one row per iteration")
    n = graph.n
    L = np.zeros((n + 1, B, N))
    R = np.zeros((n + 1, B, N))
    L[n] = clip(llr)
    tape = Tape(graph, gates, B)
    for t in range(graph.n_it):
        R[0] = gates.prior(t)
        for s in range(n, 0, -1):
            tape.layers.append((t, "L", s) + tuple(p.copy() for p in stage_ports(L, R, N, s)))
            l_sweep_stage(L, R, N, s)
        for s in range(1, n + 1):
            tape.layers.append((t, "R", s) + tuple(p.copy() for p in stage_ports(L, R, N, s)))
            r_sweep_stage(L, R, N, s)
    return L[0] + R[0], tape


def _pass(grad, pre):
    return np.where(np.abs(pre) <= L_MAX, grad, 0.0)


def backward(tape: Tape, d_u_llr, per_iteration: bool = False) -> np.ndarray:
    """Gradient of the loss with respect to the gates.

    Returns ``(B, N)``, or ``(N_it, B, N)`` per prior injection when
    ``per_iteration`` is set (the tied gradient is their sum).
    """
    graph = tape.graph
    N, n = graph.N, graph.n
    dU = np.asarray(d_u_llr, dtype=np.float64)
    if dU.ndim == 1:
        dU = dU[None, :]
    if dU.shape != (tape.batch, N):
        raise ValueError(f"gradient shape {dU.shape} does not match tape ({tape.batch}, {N})")
    gL = np.zeros((n + 1, tape.batch, N))
    gR = np.zeros((n + 1, tape.batch, N))
    gL[0] += dU
    gR[0] += dU
    g_prior = np.zeros((graph.n_it, tape.batch, N))

    layers = tape.layers
    per_it = len(layers) // graph.n_it
    for t in range(graph.n_it - 1, -1, -1):
        for _, sweep, s, a, b, r1, r2 in reversed(layers[t * per_it:(t + 1) * per_it]):
            dst = gL[s - 1] if sweep == "L" else gR[s]
            ov = stage_view(dst, N, s)
            g_up, g_lo = ov[..., 0, :].copy(), ov[..., 1, :].copy()
            dst[...] = 0.0
            lv = stage_view(gL[s], N, s)
            rv = stage_view(gR[s - 1], N, s)
            ga, gb, gr1, gr2 = lv[..., 0, :], lv[..., 1, :], rv[..., 0, :], rv[..., 1, :]

            tx, ty = boxplus_grad(r1, a)
            lo_pre = boxplus(r1, a) + (b if sweep == "L" else r2)
            g_lo = _pass(g_lo, lo_pre)
            gr1 += g_lo * tx
            ga += g_lo * ty
            if sweep == "L":
                gb += g_lo
                # upper: f(a, b + r2)
                fx, fy = boxplus_grad(a, b + r2)
                g_up = _pass(g_up, boxplus(a, b + r2))
                ga += g_up * fx
            else:
                gr2 += g_lo
                # upper: f(r1, b + r2)
                fx, fy = boxplus_grad(r1, b + r2)
                g_up = _pass(g_up, boxplus(r1, b + r2))
                gr1 += g_up * fx
            gb += g_up * fy
            gr2 += g_up * fy
        g_prior[t] = gR[0]
        gR[0] = 0.0

    g_gate = -L_MAX * g_prior
    if tape.gates.untied or per_iteration:
        return g_gate
    return g_gate.sum(axis=0)


def _bce_all_zero(u_llr):
    # -log sigmoid(u_llr), mean over positions and samples; smooth test loss
    val = np.logaddexp(0.0, -u_llr).mean()
    grad = -sigmoid(-u_llr) / u_llr.size
    return val, grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    trials: int
    checked: int
    skipped: int


def grad_check(N: int, n_it: int, trials: int, rng: np.random.Generator,
               step: float = 1e-4, degenerate: bool = False) -> GradCheckReport:
    """Compare the analytic gate gradient with central finite differences.

    Relative error per trial is ``|g_an - g_fd| / max(|g_an|, |g_fd|)`` in the
    Euclidean norm. Trials where a finite-difference probe moves any PE
    output across the clip boundary, or whose gates are all exactly 0/1, are
    skipped and counted.
    """
    if N > 32 or n_it > 3:
        raise ValueError("grad_check is limited to N <= 32 and N_it <= 3")
    graph = unroll(N, n_it)
    worst, checked, skipped = 0.0, 0, 0
    for _ in range(trials):
        sigma2 = 1.0 / (10 ** (rng.uniform(0.0, 4.0) / 10))
        llr = 2.0 / sigma2 * (1.0 + np.sqrt(sigma2) * rng.standard_normal((1, N)))
        if degenerate:
            g = rng.integers(0, 2, size=(1, N)).astype(float)
        else:
            g = sigmoid(rng.normal(0.0, 1.5, size=(1, N)))
        if np.all((g == 0) | (g == 1)):
            skipped += 1
            continue
        u_llr, tape = forward(graph, llr, GateBatch(g, "soft"))
        pattern = tape.clip_pattern()
        _, dU = _bce_all_zero(u_llr)
        analytic = backward(tape, dU)[0]
        fd = np.empty(N)
        crossed = False
        for i in range(N):
            side = []
            for h in (step, -step):
                gh = g.copy()
                gh[0, i] += h
                out, tp = forward(graph, llr, GateBatch(gh, "soft"))
                crossed |= not np.array_equal(tp.clip_pattern(), pattern)
                side.append(_bce_all_zero(out)[0])
            fd[i] = (side[0] - side[1]) / (2 * step)
        if crossed:
            skipped += 1
            continue
        denom = max(np.linalg.norm(analytic), np.linalg.norm(fd), 1e-300)
        worst = max(worst, float(np.linalg.norm(analytic - fd) / denom))
        checked += 1
    return GradCheckReport(worst, trials, checked, skipped)
