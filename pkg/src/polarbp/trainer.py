"""Three-phase training of the soft A-vector through the unrolled BP decoder."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import baselines
from .binarizer import (LOGIT_CLAMP, SoftAVector, sample_hard, straight_through_backward,
                        write_checkpoint)
from .channel import ChannelConfig, ebn0_to_sigma2, make_rng, modulate_bpsk, transmit
from .diff_bp import backward, forward, unroll
from .objective import LossLog, LossWeights, loss_ber, loss_conv, loss_rate, total_loss
from .polar_core import CodeConfig, log2_exact, polar_transform

log = logging.getLogger(__name__)

TRAIN_STREAM = 1
PHASE_NAMES = ("Initialization", "Optimization", "Saturation")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-3
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, N: int, lr: float = 1e-3) -> "AdamState":
        return cls(np.zeros(N), np.zeros(N), lr)


def adam_step(state: AdamState, grad) -> np.ndarray:
    """Advance the optimizer state and return the parameter delta."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != state.m.shape:
        raise ValueError("gradient shape does not match optimizer state")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return -state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class PhaseSpec:
    name: str
    steps: int
    lambda1: float = 0.0
    lambda2_start: float = 0.0
    lambda2_end: float = 0.0

    def __post_init__(self):
        if self.name not in PHASE_NAMES:
            raise ValueError(f"unknown phase {self.name!r}")
        if self.steps < 0:
            raise ValueError("phase step budget must be >= 0")
        if self.name == "Initialization" and (self.lambda1 or self.lambda2_start or self.lambda2_end):
            raise ValueError("the Initialization phase trains on the BER loss only")
        if self.name == "Optimization" and (self.lambda2_start or self.lambda2_end):
            raise ValueError("the Optimization phase keeps lambda2 at 0")

    def lambda2_at(self, j: int) -> float:
        if self.steps <= 1:
            return self.lambda2_end
        return self.lambda2_start + (self.lambda2_end - self.lambda2_start) * j / (self.steps - 1)


@dataclass
class TrainConfig:
    N: int = 64
    k: int = 32
    n_it: int = 5
    channel: str = "awgn"
    train_snrs: tuple = (2.0, 4.0, 5.0)
    batch_size: int = 128
    lr: float = 1e-3
    steps: tuple = (200, 2000, 2000)
    lambda1: float = 1.0
    lambda2: float = 1.0
    merge_phases: bool = False
    a_init: str = "zeros"
    warm_design_snr_db: float = 0.0
    rate_projection: bool = False
    st_scale_sigmoid: bool = False
    extraction: str = "largest_info"
    payload: str = "zero"
    seed: int = 0

    def __post_init__(self):
        log2_exact(self.N)
        if not 1 <= self.k <= self.N:
            raise ValueError(f"k must satisfy 1 <= k <= N, got k={self.k}")
        if self.n_it < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("n_it, batch_size and lr must be positive")
        self.train_snrs = tuple(float(s) for s in self.train_snrs)
        if not self.train_snrs:
            raise ValueError("training SNR list must not be empty")
        self.steps = tuple(int(s) for s in self.steps)
        if len(self.steps) != 3:
            raise ValueError("steps must give three phase budgets")
        if self.a_init not in ("zeros", "bhattacharyya"):
            raise ValueError(f"unknown a_init {self.a_init!r}")
        if self.extraction not in ("largest_info", "literal"):
            raise ValueError(f"unknown extraction {self.extraction!r}")
        if self.payload not in ("zero", "random"):
            raise ValueError(f"unknown payload mode {self.payload!r}")
        ChannelConfig(self.channel)

    @property
    def R_target(self) -> float:
        return self.k / self.N

    def phases(self) -> list[PhaseSpec]:
        s1, s2, s3 = self.steps
        plan = [PhaseSpec("Initialization", s1)]
        if self.merge_phases:
            plan.append(PhaseSpec("Saturation", s2 + s3, self.lambda1, 0.0, self.lambda2))
        else:
            plan.append(PhaseSpec("Optimization", s2, self.lambda1))
            plan.append(PhaseSpec("Saturation", s3, self.lambda1, 0.0, self.lambda2))
        return plan


@dataclass
class TrainingOutcome:
    a_soft: SoftAVector
    code: CodeConfig
    log: LossLog
    config: dict
    seed: int
    phase_ends: dict = field(default_factory=dict)


def extract_code(a_soft, k: int, literal: bool = False) -> CodeConfig:
    """Information set = the k largest logits (ties toward the lower index).

    ``literal`` takes the k smallest instead, i.e. treats the N - k largest
    logits as frozen.
    """
    a = np.asarray(getattr(a_soft, "a_soft", a_soft), dtype=np.float64)
    if not 1 <= k <= a.size:
        raise ValueError(f"k must satisfy 1 <= k <= N, got {k}")
    key = a if literal else -a
    order = np.argsort(key, kind="stable")
    return CodeConfig(a.size, k, tuple(int(i) for i in order[:k]))


def project_rate(a_soft, R_target: float, tol: float = 1e-6):
    """Shift all logits by one scalar so that ``mean(sigmoid) = R_target``."""
    a = np.asarray(getattr(a_soft, "a_soft", a_soft), dtype=np.float64)
    lo, hi = -60.0, 60.0
    b = 0.0
    for _ in range(200):
        b = 0.5 * (lo + hi)
        err = expit(a + b).mean() - R_target
        if abs(err) < tol:
            break
        if err > 0:
            hi = b
        else:
            lo = b
    return a + b


def initial_logits(cfg: TrainConfig) -> np.ndarray:
    if cfg.a_init == "zeros":
        return np.zeros(cfg.N)
    spec = baselines.DesignSpec("bhattacharyya_awgn", cfg.warm_design_snr_db)
    code = baselines.bhattacharyya_construct(cfg.N, cfg.k, spec)
    return np.where(code.info_mask, 2.0, -2.0)


class Trainer:
    def __init__(self, cfg: TrainConfig, out_dir=None, log_path=None):
        self.cfg = cfg
        self.graph = unroll(cfg.N, cfg.n_it)
        self.rng = make_rng(cfg.seed, TRAIN_STREAM)
        self.a = SoftAVector(initial_logits(cfg))
        self.adam = AdamState.zeros(cfg.N, cfg.lr)
        self.log = LossLog(log_path)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.step = 0
        self._sigma2 = ebn0_to_sigma2(np.array(cfg.train_snrs), cfg.R_target)
        self._channel = ChannelConfig(cfg.channel, cfg.train_snrs[0], cfg.R_target, TRAIN_STREAM)

    def train_step(self, weights: LossWeights, phase: str):
        cfg, rng, B, N = self.cfg, self.rng, self.cfg.batch_size, self.cfg.N
        sigma2 = self._sigma2[rng.integers(0, len(self._sigma2), size=B)]
        gates = sample_hard(self.a, B, rng)
        info = gates.g.astype(bool)
        if cfg.payload == "random":
            u = (rng.integers(0, 2, size=(B, N)) & info).astype(np.uint8)
        else:
            u = np.zeros((B, N), dtype=np.uint8)
        frame = transmit(modulate_bpsk(polar_transform(u)), self._channel, rng, sigma2=sigma2)
        u_llr, tape = forward(self.graph, frame.llr, gates)
        if info.any():
            l_ber, d_u = loss_ber(u_llr, u, info)
            d_g = backward(tape, d_u)
            g_ber = straight_through_backward(d_g, self.a, cfg.st_scale_sigmoid)
        else:
            l_ber, d_u, g_ber = 0.0, None, np.zeros(N)
        l_rate, g_rate = loss_rate(self.a.a_soft, weights.R_target)
        l_conv, g_conv = loss_conv(self.a.a_soft)
        parts = total_loss(l_ber, g_ber, l_rate, g_rate, l_conv, g_conv, weights, d_u)
        self.a.a_soft += adam_step(self.adam, parts.grad_a_soft)
        self.a.clamp()
        if cfg.rate_projection:
            self.a.a_soft[:] = project_rate(self.a.a_soft, weights.R_target)
        self.step += 1
        self.log.append(self.step, phase, parts, float(self.a.probs.mean()))
        return parts

    def run_phase(self, phase: PhaseSpec) -> SoftAVector:
        for j in range(phase.steps):
            w = LossWeights(phase.lambda1, phase.lambda2_at(j), self.cfg.R_target)
            self.train_step(w, phase.name)
        log.info("phase %s done at step %d: R_avg=%.4f conv=%.4f", phase.name, self.step,
                 self.a.probs.mean(), np.exp(-np.abs(self.a.a_soft)).mean())
        if self.out_dir is not None:
            write_checkpoint(self.out_dir / f"checkpoint_{phase.name.lower()}.txt",
                             self.a, self.step, phase.name, self.cfg.seed)
        return self.a


def train(cfg: TrainConfig, out_dir=None, log_path=None, callback=None) -> TrainingOutcome:
    """Run all phases and extract a deterministic code of dimension ``cfg.k``.

    ``callback(phase_name, trainer)`` is invoked after each phase.
    """
    tr = Trainer(cfg, out_dir, log_path)
    ends = {}
    for phase in cfg.phases():
        tr.run_phase(phase)
        ends[phase.name] = tr.a.a_soft.copy()
        if callback is not None:
            callback(phase.name, tr)
    code = extract_code(tr.a, cfg.k, literal=cfg.extraction == "literal")
    return TrainingOutcome(tr.a, code, tr.log, asdict(cfg), cfg.seed, ends)
