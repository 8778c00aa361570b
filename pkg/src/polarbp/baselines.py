"""Classical constructions: Bhattacharyya recursion and reliability-sequence files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .polar_core import CodeConfig, CodeError, log2_exact

METHODS = ("bhattacharyya_bec", "bhattacharyya_awgn", "sequence_file")


@dataclass(frozen=True)
class DesignSpec:
    method: str
    param: float | str

    def __post_init__(self):
        method = self.method.replace("-", "_")
        if method not in METHODS:
            raise CodeError(f"unknown construction method {self.method!r}")
        object.__setattr__(self, "method", method)
        if method == "bhattacharyya_bec":
            if not 0.0 < float(self.param) < 1.0:
                raise CodeError(f"erasure probability must lie in (0, 1), got {self.param}")
        elif method == "bhattacharyya_awgn":
            if not np.isfinite(float(self.param)):
                raise CodeError("design SNR must be finite")


def bhattacharyya_parameters(N: int, z0: float) -> np.ndarray:
    """Bit-channel Bhattacharyya parameters in natural index order.

    The split at each level sends bit ``b`` of the index to ``2Z - Z^2`` when
    ``b = 0`` and to ``Z^2`` when ``b = 1``, most significant bit first, which
    matches the butterfly encoder's stage order.
    """
    n = log2_exact(N)
    z = np.array([float(z0)])
    for _ in range(n):
        nxt = np.empty(2 * z.size)
        nxt[0::2] = 2.0 * z - z * z
        nxt[1::2] = z * z
        z = nxt
    return z


def initial_z(spec: DesignSpec) -> float:
    if spec.method == "bhattacharyya_bec":
        return float(spec.param)
    if spec.method == "bhattacharyya_awgn":
        # design SNR read as Es/N0 in dB
        return float(np.exp(-10.0 ** (float(spec.param) / 10.0)))
    raise CodeError(f"{spec.method} has no Bhattacharyya parameter")


def smallest_k(values: np.ndarray, k: int) -> list[int]:
    """Indices of the k smallest values, ties toward the lower index."""
    order = np.argsort(values, kind="stable")
    return sorted(int(i) for i in order[:k])


def bhattacharyya_construct(N: int, k: int, spec: DesignSpec) -> CodeConfig:
    if not 1 <= k <= N:
        raise CodeError(f"k must satisfy 1 <= k <= N, got k={k}, N={N}")
    z = bhattacharyya_parameters(N, initial_z(spec))
    return CodeConfig(N, k, tuple(smallest_k(z, k)))


def parse_sequence(text: str) -> list[int]:
    """Reliability order, least to most reliable, one index per line.

    Indices are 0-based. A complete 0-based sequence always contains 0, so a
    file without 0 is read as 1-based and shifted down.
    """
    seq = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            seq.append(int(line))
        except ValueError:
            raise CodeError(f"line {lineno}: not an integer: {line!r}") from None
    if not seq:
        raise CodeError("empty reliability sequence")
    if len(set(seq)) != len(seq):
        raise CodeError("duplicate index in reliability sequence")
    if min(seq) < 0:
        raise CodeError("negative index in reliability sequence")
    if 0 not in seq:
        seq = [i - 1 for i in seq]
    return seq


def info_set_from_sequence(seq: list[int], N: int, k: int) -> CodeConfig:
    sub = [i for i in seq if i < N]
    if len(sub) != N:
        raise CodeError(f"sequence does not cover all {N} positions")
    return CodeConfig(N, k, tuple(sub[-k:]))


def load_sequence_file(path, N: int, k: int) -> CodeConfig:
    log2_exact(N)
    if not 1 <= k <= N:
        raise CodeError(f"k must satisfy 1 <= k <= N, got k={k}, N={N}")
    return info_set_from_sequence(parse_sequence(Path(path).read_text()), N, k)


def construct(N: int, k: int, spec: DesignSpec) -> CodeConfig:
    if spec.method == "sequence_file":
        return load_sequence_file(spec.param, N, k)
    return bhattacharyya_construct(N, k, spec)


def design_label(spec: DesignSpec) -> str:
    return "sequence" if spec.method == "sequence_file" else "bhattacharyya"


def random_code(N: int, k: int, rng: np.random.Generator) -> CodeConfig:
    """Uniformly random k-of-N information set."""
    return CodeConfig(N, k, tuple(int(i) for i in rng.choice(N, size=k, replace=False)))
