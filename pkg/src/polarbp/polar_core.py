"""Polar code identity, butterfly encoding and the Kronecker-matrix oracle.

Indices are 0-based in memory. A-vector files and anything user-facing use
1-based positions so that the P(8,4) code reads ``{4, 6, 7, 8}``.

The butterfly graph has ``n + 1`` columns. Column 0 holds ``u`` (left),
column ``n`` holds the codeword ``x`` (right). Stage ``s`` (1..n) connects
column ``s - 1`` to column ``s`` and pairs index ``i`` with ``i + N / 2**s``
inside blocks of size ``N / 2**(s - 1)``. With ``upper = upper ^ lower`` per
processing element this reproduces ``u @ F2^{(x)n}`` in natural order (no
bit reversal); ``tests/test_polar_core.py`` pins that down exhaustively.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

MAX_ORACLE_N_LOG2 = 12


class CodeError(ValueError):
    """Invalid code parameters or malformed A-vector data."""


def log2_exact(N: int) -> int:
    if not isinstance(N, (int, np.integer)) or N < 2 or (N & (N - 1)) != 0:
        raise CodeError(f"block length must be a power of two >= 2, got {N}")
    return int(N).bit_length() - 1


def stage_distance(N: int, s: int) -> int:
    """Pair distance of butterfly stage ``s`` (1-based, left to right)."""
    return N >> s


def stage_view(col: np.ndarray, N: int, s: int) -> np.ndarray:
    """View the last axis of ``col`` as ``(..., blocks, 2, d)`` for stage ``s``.

    ``view[..., 0, :]`` are the upper PE ports, ``view[..., 1, :]`` the lower.
    """
    d = stage_distance(N, s)
    return col.reshape(col.shape[:-1] + (N // (2 * d), 2, d))


@dataclass(frozen=True)
class CodeConfig:
    """Static identity of a polar code P(N, k).

    ``info_set`` is stored 0-based and sorted. ``frozen_values`` has one bit
    per frozen position in ascending index order.
    """

    N: int
    k: int
    info_set: tuple[int, ...]
    frozen_values: tuple[int, ...] = field(default=())

    def __post_init__(self):
        log2_exact(self.N)
        if not 1 <= self.k <= self.N:
            raise CodeError(f"k must satisfy 1 <= k <= N, got k={self.k}, N={self.N}")
        idx = tuple(int(i) for i in self.info_set)
        if len(set(idx)) != len(idx):
            raise CodeError("duplicate indices in info_set")
        if any(i < 0 or i >= self.N for i in idx):
            raise CodeError("info_set index out of range")
        if len(idx) != self.k:
            raise CodeError(f"|info_set| = {len(idx)} but k = {self.k}")
        object.__setattr__(self, "info_set", tuple(sorted(idx)))
        fv = tuple(int(b) for b in self.frozen_values) or (0,) * (self.N - self.k)
        if len(fv) != self.N - self.k or any(b not in (0, 1) for b in fv):
            raise CodeError("frozen_values must be N - k bits")
        object.__setattr__(self, "frozen_values", fv)

    @property
    def n(self) -> int:
        return log2_exact(self.N)

    @property
    def rate(self) -> float:
        return self.k / self.N

    @property
    def info_mask(self) -> np.ndarray:
        """Boolean A-vector (True = information position)."""
        mask = np.zeros(self.N, dtype=bool)
        mask[list(self.info_set)] = True
        return mask

    @property
    def frozen_set(self) -> tuple[int, ...]:
        info = set(self.info_set)
        return tuple(i for i in range(self.N) if i not in info)

    def info_set_1based(self) -> list[int]:
        return [i + 1 for i in self.info_set]

    def code_id(self) -> str:
        """Short stable hash of (N, k, A-vector, frozen values)."""
        import hashlib

        bits = "".join("1" if b else "0" for b in self.info_mask)
        fv = "".join(str(b) for b in self.frozen_values)
        return hashlib.sha256(f"{self.N}:{self.k}:{bits}:{fv}".encode()).hexdigest()[:12]


def build_code_config(N: int, k: int, info_set: Iterable[int],
                      frozen_values: Iterable[int] | None = None) -> CodeConfig:
    """Validate and build a code from a 1-based information set."""
    idx = [int(i) - 1 for i in info_set]
    return CodeConfig(N, k, tuple(idx), tuple(frozen_values or ()))


def config_from_mask(mask, frozen_values=None) -> CodeConfig:
    mask = np.asarray(mask).astype(bool)
    info = tuple(int(i) for i in np.flatnonzero(mask))
    return CodeConfig(mask.size, len(info), info, tuple(frozen_values or ()))


def polar_transform(u: np.ndarray) -> np.ndarray:
    """Run bits through the butterfly graph along the last axis.

    Works on any batch shape ``(..., N)``; returns a new uint8 array.
    """
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    n = log2_exact(N)
    for s in range(1, n + 1):
        v = stage_view(x, N, s)
        v[..., 0, :] ^= v[..., 1, :]
    return x


def scatter_payload(config: CodeConfig, payload: np.ndarray) -> np.ndarray:
    """Place payload bits on the info set and frozen values elsewhere."""
    payload = np.asarray(payload)
    if payload.shape[-1] != config.k:
        raise CodeError(f"payload length {payload.shape[-1]} != k = {config.k}")
    u = np.zeros(payload.shape[:-1] + (config.N,), dtype=np.uint8)
    u[..., list(config.info_set)] = payload
    frozen = config.frozen_set
    if frozen and any(config.frozen_values):
        u[..., list(frozen)] = np.asarray(config.frozen_values, dtype=np.uint8)
    return u


def encode(config: CodeConfig, payload) -> np.ndarray:
    """Encode a payload of length k (or a batch ``(B, k)``) to codeword bits."""
    return polar_transform(scatter_payload(config, payload))


def generator_matrix(n: int) -> np.ndarray:
    """``F2^{(x)n}`` by explicit Kronecker recursion; test oracle only."""
    if not 1 <= n <= MAX_ORACLE_N_LOG2:
        raise CodeError(f"generator_matrix supports 1 <= n <= {MAX_ORACLE_N_LOG2}, got {n}")
    F2 = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    F = F2
    for _ in range(n - 1):
        F = np.kron(F, F2)
    return F


# A-vector text files -------------------------------------------------------

def write_avector(path, config: CodeConfig, design: str, seed: int = 0) -> None:
    Path(path).write_text(format_avector(config, design, seed))


def format_avector(config: CodeConfig, design: str, seed: int = 0) -> str:
    bits = ",".join("1" if b else "0" for b in config.info_mask)
    return f"N={config.N}\nk={config.k}\ndesign={design}\nseed={seed}\n{bits}\n"


def parse_avector(text: str) -> tuple[CodeConfig, dict]:
    """Parse an A-vector file. Returns the code and its header fields."""
    header: dict[str, str] = {}
    bits_line = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
            header[key.strip()] = val.strip()
        elif bits_line is None:
            bits_line = line
        else:
            raise CodeError("more than one bit line in A-vector file")
    for key in ("N", "k", "design", "seed"):
        if key not in header:
            raise CodeError(f"A-vector file missing header '{key}'")
    if bits_line is None:
        raise CodeError("A-vector file has no bit line")
    try:
        N, k = int(header["N"]), int(header["k"])
        header["seed"] = int(header["seed"])
        bits = [int(b) for b in bits_line.split(",")]
    except ValueError as exc:
        raise CodeError(f"malformed A-vector file: {exc}") from None
    if len(bits) != N or any(b not in (0, 1) for b in bits):
        raise CodeError(f"A-vector bit line must have N={N} entries in {{0,1}}")
    if sum(bits) != k:
        raise CodeError(f"A-vector has {sum(bits)} ones but k={k}")
    header["N"], header["k"] = N, k
    return config_from_mask(bits), header


def read_avector(path) -> tuple[CodeConfig, dict]:
    return parse_avector(Path(path).read_text())
