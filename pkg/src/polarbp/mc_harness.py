"""Seeded Monte-Carlo BER/BLER simulation and paired code comparison.

Frames are processed in fixed-size chunks, each with its own generator
derived from ``(point seed, chunk index)``. The stop rule is evaluated on
chunks in index order, so results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .bp_decoder import decode
from .channel import ChannelConfig, make_rng, modulate_bpsk, transmit
from .polar_core import CodeConfig, encode

CHUNK_FRAMES = 250
Z95 = 1.959963984540054


@dataclass(frozen=True)
class StopRule:
    min_frames: int = 1000
    max_frames: int = 100_000
    target_errors: int = 100

    def __post_init__(self):
        if self.min_frames < 1 or self.min_frames > self.max_frames:
            raise ValueError("StopRule needs 1 <= min_frames <= max_frames")
        if self.target_errors < 1:
            raise ValueError("target_errors must be >= 1")

    def done(self, frames: int, frame_errors: int) -> bool:
        if frames >= self.max_frames:
            return True
        return frames >= self.min_frames and frame_errors >= self.target_errors


@dataclass
class BERRecord:
    snr_db: float
    frames: int
    bit_errors: int
    info_bits: int
    frame_errors: int
    ber: float
    bler: float
    n_it: int
    channel: str
    code_id: str
    seed: int


CSV_COLUMNS = tuple(f.name for f in fields(BERRecord))


def point_seed(master: int, snr_db: float, tag: str) -> int:
    digest = hashlib.sha256(f"{int(master)}|{float(snr_db)!r}|{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class _Job:
    code: CodeConfig
    kind: str
    snr_db: float
    n_it: int
    seed: int
    noiseless: bool = False
    alpha: float | None = None


def _chunk_errors(job: _Job, chunk: int, frames: int) -> np.ndarray:
    """Per-frame information-bit error counts for one chunk."""
    code = job.code
    rng = make_rng(job.seed, chunk)
    ch = ChannelConfig(job.kind, job.snr_db, code.rate)
    payload = rng.integers(0, 2, size=(frames, code.k), dtype=np.uint8)
    x = encode(code, payload)
    kwargs = {"noiseless": job.noiseless}
    if job.alpha is not None:
        kwargs["alpha"] = job.alpha
    frame = transmit(modulate_bpsk(x), ch, rng, **kwargs)
    res = decode(code, frame.llr, job.n_it)
    return np.count_nonzero(res.u_hat != payload, axis=1)


def _run_chunk(args):
    jobs, chunk, frames = args
    return [_chunk_errors(job, chunk, frames) for job in jobs]


def _run_chunks(jobs: list[_Job], stop: StopRule, workers: int, chunk_frames: int):
    """Run chunks for all jobs in lockstep until the stop rule holds for every job.

    Returns per-job arrays of per-frame error counts.
    """
    collected: list[list[np.ndarray]] = [[] for _ in jobs]
    frames = 0
    fe = [0] * len(jobs)
    chunk = 0
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while True:
            wave = []
            remaining = stop.max_frames - frames
            c, planned = chunk, 0
            while len(wave) < max(workers, 1) and planned < remaining:
                size = min(chunk_frames, remaining - planned)
                wave.append((jobs, c, size))
                planned += size
                c += 1
            results = pool.map(_run_chunk, wave) if pool else map(_run_chunk, wave)
            for (_, _, size), per_job in zip(wave, results):
                chunk += 1
                frames += size
                for j, errs in enumerate(per_job):
                    collected[j].append(errs)
                    fe[j] += int(np.count_nonzero(errs))
                if stop.done(frames, min(fe)):
                    return [np.concatenate(c_) for c_ in collected]
    finally:
        if pool:
            pool.shutdown()


def _record(errs: np.ndarray, job: _Job) -> BERRecord:
    frames = errs.size
    bit_errors = int(errs.sum())
    info_bits = frames * job.code.k
    frame_errors = int(np.count_nonzero(errs))
    return BERRecord(float(job.snr_db), frames, bit_errors, info_bits, frame_errors,
                     bit_errors / info_bits, frame_errors / frames, job.n_it, job.kind,
                     job.code.code_id(), job.seed)


def simulate_point(code: CodeConfig, channel: ChannelConfig | str, snr_db: float | None = None,
                   n_it: int = 5, stop: StopRule = StopRule(), seed: int = 0, workers: int = 1,
                   noiseless: bool = False, alpha: float | None = None,
                   chunk_frames: int = CHUNK_FRAMES) -> BERRecord:
    """BER/BLER of ``code`` under BP decoding at one SNR point.

    ``channel`` is a kind string or a :class:`ChannelConfig` (whose SNR is used
    unless ``snr_db`` is given). ``noiseless`` and ``alpha`` are test hooks.
    """
    kind = channel.kind if isinstance(channel, ChannelConfig) else ChannelConfig(channel).kind
    if snr_db is None:
        if not isinstance(channel, ChannelConfig):
            raise ValueError("snr_db is required when channel is given by name")
        snr_db = channel.ebn0_db
    job = _Job(code, kind, float(snr_db), n_it, int(seed), noiseless, alpha)
    (errs,) = _run_chunks([job], stop, workers, chunk_frames)
    return _record(errs, job)


def write_records(path, records: list[BERRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])


def sweep(code: CodeConfig, kind: str, snrs, n_it: int = 5, stop: StopRule = StopRule(),
          seed: int = 0, csv_path=None, workers: int = 1, **hooks) -> list[BERRecord]:
    snrs = list(snrs)
    if not snrs:
        raise ValueError("empty SNR list")
    cid = code.code_id()
    records = [simulate_point(code, kind, snr, n_it, stop, point_seed(seed, snr, cid),
                              workers, **hooks) for snr in snrs]
    if csv_path is not None:
        write_records(csv_path, records)
    return records


@dataclass
class ComparisonPoint:
    snr_db: float
    frames: int
    ber_a: float
    ber_b: float
    ratio: float
    diff: float
    ci_low: float
    ci_high: float
    verdict: str
    seed: int


COMPARE_COLUMNS = tuple(f.name for f in fields(ComparisonPoint))


def paired_difference(errs_a: np.ndarray, errs_b: np.ndarray, k: int):
    """Mean and 95% CI of the per-frame BER difference ``a - b``."""
    d = (errs_a.astype(float) - errs_b.astype(float)) / k
    mean = float(d.mean())
    half = Z95 * float(d.std(ddof=1)) / math.sqrt(d.size) if d.size > 1 else math.inf
    return mean, mean - half, mean + half


def compare(code_a: CodeConfig, code_b: CodeConfig, kind: str, snrs, n_it: int = 5,
            stop: StopRule = StopRule(), seed: int = 0, n_it_b: int | None = None,
            workers: int = 1, csv_path=None, **hooks) -> list[ComparisonPoint]:
    """Paired-seed BER comparison of two systems over the same frames and noise.

    Both codes see identical payload bits and noise at every frame; the
    system-B iteration count defaults to ``n_it``.
    """
    if code_a.N != code_b.N or code_a.k != code_b.k:
        raise ValueError("compared codes must share N and k")
    snrs = list(snrs)
    if not snrs:
        raise ValueError("empty SNR list")
    kind = ChannelConfig(kind).kind
    out = []
    for snr in snrs:
        s = point_seed(seed, snr, "paired")
        ja = _Job(code_a, kind, float(snr), n_it, s, **hooks)
        jb = _Job(code_b, kind, float(snr), n_it if n_it_b is None else n_it_b, s, **hooks)
        ea, eb = _run_chunks([ja, jb], stop, workers, CHUNK_FRAMES)
        k = code_a.k
        ber_a, ber_b = ea.sum() / (ea.size * k), eb.sum() / (eb.size * k)
        mean, lo, hi = paired_difference(ea, eb, k)
        if ber_a == ber_b:
            ratio = 1.0
        else:
            ratio = ber_a / ber_b if ber_b > 0 else math.inf
        verdict = "A better" if hi < 0 else "B better" if lo > 0 else "inconclusive"
        out.append(ComparisonPoint(float(snr), int(ea.size), float(ber_a), float(ber_b), ratio,
                                   mean, lo, hi, verdict, s))
    if csv_path is not None:
        with Path(csv_path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COMPARE_COLUMNS)
            for p in out:
                w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(p).values()])
    return out


def format_report(points: list[ComparisonPoint], label_a: str = "A", label_b: str = "B") -> str:
    lines = [f"paired comparison: A={label_a}  B={label_b}"]
    for p in points:
        lines.append(f"  {p.snr_db:6.2f} dB  frames={p.frames:7d}  BER_A={p.ber_a:.3e}  "
                     f"BER_B={p.ber_b:.3e}  ratio={p.ratio:.3f}  "
                     f"diff 95% CI=[{p.ci_low:+.2e}, {p.ci_high:+.2e}]  -> {p.verdict}")
    return "\n".join(lines)
