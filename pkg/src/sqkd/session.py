"""Session-level aggregation, sifting, abort decision and visibility calibration."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .metrics import IntervalStat, interval_series, matched_contrast, rate, tally
from .optics import ClickEvent, click_distribution, routing_probs
from .protocol import (
    AliceOp,
    Physics,
    RoundClass,
    RoundConfig,
    RoundStream,
    RoundTable,
    expected_detector,
    ideal_spd1_table,
    simulate_block,
)
from .quantum import Basis

CHUNK_ROUNDS = 1 << 19
DEFAULT_INTERVAL_S = 60.0
MATCHED = (RoundClass.SIFT_Z, RoundClass.CTRL_X)


@dataclass
class SessionResult:
    n_rounds: int
    clock_hz: float
    counts: dict
    qber_sift_z: float
    qber_ctrl_x: float
    contrast: dict
    raw_key_bits: np.ndarray
    alice_key_bits: np.ndarray
    raw_key_rate_bps: float
    response_rate: float
    conclusive: int
    double_clicks: int
    sift_z_conclusive: int
    sift_z_errors: int
    ctrl_x_conclusive: int
    ctrl_x_errors: int
    time_series: list[IntervalStat]
    records: RoundTable | None = None

    @property
    def raw_key(self) -> str:
        return "".join("01"[b] for b in self.raw_key_bits)

    def summary(self) -> dict:
        """JSON-friendly view without the per-round columns."""
        return {
            "n_rounds": self.n_rounds,
            "clock_hz": self.clock_hz,
            "qber_sift_z": self.qber_sift_z,
            "qber_ctrl_x": self.qber_ctrl_x,
            "contrast": dict(self.contrast),
            "raw_key_length": int(self.raw_key_bits.size),
            "raw_key_rate_bps": self.raw_key_rate_bps,
            "response_rate": self.response_rate,
            "conclusive": self.conclusive,
            "double_clicks": self.double_clicks,
            "sift_z_conclusive": self.sift_z_conclusive,
            "sift_z_errors": self.sift_z_errors,
            "ctrl_x_conclusive": self.ctrl_x_conclusive,
            "ctrl_x_errors": self.ctrl_x_errors,
            "counts": self.counts,
        }


def _detector_contrast(n1: int, n2: int) -> float:
    total = n1 + n2
    return abs(n1 - n2) / total if total else math.nan


def summarize(table: RoundTable, clock_hz: float, interval_rounds: int) -> SessionResult:
    n = len(table)
    cls = table.pair_class
    pair_counts = np.bincount(cls.astype(np.int64) * 4 + table.click, minlength=16).reshape(4, 4)
    counts = {
        RoundClass(c).name: {ClickEvent(k).name: int(pair_counts[c, k]) for k in ClickEvent}
        for c in range(4)
    }
    t = tally(table, interval_rounds)
    sz, se = t.total("sift_z_conclusive"), t.total("sift_z_errors")
    cx, ce = t.total("ctrl_x_conclusive"), t.total("ctrl_x_errors")
    contrast = {
        "SIFT_Z": matched_contrast(se, sz),
        "CTRL_X": matched_contrast(ce, cx),
        "SIFT_X": _detector_contrast(pair_counts[RoundClass.SIFT_X, 1], pair_counts[RoundClass.SIFT_X, 2]),
        "CTRL_Z": _detector_contrast(pair_counts[RoundClass.CTRL_Z, 1], pair_counts[RoundClass.CTRL_Z, 2]),
        "OVERALL_MATCHED": matched_contrast(se + ce, sz + cx),
    }
    key_mask = table.conclusive & (cls == RoundClass.SIFT_Z)
    raw = table.decoded_bit[key_mask].astype(np.uint8)
    alice = (table.alice_op[key_mask] == AliceOp.SIFT1).astype(np.uint8)
    return SessionResult(
        n_rounds=n,
        clock_hz=clock_hz,
        counts=counts,
        qber_sift_z=rate(se, sz),
        qber_ctrl_x=rate(ce, cx),
        contrast=contrast,
        raw_key_bits=raw,
        alice_key_bits=alice,
        raw_key_rate_bps=clock_hz * raw.size / n,
        response_rate=t.total("clicks") / n,
        conclusive=t.total("conclusive"),
        double_clicks=int(np.count_nonzero(table.click == ClickEvent.DOUBLE)),
        sift_z_conclusive=sz,
        sift_z_errors=se,
        ctrl_x_conclusive=cx,
        ctrl_x_errors=ce,
        time_series=interval_series(table, interval_rounds),
        records=table,
    )


def shard_bounds(n_rounds: int, shards: int, chunk_rounds: int = CHUNK_ROUNDS) -> list[tuple[int, int]]:
    """Contiguous shards, each cut into chunks of at most ``chunk_rounds``."""
    edges = np.linspace(0, n_rounds, shards + 1).round().astype(int)
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        for s in range(a, b, chunk_rounds):
            out.append((int(s), int(min(s + chunk_rounds, b))))
    return out


def run_session(
    n_rounds: int,
    cfg: RoundConfig,
    phys: Physics,
    seed: int,
    attack=None,
    workers: int = 1,
    interval_rounds: int | None = None,
    chunk_rounds: int = CHUNK_ROUNDS,
) -> SessionResult:
    """Simulate ``n_rounds`` and aggregate them.

    With ``workers > 1`` the rounds are split into that many contiguous shards
    run on a thread pool; the result is identical to the serial run.
    """
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if interval_rounds is None:
        interval_rounds = max(1, round(DEFAULT_INTERVAL_S * phys.source.clock_hz))
    stream = RoundStream(seed)
    spd1 = ideal_spd1_table(attack)
    bounds = shard_bounds(n_rounds, workers, chunk_rounds)

    def block(ab):
        return simulate_block(ab[0], ab[1], cfg, phys, stream, spd1_table=spd1)

    if workers == 1:
        tables = [block(ab) for ab in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tables = list(pool.map(block, bounds))
    return summarize(RoundTable.concat(tables), phys.source.clock_hz, interval_rounds)


class Decision(Enum):
    CONTINUE = "continue"
    ABORT = "abort"


def sample_check_bits(result: SessionResult, fraction: float = 0.1, seed: int = 0):
    """Reveal a random ``fraction`` of the raw key.

    Returns ``(check_qber, n_check, info_bob, info_alice)``; the check bits
    are removed from the key that remains.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("check fraction must be in [0, 1]")
    n = result.raw_key_bits.size
    k = int(round(fraction * n))
    rng = np.random.default_rng([seed, 0x5EED])
    pick = np.zeros(n, dtype=bool)
    pick[rng.choice(n, size=k, replace=False)] = True
    errors = int(np.count_nonzero(result.raw_key_bits[pick] != result.alice_key_bits[pick]))
    return rate(errors, k), k, result.raw_key_bits[~pick], result.alice_key_bits[~pick]


def abort_check(
    result: SessionResult,
    threshold_ctrl_x: float,
    threshold_sift_z: float,
    check_fraction: float = 0.1,
    seed: int = 0,
) -> Decision:
    """Abort iff an observed error rate strictly exceeds its threshold."""
    for t in (threshold_ctrl_x, threshold_sift_z):
        if not 0.0 <= t <= 1.0:
            raise ValueError("thresholds must be in [0, 1]")
    check_qber, _, _, _ = sample_check_bits(result, check_fraction, seed)
    # NaN (no data) never exceeds a threshold
    if result.qber_ctrl_x > threshold_ctrl_x or check_qber > threshold_sift_z:
        return Decision.ABORT
    return Decision.CONTINUE


def expected_metrics(cfg: RoundConfig, phys: Physics, attack=None) -> dict:
    """Exact expectations of the sampling model (no Monte-Carlo noise)."""
    p1, p2, pl = routing_probs(ideal_spd1_table(attack), phys.channel)
    dist = click_distribution((p1, p2, pl), phys.source, phys.detector)  # (op, basis, click)
    w = np.outer(cfg.op_probabilities(), cfg.basis_probabilities())
    conc = {c: 0.0 for c in MATCHED}
    err = {c: 0.0 for c in MATCHED}
    for op in AliceOp:
        for b in Basis:
            want = expected_detector(op, b)
            if want is None:
                continue
            c = RoundClass.SIFT_Z if b == Basis.Z else RoundClass.CTRL_X
            wrong = ClickEvent.SPD2 if want == ClickEvent.SPD1 else ClickEvent.SPD1
            conc[c] += w[op, b] * (dist[op, b, 1] + dist[op, b, 2])
            err[c] += w[op, b] * dist[op, b, wrong]
    sz, cx = conc[RoundClass.SIFT_Z], conc[RoundClass.CTRL_X]
    ez, ex = err[RoundClass.SIFT_Z], err[RoundClass.CTRL_X]

    def ratio(a, b):
        return a / b if b > 0 else math.nan

    return {
        "qber_sift_z": ratio(ez, sz),
        "qber_ctrl_x": ratio(ex, cx),
        "contrast_sift_z": ratio(sz - 2 * ez, sz),
        "contrast_ctrl_x": ratio(cx - 2 * ex, cx),
        "contrast_overall": ratio(sz + cx - 2 * (ez + ex), sz + cx),
        "response_rate": float(np.sum(w * (1.0 - dist[..., 0]))),
        "sift_z_conclusive_fraction": sz,
        "ctrl_x_conclusive_fraction": cx,
        "raw_key_rate_bps": phys.source.clock_hz * sz,
    }


class UnreachableTarget(ValueError):
    def __init__(self, target: float, lo: float, hi: float):
        super().__init__(
            f"target contrast {target} outside achievable range [{lo:.6f}, {hi:.6f}]"
        )
        self.target, self.lo, self.hi = target, lo, hi


def _with_visibility(phys: Physics, v: float) -> Physics:
    return replace(phys, channel=replace(phys.channel, visibility=v))


def calibrate_visibility(
    target: float,
    cfg: RoundConfig,
    phys: Physics,
    metric: str = "contrast_overall",
    tol: float = 1e-12,
) -> float:
    """Bisect the interference visibility until the matched contrast hits ``target``."""
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target contrast must be in (0, 1], got {target}")

    def contrast(v):
        return expected_metrics(cfg, _with_visibility(phys, v))[metric]

    lo_c, hi_c = contrast(0.0), contrast(1.0)
    if abs(hi_c - target) <= tol:
        return 1.0
    if not lo_c <= target <= hi_c:
        raise UnreachableTarget(target, lo_c, hi_c)
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        c = contrast(mid)
        if abs(c - target) <= tol:
            return mid
        if c < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
