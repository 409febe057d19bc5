"""Monte-Carlo model of the optical bench.

Weak coherent pulses with Poisson photon number, phase modulators with a
voltage calibration, single-visibility interference at the AMZI beam
splitter, circulator loss on the SPD1 path and gated threshold detectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import stats

PHOTON_STATISTICS = ("poisson", "single")

# Visibility that reproduces a 97.45 % matched-basis contrast with the default
# source/detector/channel parameters.  Re-derived by tests via calibrate_visibility.
BENCH_VISIBILITY = 0.9745572048213944


class ClickEvent(IntEnum):
    NONE = 0
    SPD1 = 1
    SPD2 = 2
    DOUBLE = 3

    @property
    def conclusive(self) -> bool:
        return self in (ClickEvent.SPD1, ClickEvent.SPD2)


@dataclass(frozen=True)
class SourceParams:
    clock_hz: float = 1e8
    mean_photons: float = 0.1
    pulse_width_s: float = 50e-12
    amzi_delay_s: float = 2.9e-9
    photon_statistics: str = "poisson"

    def __post_init__(self):
        if not self.clock_hz > 0:
            raise ValueError(f"clock_hz must be > 0, got {self.clock_hz}")
        # mu = 0 is allowed for dark-count-only studies
        if not self.mean_photons >= 0:
            raise ValueError(f"mean_photons must be >= 0, got {self.mean_photons}")
        if not 0 < self.amzi_delay_s < 1.0 / self.clock_hz:
            raise ValueError("amzi_delay_s must lie inside one clock period")
        if self.photon_statistics not in PHOTON_STATISTICS:
            raise ValueError(
                f"photon_statistics must be one of {PHOTON_STATISTICS}, "
                f"got {self.photon_statistics!r}"
            )

    @property
    def period_s(self) -> float:
        return 1.0 / self.clock_hz


@dataclass(frozen=True)
class DetectorParams:
    efficiency: float = 0.205
    dark_prob_per_gate: float = 3e-6
    gate_width_s: float = 1e-9
    dead_time_s: float = 5e-9

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_prob_per_gate <= 1.0:
            raise ValueError(
                f"dark_prob_per_gate must be in [0, 1], got {self.dark_prob_per_gate}"
            )
        if self.gate_width_s <= 0 or self.dead_time_s < 0:
            raise ValueError("gate_width_s must be > 0 and dead_time_s >= 0")


@dataclass(frozen=True)
class ChannelParams:
    circulator_loss_db: float = 0.39
    channel_loss_db: float = 0.0
    visibility: float = BENCH_VISIBILITY

    def __post_init__(self):
        if self.circulator_loss_db < 0 or self.channel_loss_db < 0:
            raise ValueError("losses must be >= 0 dB")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {self.visibility}")


def check_dead_time(src: SourceParams, det: DetectorParams) -> None:
    """Gates are independent only if the dead time ends before the next gate."""
    if det.dead_time_s >= src.period_s:
        raise ValueError(
            f"dead_time_s={det.dead_time_s} reaches the next gate "
            f"(period {src.period_s}); dead-time suppression is not modeled"
        )


@dataclass(frozen=True)
class ModulatorCalibration:
    """Linear voltage-to-phase model plus explicit measured rows.

    ``table`` rows ``(voltage, phase)`` take precedence over the linear model;
    they hold drive levels that do not sit on the nominal line (e.g. the
    negative-polarity SIFT(1) drive).
    """

    v_pi: float
    passes: int = 1
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.v_pi > 0:
            raise ValueError("v_pi must be > 0")
        if self.passes not in (1, 2):
            raise ValueError("passes must be 1 or 2")
        for sign in (1, -1):
            rows = sorted((v, p) for v, p in self.table if v * sign > 0)
            phases = [p for _, p in rows]
            if any(b < a for a, b in zip(phases, phases[1:])):
                raise ValueError("calibration table phases must be monotone in voltage")

    def phase_for(self, voltage: float) -> float:
        for v, p in self.table:
            if v == voltage:
                return p
        return phase_from_voltage(self, voltage)


def phase_from_voltage(cal: ModulatorCalibration, voltage: float) -> float:
    return math.pi * voltage / cal.v_pi * cal.passes


# Bench drive levels; v_pi back-computed from the nominal +pi/2 settings.
PM1_PREPARE = ModulatorCalibration(v_pi=5.90, passes=1, table=((2.95, math.pi / 2),))
PM3_ALICE = ModulatorCalibration(
    v_pi=8.04, passes=2, table=((2.01, math.pi / 2), (-1.78, -math.pi / 2))
)
PM2_MEASURE = ModulatorCalibration(
    v_pi=5.62, passes=1, table=((2.81, math.pi / 2), (-3.23, -math.pi / 2))
)


def db_to_transmission(db: float) -> float:
    return 10.0 ** (-db / 10.0)


def photon_count(src: SourceParams, rng: np.random.Generator) -> int:
    if src.photon_statistics == "single":
        return 1
    return int(rng.poisson(src.mean_photons))


def poisson_cdf(mu: float) -> np.ndarray:
    """Cumulative Poisson table; the omitted tail is far below double resolution."""
    n_max = int(math.ceil(mu + 20.0 * math.sqrt(mu) + 30.0))
    return stats.poisson.cdf(np.arange(n_max + 1), mu)


def photon_numbers(src: SourceParams, u: np.ndarray) -> np.ndarray:
    """Photon numbers by inversion of one uniform per pulse."""
    if src.photon_statistics == "single":
        return np.ones(u.shape, dtype=np.int64)
    cdf = poisson_cdf(src.mean_photons)
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)


def routing_probs(p_ideal_spd1, ch: ChannelParams):
    """Detector-port probabilities from the lossless, unit-visibility SPD1 probability.

    Reduced visibility mixes in a uniform split; the SPD1 path additionally
    pays the circulator loss. Returns ``(p_spd1, p_spd2, p_loss)``.
    """
    p = np.asarray(p_ideal_spd1, dtype=float)
    v = ch.visibility
    t_ch = db_to_transmission(ch.channel_loss_db)
    t1 = t_ch * db_to_transmission(ch.circulator_loss_db)
    p1 = (0.5 * (1.0 - v) + v * p) * t1
    p2 = (0.5 * (1.0 - v) + v * (1.0 - p)) * t_ch
    return p1, p2, 1.0 - p1 - p2


def interference_probs(delta_phi: float, ch: ChannelParams) -> tuple[float, float, float]:
    """Split at the beam splitter for a pulse-pair phase ``delta_phi``.

    ``delta_phi = 0`` is the SPD1-bright setting.
    """
    p1, p2, pl = routing_probs(0.5 * (1.0 + math.cos(delta_phi)), ch)
    return float(p1), float(p2), float(pl)


def _click(c1: bool, c2: bool) -> ClickEvent:
    return ClickEvent(int(c1) + 2 * int(c2))


def detect(probs, n_photons: int, det: DetectorParams, rng: np.random.Generator) -> ClickEvent:
    """Route each photon independently, then add dark counts per detector."""
    p1, p2, _ = probs
    c1 = c2 = False
    for _ in range(n_photons):
        u = rng.random()
        if u < p1:
            c1 |= rng.random() < det.efficiency
        elif u < p1 + p2:
            c2 |= rng.random() < det.efficiency
    c1 |= rng.random() < det.dark_prob_per_gate
    c2 |= rng.random() < det.dark_prob_per_gate
    return _click(c1, c2)


def detect_batch(probs, photons, det: DetectorParams, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`detect`: photon-by-photon routing via multinomial counts."""
    photons = np.asarray(photons, dtype=np.int64)
    p1, p2, pl = (float(x) for x in probs)
    routed = rng.multinomial(photons, [p1, p2, max(pl, 0.0)])
    s1 = rng.binomial(routed[..., 0], det.efficiency) > 0
    s2 = rng.binomial(routed[..., 1], det.efficiency) > 0
    d1 = rng.random(photons.shape) < det.dark_prob_per_gate
    d2 = rng.random(photons.shape) < det.dark_prob_per_gate
    return ((s1 | d1).astype(np.int8) + 2 * (s2 | d2).astype(np.int8)).astype(np.int8)


def click_distribution(probs, src: SourceParams, det: DetectorParams) -> np.ndarray:
    """Exact ``P(NONE), P(SPD1), P(SPD2), P(DOUBLE)`` averaged over photon number."""
    p1, p2, _ = (np.asarray(x, dtype=float) for x in probs)
    a, b = det.efficiency * p1, det.efficiency * p2
    if src.photon_statistics == "single":
        q1, q2, q12 = 1.0 - a, 1.0 - b, 1.0 - a - b
    else:
        mu = src.mean_photons
        q1, q2, q12 = np.exp(-mu * a), np.exp(-mu * b), np.exp(-mu * (a + b))
    dk = 1.0 - det.dark_prob_per_gate
    none = q12 * dk * dk
    no1, no2 = q1 * dk, q2 * dk
    return np.stack([none, no2 - none, no1 - none, 1.0 - no1 - no2 + none], axis=-1)


def visibility_from_counts(n_max: int, n_min: int) -> float:
    total = n_max + n_min
    if total <= 0:
        raise ValueError("contrast undefined for zero total counts")
    return (n_max - n_min) / total
