"""Round logic of the single-state protocol with selective modulation.

Each round Bob sends ``|+>``; Alice either returns it (CTRL) or rotates it to
``|0>``/``|1>`` with a +/-pi/2 phase on the late pulse (SIFT); Bob measures in
Z (no phase) or X (+/-pi/2 on the early pulse).  Rounds are simulated in
vectorized blocks; every round draws exactly ``UNIFORMS_PER_ROUND`` doubles
from a counter-based stream, so round ``i`` depends only on ``(seed, i)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numpy.random import Generator, Philox

from .optics import (
    ChannelParams,
    ClickEvent,
    DetectorParams,
    SourceParams,
    check_dead_time,
    photon_numbers,
    routing_probs,
)
from .quantum import Basis

UNIFORMS_PER_ROUND = 8
_BLOCKS_PER_ROUND = UNIFORMS_PER_ROUND // 4  # Philox4x64 yields 4 words per counter step


class AliceOp(IntEnum):
    CTRL = 0
    SIFT0 = 1
    SIFT1 = 2

    @property
    def sift_bit(self) -> int | None:
        return {AliceOp.SIFT0: 0, AliceOp.SIFT1: 1}.get(self)


class RoundClass(IntEnum):
    SIFT_Z = 0
    CTRL_X = 1
    SIFT_X = 2
    CTRL_Z = 3
    INCONCLUSIVE = 4


@dataclass(frozen=True)
class RoundConfig:
    p_ctrl: float = 0.5
    p_sift0_given_sift: float = 0.5
    p_basis_z: float = 0.5
    p_xplus_given_x: float = 0.5

    def __post_init__(self):
        for name in ("p_ctrl", "p_sift0_given_sift", "p_basis_z", "p_xplus_given_x"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @classmethod
    def forced(cls, op: AliceOp, basis: Basis) -> "RoundConfig":
        """Configuration that always draws ``(op, basis)``."""
        op, basis = AliceOp(op), Basis(basis)
        return cls(
            p_ctrl=1.0 if op == AliceOp.CTRL else 0.0,
            p_sift0_given_sift=1.0 if op == AliceOp.SIFT0 else 0.0,
            p_basis_z=1.0 if basis == Basis.Z else 0.0,
            p_xplus_given_x=1.0 if basis == Basis.XPLUS else 0.0,
        )

    def op_probabilities(self) -> np.ndarray:
        s = 1.0 - self.p_ctrl
        return np.array([self.p_ctrl, s * self.p_sift0_given_sift, s * (1 - self.p_sift0_given_sift)])

    def basis_probabilities(self) -> np.ndarray:
        x = 1.0 - self.p_basis_z
        return np.array([self.p_basis_z, x * self.p_xplus_given_x, x * (1 - self.p_xplus_given_x)])


@dataclass(frozen=True)
class Physics:
    source: SourceParams = SourceParams()
    detector: DetectorParams = DetectorParams()
    channel: ChannelParams = ChannelParams()

    def __post_init__(self):
        check_dead_time(self.source, self.detector)

    @classmethod
    def ideal(cls, photon_statistics: str = "single", mean_photons: float = 1.0) -> "Physics":
        """Unit visibility, lossless, dark-free, unit-efficiency bench."""
        return cls(
            SourceParams(mean_photons=mean_photons, photon_statistics=photon_statistics),
            DetectorParams(efficiency=1.0, dark_prob_per_gate=0.0),
            ChannelParams(circulator_loss_db=0.0, channel_loss_db=0.0, visibility=1.0),
        )


def phase_for_alice(op: AliceOp) -> float:
    return {AliceOp.CTRL: 0.0, AliceOp.SIFT0: math.pi / 2, AliceOp.SIFT1: -math.pi / 2}[AliceOp(op)]


def phase_for_bob(basis: Basis) -> float:
    return {Basis.Z: 0.0, Basis.XPLUS: math.pi / 2, Basis.XMINUS: -math.pi / 2}[Basis(basis)]


def net_phase(op: AliceOp, basis: Basis) -> float:
    """Pulse-pair phase referenced to the SPD1-bright setting.

    The +pi/2 preparation and Alice's modulation sit on the late pulse, Bob's
    analysis phase on the early one; SPD1 (circulator port 3) is bright when
    the physical pair phase is pi, hence the -pi/2 offset.
    """
    return phase_for_alice(op) - phase_for_bob(basis) - math.pi / 2


# Bob's outcome label carried by an SPD1 click: Z -> |0>, X+ -> |->, X- -> |+>.
SPD1_OUTCOME = {Basis.Z: 0, Basis.XPLUS: 1, Basis.XMINUS: 0}
_SPD1_OUTCOME = np.array([SPD1_OUTCOME[b] for b in Basis], dtype=np.int8)


def expected_bit(op: AliceOp, basis: Basis) -> int | None:
    """Deterministic outcome for matched pairs (SIFT/Z -> key bit, CTRL/X -> ``|+>``)."""
    op, basis = AliceOp(op), Basis(basis)
    if op == AliceOp.CTRL and basis != Basis.Z:
        return 0
    if op != AliceOp.CTRL and basis == Basis.Z:
        return op.sift_bit
    return None


def expected_detector(op: AliceOp, basis: Basis) -> ClickEvent | None:
    bit = expected_bit(op, basis)
    if bit is None:
        return None
    return ClickEvent.SPD1 if bit == SPD1_OUTCOME[Basis(basis)] else ClickEvent.SPD2


def classify(op: AliceOp, basis: Basis) -> RoundClass:
    sift = AliceOp(op) != AliceOp.CTRL
    z = Basis(basis) == Basis.Z
    if sift:
        return RoundClass.SIFT_Z if z else RoundClass.SIFT_X
    return RoundClass.CTRL_Z if z else RoundClass.CTRL_X


def decode(basis: Basis, click: ClickEvent) -> int | None:
    click = ClickEvent(click)
    if not click.conclusive:
        return None
    o = SPD1_OUTCOME[Basis(basis)]
    return o if click == ClickEvent.SPD1 else 1 - o


_CLASS_TABLE = np.array([[classify(o, b) for b in Basis] for o in AliceOp], dtype=np.int8)
_EXPECTED_TABLE = np.array(
    [[-1 if expected_bit(o, b) is None else expected_bit(o, b) for b in Basis] for o in AliceOp],
    dtype=np.int8,
)


def ideal_spd1_table(attack=None) -> np.ndarray:
    """``P(SPD1 | op, basis)`` for a lossless, unit-visibility bench, shape (3, 3).

    Without an attack this follows from the interference phase; with one it
    is Bob's exact outcome distribution from the evolved joint state.
    """
    if attack is None:
        return np.array(
            [[0.5 * (1.0 + math.cos(net_phase(o, b))) for b in Basis] for o in AliceOp]
        )
    p0 = attack.outcome_table()
    table = np.empty((3, 3))
    for b in Basis:
        table[:, b] = p0[:, b] if SPD1_OUTCOME[b] == 0 else 1.0 - p0[:, b]
    return table


@dataclass(frozen=True)
class TrialRecord:
    round_index: int
    alice_op: AliceOp
    bob_basis: Basis
    photons: int
    click: ClickEvent
    decoded_bit: int | None
    round_class: RoundClass

    @property
    def error(self) -> bool | None:
        """Whether a conclusive matched round disagrees with its expected outcome."""
        want = expected_bit(self.alice_op, self.bob_basis)
        if want is None or self.decoded_bit is None:
            return None
        return self.decoded_bit != want


@dataclass
class RoundTable:
    """Column store of consecutive rounds starting at ``start``."""

    start: int
    alice_op: np.ndarray
    bob_basis: np.ndarray
    photons: np.ndarray
    click: np.ndarray

    def __len__(self) -> int:
        return int(self.click.size)

    @property
    def conclusive(self) -> np.ndarray:
        return (self.click == ClickEvent.SPD1) | (self.click == ClickEvent.SPD2)

    @property
    def pair_class(self) -> np.ndarray:
        """Class from ``(op, basis)`` alone, regardless of the click."""
        return _CLASS_TABLE[self.alice_op, self.bob_basis]

    @property
    def round_class(self) -> np.ndarray:
        return np.where(self.conclusive, self.pair_class, np.int8(RoundClass.INCONCLUSIVE))

    @property
    def decoded_bit(self) -> np.ndarray:
        """Bob's outcome label, -1 where the click is not conclusive."""
        o = _SPD1_OUTCOME[self.bob_basis]
        bit = np.where(self.click == ClickEvent.SPD1, o, 1 - o).astype(np.int8)
        return np.where(self.conclusive, bit, np.int8(-1))

    @property
    def expected_bit(self) -> np.ndarray:
        return _EXPECTED_TABLE[self.alice_op, self.bob_basis]

    @property
    def error(self) -> np.ndarray:
        exp = self.expected_bit
        return self.conclusive & (exp >= 0) & (self.decoded_bit != exp)

    def record(self, i: int) -> TrialRecord:
        """Round with absolute index ``i``."""
        k = i - self.start
        if not 0 <= k < len(self):
            raise IndexError(f"round {i} outside [{self.start}, {self.start + len(self)})")
        op, basis, click = AliceOp(self.alice_op[k]), Basis(self.bob_basis[k]), ClickEvent(self.click[k])
        return TrialRecord(
            round_index=i,
            alice_op=op,
            bob_basis=basis,
            photons=int(self.photons[k]),
            click=click,
            decoded_bit=decode(basis, click),
            round_class=RoundClass(self.round_class[k]),
        )

    def __iter__(self):
        for i in range(self.start, self.start + len(self)):
            yield self.record(i)

    @classmethod
    def concat(cls, tables) -> "RoundTable":
        tables = sorted(tables, key=lambda t: t.start)
        for a, b in zip(tables, tables[1:]):
            if a.start + len(a) != b.start:
                raise ValueError("round tables are not contiguous")
        return cls(
            tables[0].start,
            *(np.concatenate([getattr(t, f) for t in tables]) for f in ("alice_op", "bob_basis", "photons", "click")),
        )


class RoundStream:
    """Counter-based uniforms: round ``i`` owns Philox blocks ``2i+1, 2i+2`` under key ``seed``."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)

    def uniforms(self, start: int, stop: int) -> np.ndarray:
        gen = Generator(Philox(key=self.seed, counter=start * _BLOCKS_PER_ROUND))
        return gen.random((stop - start, UNIFORMS_PER_ROUND))


def _sample_clicks(p1, p2, photons, u_click, u_dark1, u_dark2, src, det):
    """Click pattern from the exact distribution given the photon number."""
    a, b = det.efficiency * p1, det.efficiency * p2
    n = photons.astype(float)
    q12 = np.power(np.clip(1.0 - a - b, 0.0, 1.0), n)  # neither detector fires
    q1 = np.power(np.clip(1.0 - a, 0.0, 1.0), n)  # SPD1 silent
    q2 = np.power(np.clip(1.0 - b, 0.0, 1.0), n)  # SPD2 silent
    only1 = (u_click >= q12) & (u_click < q2)
    only2 = (u_click >= q2) & (u_click < q2 + q1 - q12)
    both = u_click >= q2 + q1 - q12
    s1, s2 = only1 | both, only2 | both
    c1 = s1 | (u_dark1 < det.dark_prob_per_gate)
    c2 = s2 | (u_dark2 < det.dark_prob_per_gate)
    return (c1.astype(np.int8) + 2 * c2.astype(np.int8)).astype(np.int8)


def simulate_block(
    start: int,
    stop: int,
    cfg: RoundConfig,
    phys: Physics,
    stream: RoundStream,
    attack=None,
    spd1_table: np.ndarray | None = None,
) -> RoundTable:
    """Simulate rounds ``start .. stop-1``."""
    if spd1_table is None:
        spd1_table = ideal_spd1_table(attack)
    u = stream.uniforms(start, stop)
    op = np.where(
        u[:, 0] < cfg.p_ctrl,
        AliceOp.CTRL,
        np.where(u[:, 1] < cfg.p_sift0_given_sift, AliceOp.SIFT0, AliceOp.SIFT1),
    ).astype(np.int8)
    basis = np.where(
        u[:, 2] < cfg.p_basis_z,
        Basis.Z,
        np.where(u[:, 3] < cfg.p_xplus_given_x, Basis.XPLUS, Basis.XMINUS),
    ).astype(np.int8)
    photons = photon_numbers(phys.source, u[:, 4])
    p1, p2, _ = routing_probs(spd1_table[op, basis], phys.channel)
    click = _sample_clicks(p1, p2, photons, u[:, 5], u[:, 6], u[:, 7], phys.source, phys.detector)
    return RoundTable(start, op, basis, photons.astype(np.int32), click)


def run_round(index: int, cfg: RoundConfig, phys: Physics, stream: RoundStream, attack=None) -> TrialRecord:
    return simulate_block(index, index + 1, cfg, phys, stream, attack).record(index)

