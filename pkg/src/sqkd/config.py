"""Flat ``key = value`` scenario files.

Every parameter of the bench, the round probabilities, the run and the
attack lives at top level; units are spelled out in the key names.  Lines
starting with ``#`` or ``;`` are comments.  Unknown keys are rejected.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .adversary import AttackKind, AttackModel, OptimizerConfig, attack_from_generator, named_attack
from .optics import BENCH_VISIBILITY, ChannelParams, DetectorParams, SourceParams
from .protocol import Physics, RoundConfig

_SECTION = "scenario"
ATTACK_NONE = "none"
ATTACK_GENERATOR = "generator"


class ConfigError(ValueError):
    """Invalid scenario file or value; maps to exit code 2."""


@dataclass(frozen=True)
class ScenarioConfig:
    # source
    clock_hz: float = 1e8
    mean_photons: float = 0.1
    pulse_width_s: float = 50e-12
    amzi_delay_s: float = 2.9e-9
    photon_statistics: str = "poisson"
    # detectors
    efficiency: float = 0.205
    dark_prob_per_gate: float = 3e-6
    gate_width_s: float = 1e-9
    dead_time_s: float = 5e-9
    # channel
    circulator_loss_db: float = 0.39
    channel_loss_db: float = 0.0
    visibility: float = BENCH_VISIBILITY
    # round choices
    p_ctrl: float = 0.5
    p_sift0_given_sift: float = 0.5
    p_basis_z: float = 0.5
    p_xplus_given_x: float = 0.5
    # run
    n_rounds: int = 1_000_000
    seed: int = 0
    interval_rounds: int = 0  # 0: one minute of simulated clock
    threshold_ctrl_x: float = 0.05
    threshold_sift_z: float = 0.05
    check_fraction: float = 0.1
    target_contrast: float = 0.9745
    # attack
    attack: str = ATTACK_NONE
    ancilla_dim: int = 4
    attack_generator: str = ""
    # robustness search
    epsilons: str = "0,0.01,0.05,0.25,0.5"
    opt_starts: int = 32
    opt_iterations: int = 400
    opt_learning_rate: float = 0.05
    opt_seed: int = 0
    # outputs
    out_dir: str = "."

    def __post_init__(self):
        try:
            self.physics()
            self.round_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.n_rounds < 0:
            raise ConfigError(f"n_rounds must be >= 0, got {self.n_rounds}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.interval_rounds < 0:
            raise ConfigError("interval_rounds must be >= 0")
        for key in ("threshold_ctrl_x", "threshold_sift_z", "check_fraction"):
            if not 0.0 <= getattr(self, key) <= 1.0:
                raise ConfigError(f"{key} must be in [0, 1], got {getattr(self, key)}")
        if self.ancilla_dim < 2:
            raise ConfigError("ancilla_dim must be >= 2")
        valid = {k.value for k in AttackKind} | {ATTACK_NONE, ATTACK_GENERATOR}
        if self.attack not in valid:
            raise ConfigError(f"attack: unknown name {self.attack!r}; valid: {', '.join(sorted(valid))}")
        if self.opt_starts < 1 or self.opt_iterations < 0 or not self.opt_learning_rate > 0:
            raise ConfigError("opt_starts >= 1, opt_iterations >= 0 and opt_learning_rate > 0 required")
        self.epsilon_list()
        self.attack_model()

    def physics(self) -> Physics:
        return Physics(
            SourceParams(
                self.clock_hz, self.mean_photons, self.pulse_width_s, self.amzi_delay_s, self.photon_statistics
            ),
            DetectorParams(self.efficiency, self.dark_prob_per_gate, self.gate_width_s, self.dead_time_s),
            ChannelParams(self.circulator_loss_db, self.channel_loss_db, self.visibility),
        )

    def round_config(self) -> RoundConfig:
        return RoundConfig(self.p_ctrl, self.p_sift0_given_sift, self.p_basis_z, self.p_xplus_given_x)

    def attack_model(self) -> AttackModel | None:
        if self.attack == ATTACK_NONE:
            return None
        if self.attack == ATTACK_GENERATOR:
            try:
                theta = [float(x) for x in self.attack_generator.replace(",", " ").split()]
                return attack_from_generator(theta, self.ancilla_dim)
            except ValueError as exc:
                raise ConfigError(f"attack_generator: {exc}") from None
        try:
            return named_attack(self.attack, self.ancilla_dim)
        except ValueError as exc:
            raise ConfigError(f"attack: {exc}") from None

    def epsilon_list(self) -> list[float]:
        return parse_epsilons(self.epsilons)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            starts=self.opt_starts,
            iterations=self.opt_iterations,
            learning_rate=self.opt_learning_rate,
            seed=self.opt_seed,
        )

    def resolved_interval_rounds(self) -> int:
        if self.interval_rounds:
            return self.interval_rounds
        return max(1, round(60.0 * self.clock_hz))

    def as_dict(self) -> dict:
        return asdict(self)


def parse_epsilons(text: str) -> list[float]:
    try:
        eps = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"epsilons: cannot parse {text!r}") from None
    if not eps:
        raise ConfigError("epsilons: empty list")
    for e in eps:
        if not 0.0 <= e <= 0.5:
            raise ConfigError(f"epsilons: {e} outside [0, 0.5]")
    return eps


def _convert(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, int):
            try:
                return int(raw)
            except ValueError:
                value = float(raw)  # allow 1e7
                if not value.is_integer():
                    raise
                return int(value)
        if isinstance(default, float):
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("non-finite")
            return value
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def parse_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), strict=True)
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if parser.sections() != [_SECTION]:
        raise ConfigError("sections are not supported; use flat key = value lines")
    base = base or ScenarioConfig()
    defaults = base.as_dict()
    values = {}
    for key, raw in parser.items(_SECTION):
        if key not in defaults:
            raise ConfigError(f"unknown key: {key}")
        values[key] = _convert(key, raw, defaults[key])
    return ScenarioConfig(**{**defaults, **values})


def bundled_scenarios() -> list[str]:
    root = resources.files("sqkd") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a scenario file; a bare bundled name such as ``paper.cfg`` also works."""
    p = Path(path)
    if p.is_file():
        return parse_config(p.read_text())
    name = p.name if p.name.endswith(".cfg") else p.name + ".cfg"
    if str(p) in (p.name, p.stem) and name in bundled_scenarios():
        return parse_config((resources.files("sqkd") / "scenarios" / name).read_text())
    raise ConfigError(f"config file not found: {path}")


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ScenarioConfig) -> str:
    """Every key, in declaration order; floats keep full precision."""
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in fields(cfg))


def generator_text(theta) -> str:
    return ",".join(repr(float(x)) for x in np.asarray(theta).reshape(-1))
