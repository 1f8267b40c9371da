"""Experiment configuration: INI-style ``[scenario]``, ``[targets]``, ``[run]`` sections."""
import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Scenario, TargetSet, dbm_to_watts

COMMANDS = ("eval", "fig1", "fig2", "fig3", "optimize")
SWEEP_VARIABLE = {"fig1": "n_frames", "fig2": "n_targets", "fig3": "snr_db"}

PROFILES = {
    "desk": {
        "base": {"n_tx": 8, "n_rx": 4, "n_targets": 3, "n_frames": 16},
        "fig1": {"grid": [4, 8, 16, 32, 64]},
        "fig2": {"n_tx": 16, "n_rx": 8, "n_frames": 32, "grid": [1, 2, 3, 4, 5, 6, 7]},
        "fig3": {"n_tx": 16, "n_rx": 8, "n_targets": 15, "n_frames": 32,
                 "grid": [0, 5, 10, 15, 20]},
    },
    "paper": {
        "base": {"n_tx": 32, "n_rx": 16, "n_targets": 7, "n_frames": 32},
        "fig1": {"grid": [8, 16, 32, 64, 128]},
        "fig2": {"n_frames": 32, "grid": [1, 3, 5, 7, 9, 11, 13, 15]},
        "fig3": {"n_targets": 15, "n_frames": 32, "grid": [0, 5, 10, 15, 20]},
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


@dataclass
class ScenarioBlock:
    n_tx: int = 8
    n_rx: int = 4
    n_targets: int = 3
    n_frames: int = 16
    power_dbm: float = 30.0
    noise_dbm: float = -90.0
    snr_db: float = 20.0
    carrier_hz: float = 28e9


@dataclass
class TargetsBlock:
    mode: str = "auto"
    angle_min_deg: float = 30.0
    angle_max_deg: float = 60.0
    seed: int = 0
    aod_deg: list = field(default_factory=list)
    aoa_deg: list = field(default_factory=list)
    reflect_var: list = field(default_factory=list)


@dataclass
class RunBlock:
    command: str = ""
    sweep: str = ""
    grid: list = field(default_factory=list)
    n_trials: int = 5000
    seed: int = 0
    output: str = ""
    log_base: str = "nats"
    precoder: str = "eigenbeam"
    precoder_scale: float = 1.0
    objective: str = "asymptotic-smi"
    init: str = "eigenbeam"
    max_iters: int = 50
    grad_norm_tol: float = 1e-5


@dataclass
class ExperimentConfig:
    scenario: ScenarioBlock = field(default_factory=ScenarioBlock)
    targets: TargetsBlock = field(default_factory=TargetsBlock)
    run: RunBlock = field(default_factory=RunBlock)

    def build_scenario(self, **overrides):
        s = dataclasses.replace(self.scenario, **overrides)
        try:
            return Scenario(
                n_tx=s.n_tx, n_rx=s.n_rx, n_targets=s.n_targets, n_frames=s.n_frames,
                noise_power=dbm_to_watts(s.noise_dbm), power_budget=dbm_to_watts(s.power_dbm),
                carrier_hz=s.carrier_hz, snr_db=s.snr_db,
            )
        except ValueError as exc:
            raise ConfigError(f"[scenario]: {exc}") from exc

    def build_targets(self, scenario, n_targets=None):
        """Targets for ``scenario``; auto mode draws ``n_targets`` nested angles.

        The first K targets are the same for every K so K-sweeps add targets
        rather than redrawing them.
        """
        t = self.targets
        k = scenario.n_targets if n_targets is None else n_targets
        if t.mode == "auto":
            return TargetSet.random(k, scenario.reflect_var, seed=t.seed,
                                    angle_range_deg=(t.angle_min_deg, t.angle_max_deg))
        if len(t.aod_deg) < k or len(t.aoa_deg) < k:
            raise ConfigError(
                f"[targets] aod_deg/aoa_deg: need at least {k} explicit targets"
            )
        var = t.reflect_var[:k] if t.reflect_var else [scenario.reflect_var] * k
        if len(var) < k:
            raise ConfigError(f"[targets] reflect_var: need at least {k} values")
        return TargetSet(np.deg2rad(t.aod_deg[:k]), np.deg2rad(t.aoa_deg[:k]), var)

    def to_ini(self):
        parser = configparser.ConfigParser()
        for name in ("scenario", "targets", "run"):
            block = getattr(self, name)
            parser[name] = {f.name: _dump(getattr(block, f.name))
                            for f in dataclasses.fields(block)}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in parser[section].items())
            lines.append("")
        return "\n".join(lines)

    def save(self, path):
        Path(path).write_text(self.to_ini())


def _dump(value):
    if isinstance(value, list):
        return ", ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _locate(text, section, key):
    """1-based line number of ``key`` inside ``[section]``, or None."""
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"^\[(.+)\]$", stripped)
        if m:
            current = m.group(1).strip()
            continue
        if current == section and re.match(rf"^{re.escape(key)}\s*[=:]", stripped):
            return lineno
    return None


def _convert(raw, typ, where):
    raw = raw.strip()
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is list:
            return [_number(v) for v in raw.replace(";", ",").split(",") if v.strip()]
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None


def _number(token):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        return float(token)


_FIELD_TYPES = {
    "scenario": ScenarioBlock,
    "targets": TargetsBlock,
    "run": RunBlock,
}


def _field_type(block_cls, name):
    f = {f.name: f for f in dataclasses.fields(block_cls)}[name]
    if f.type in ("list", list):
        return list
    return {"int": int, "float": float, "str": str}.get(f.type, f.type)


def parse_config(text, source="<config>", base=None):
    """Parse INI text over ``base`` (defaults when omitted)."""
    cfg = base if base is not None else ExperimentConfig()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for section in parser.sections():
        if section not in _FIELD_TYPES:
            raise ConfigError(f"{source}: unknown section [{section}]")
        block_cls = _FIELD_TYPES[section]
        block = getattr(cfg, section)
        names = {f.name for f in dataclasses.fields(block_cls)}
        for key, raw in parser[section].items():
            line = _locate(text, section, key)
            where = f"{source}:{line} [{section}] {key}"
            if key not in names:
                raise ConfigError(f"{where}: unknown key")
            setattr(block, key, _convert(raw, _field_type(block_cls, key), where))
    return cfg


def apply_profile(cfg, profile, command):
    prof = PROFILES[profile]
    for key, value in {**prof["base"], **prof.get(command, {})}.items():
        if key == "grid":
            cfg.run.grid = list(value)
        else:
            setattr(cfg.scenario, key, value)
    return cfg


def load_config(path=None, profile="desk", command="eval"):
    """Profile defaults, then the file (if any) on top, then validation."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    cfg = apply_profile(ExperimentConfig(), profile, command)
    cfg.run.command = command
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = parse_config(path.read_text(), str(path), cfg)
    validate(cfg, command)
    return cfg


def validate(cfg, command):
    run, tg = cfg.run, cfg.targets
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if run.command and run.command != command:
        raise ConfigError(f"[run] command: config says {run.command!r}, invoked {command!r}")
    run.command = command
    if run.log_base not in ("nats", "bits"):
        raise ConfigError("[run] log_base: must be 'nats' or 'bits'")
    if run.precoder not in ("eigenbeam", "scaled-random", "optimized"):
        raise ConfigError("[run] precoder: must be eigenbeam, scaled-random or optimized")
    if run.precoder_scale < 0:
        raise ConfigError("[run] precoder_scale: must be >= 0")
    if run.n_trials < 2:
        raise ConfigError("[run] n_trials: must be >= 2")
    if tg.mode not in ("auto", "explicit"):
        raise ConfigError("[targets] mode: must be 'auto' or 'explicit'")
    if tg.angle_min_deg > tg.angle_max_deg:
        raise ConfigError("[targets] angle_min_deg: exceeds angle_max_deg")
    if command in SWEEP_VARIABLE:
        expected = SWEEP_VARIABLE[command]
        if run.sweep and run.sweep != expected:
            raise ConfigError(f"[run] sweep: {command} sweeps {expected!r}, got {run.sweep!r}")
        run.sweep = expected
        if not run.grid:
            raise ConfigError("[run] grid: must be non-empty")
        if list(run.grid) != sorted(run.grid):
            raise ConfigError("[run] grid: must be sorted ascending")
        if command == "fig1" and min(run.grid) < cfg.scenario.n_targets:
            raise ConfigError("[run] grid: every n_frames must be >= n_targets")
        if command == "fig2" and max(run.grid) > cfg.scenario.n_frames:
            raise ConfigError("[run] grid: every n_targets must be <= n_frames")
    return cfg
