"""Synthetic OFDM channel generator producing CSI magnitude datasets.

Each frame is a tapped-delay-line channel seen through a directional
(cardioid) transmit antenna. Path ``p`` leaves at angle ``theta_p`` and gets
the amplitude factor ``0.5 * (1 + cos(theta_p - orientation))``; environmental
movement perturbs every tap with log-normal gain jitter of ``movement_level``
dB standard deviation. The magnitude of the ``sc``-point DFT of the impulse
response, plus complex AWGN, is the emitted ``|H|``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .csi import DEFAULT_SC, CsiDataset, Label
from .exceptions import ConfigError, DomainError, EmptyRequestError

DEFAULT_DELAYS = (0.0, 3.0, 5.0, 8.0, 11.0, 14.0)
DEFAULT_GAINS_DB = (0.0, -1.0, -2.0, -3.0, -4.0, -5.0)
# fixed per-path carrier phases of the simulated room; frames of one room share them
DEFAULT_PHASES_DEG = (0.0, 137.5, 275.0, 52.5, 190.0, 327.5)
ROTATION_STEP_DEG = 45.0


def _even_angles(n):
    return tuple(360.0 * i / n for i in range(n))


@dataclass(frozen=True)
class SimConfig:
    sc: int = DEFAULT_SC
    n_paths: int = 6
    path_delays: tuple = DEFAULT_DELAYS
    path_gains_db: tuple = DEFAULT_GAINS_DB
    path_angles_deg: tuple | None = None
    path_phases_deg: tuple | None = None
    antenna_orientation_deg: float = 0.0
    movement_level: float = 0.0
    snr_db: float = 30.0
    seed: int = 0

    def __post_init__(self):
        for name in ("path_delays", "path_gains_db", "path_angles_deg", "path_phases_deg"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(float(v) for v in value))
        if self.path_angles_deg is None:
            object.__setattr__(self, "path_angles_deg", _even_angles(self.n_paths))
        if self.path_phases_deg is None:
            phases = (DEFAULT_PHASES_DEG * (self.n_paths // len(DEFAULT_PHASES_DEG) + 1))
            object.__setattr__(self, "path_phases_deg", phases[: self.n_paths])
        if self.sc < 1 or self.n_paths < 1:
            raise ConfigError("sc and n_paths must be positive")
        for name in ("path_delays", "path_gains_db", "path_angles_deg", "path_phases_deg"):
            if len(getattr(self, name)) != self.n_paths:
                raise ConfigError(f"{name} must have n_paths={self.n_paths} entries")
        if min(self.path_delays) < 0:
            raise ConfigError("path delays must be non-negative")
        if not self.movement_level >= 0:
            raise ConfigError("movement_level must be >= 0")
        object.__setattr__(self, "antenna_orientation_deg", float(self.antenna_orientation_deg) % 360.0)
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits")


def nominal_response(config: SimConfig) -> np.ndarray:
    """Complex frequency response of the static channel (no jitter, no noise)."""
    return _taps(config) @ _steering(config)


def _taps(config):
    amp = 10.0 ** (np.asarray(config.path_gains_db) / 20.0)
    theta = np.deg2rad(np.asarray(config.path_angles_deg) - config.antenna_orientation_deg)
    pattern = 0.5 * (1.0 + np.cos(theta))
    phase = np.exp(1j * np.deg2rad(np.asarray(config.path_phases_deg)))
    return amp * pattern * phase


def _steering(config):
    # DFT of a fractional-delay impulse: exp(-j 2 pi k d / sc)
    k = np.arange(config.sc)
    return np.exp(-2j * np.pi * np.outer(np.asarray(config.path_delays), k) / config.sc)


def simulate_csi(config: SimConfig, n_frames: int, label=Label.UNKNOWN, scenario_tag="") -> CsiDataset:
    """Draw ``n_frames`` CSI magnitude frames; deterministic in ``config.seed``."""
    if n_frames < 1:
        raise EmptyRequestError("n_frames must be >= 1")
    rng = np.random.default_rng(config.seed)
    taps = _taps(config)
    if config.movement_level > 0:
        jitter_db = rng.normal(0.0, config.movement_level, size=(n_frames, config.n_paths))
        taps = taps * 10.0 ** (jitter_db / 20.0)
    else:
        taps = np.broadcast_to(taps, (n_frames, config.n_paths))
    H = taps @ _steering(config)
    if math.isfinite(config.snr_db):
        # noise floor fixed relative to the total nominal path power, independent of orientation
        ref_power = float(np.sum(10.0 ** (np.asarray(config.path_gains_db) / 10.0)))
        sigma = math.sqrt(ref_power / 10.0 ** (config.snr_db / 10.0) / 2.0)
        H = H + sigma * (rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape))
    return CsiDataset(np.abs(H).astype(np.float32), label, scenario_tag, config.sc)


class Scenario(enum.Enum):
    """Office occupancy presets: sitting (A, B), one walker (C, D), two (E, F), three (G)."""

    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"
    G = "G"

    @property
    def movement_level(self) -> float:
        return _MOVEMENT[self.value]

    @classmethod
    def parse(cls, name) -> "Scenario":
        try:
            return cls(str(name).strip().upper())
        except ValueError:
            raise DomainError(f"unknown scenario {name!r}; choose from A..G") from None


_MOVEMENT = {"A": 0.2, "B": 0.2, "C": 0.6, "D": 0.6, "E": 1.0, "F": 1.0, "G": 1.4}


def orientation_offset(label: Label) -> float:
    """Azimuth offset in degrees of the default orientation or rotation r1..r7."""
    label = Label.parse(label)
    if label == Label.UNKNOWN:
        raise DomainError("an orientation must be the default or r1..r7")
    return ROTATION_STEP_DEG * int(label)


def scenario_dataset(preset, orientation="default", n_frames=1000, seed=0,
                     base: SimConfig | None = None) -> CsiDataset:
    """Frames for one occupancy scenario and antenna orientation."""
    preset = Scenario.parse(preset.value if isinstance(preset, Scenario) else preset)
    label = Label.parse(orientation)
    offset = orientation_offset(label)
    base = base or SimConfig()
    cfg = replace(
        base,
        antenna_orientation_deg=base.antenna_orientation_deg + offset,
        movement_level=preset.movement_level,
        seed=seed,
    )
    tag = preset.value if label == Label.TAMPER_FREE else f"{preset.value}/r{int(label)}"
    return simulate_csi(cfg, n_frames, label, tag)


# -- key=value config files -------------------------------------------------

_TUPLE_FIELDS = {"path_delays", "path_gains_db", "path_angles_deg", "path_phases_deg"}


def parse_sim_config(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse ``key = value`` lines (``#`` comments, comma-separated vectors)."""
    known = {f.name: f for f in fields(SimConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _TUPLE_FIELDS:
                values[key] = tuple(float(v) for v in value.split(",") if v.strip())
            elif key in ("sc", "n_paths", "seed"):
                values[key] = int(value)
            else:
                values[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    if "n_paths" in values and "path_angles_deg" not in values:
        values.setdefault("path_angles_deg", None)
        values.setdefault("path_phases_deg", None)
    return replace(base or SimConfig(), **values)


def load_sim_config(path, base: SimConfig | None = None) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_sim_config(fh.read(), base)
