"""Experiment configuration, profiles, canonical serialization and fingerprints.

The default configuration reproduces the reference simulation setup
(256 ports over a 10-wavelength aperture, 4 antennas, 64 pilot slots,
hidden width 512, 5e4 training samples, batch 256, lr 1e-4, patience 20).
A reduced "desk" profile ships for CPU-scale runs and CI.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .channel_model import ArrayGeometry, ScatteringConfig
from .errors import ConfigError
from .pilot_system import SwitchSchedule, random_schedule, sequential_schedule

SCHEDULE_KINDS = ("sequential", "random")


@dataclass
class Seeds:
    """Independent master seeds for each randomness consumer."""

    channel: int = 101
    schedule: int = 202
    init: int = 303
    shuffle: int = 404
    test: int = 505

    def override(self, name: str, value: int) -> None:
        if not hasattr(self, name):
            raise ConfigError(f"unknown seed name '{name}'")
        setattr(self, name, int(value))


@dataclass
class ExperimentConfig:
    num_ports: int = 256
    num_antennas: int = 4
    num_slots: int = 64
    aperture_wavelengths: float = 10.0
    # Metadata only: results depend on the spacing ratio alone.
    carrier_frequency_hz: float = 3.5e9
    num_clusters: int = 2
    rays_per_cluster: int = 10
    max_angle_spread_deg: float = 5.0
    snr_db_list: list[float] = field(
        default_factory=lambda: [-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0]
    )
    schedule_kind: str = "sequential"
    mixed_snr: bool = False
    n_train_samples: int = 50_000
    rho: float = 0.05
    batch_size: int = 256
    learning_rate: float = 1e-4
    hidden_width: int = 512
    patience: int = 20
    max_epochs: int = 200
    n_test_samples: int = 2000
    dictionary_oversampling: int = 4
    seeds: Seeds = field(default_factory=Seeds)
    dataset_dir: str = "artifacts/datasets"
    model_dir: str = "artifacts/models"
    results_dir: str = "artifacts/results"

    # -- validation -----------------------------------------------------

    def validate(self) -> None:
        """Raise ConfigError naming the first offending field."""
        def check(cond: bool, name: str, detail: str) -> None:
            if not cond:
                raise ConfigError(f"{name}: {detail} (got {getattr(self, name)!r})")

        check(self.num_ports >= 2, "num_ports", "must be an integer >= 2")
        check(self.num_antennas >= 1, "num_antennas", "must be an integer >= 1")
        check(
            self.num_antennas <= self.num_ports,
            "num_antennas",
            f"must not exceed num_ports = {self.num_ports}",
        )
        check(self.num_slots >= 1, "num_slots", "must be an integer >= 1")
        check(self.aperture_wavelengths > 0, "aperture_wavelengths", "must be positive")
        check(self.carrier_frequency_hz > 0, "carrier_frequency_hz", "must be positive")
        check(self.num_clusters >= 1, "num_clusters", "must be an integer >= 1")
        check(self.rays_per_cluster >= 1, "rays_per_cluster", "must be an integer >= 1")
        check(self.max_angle_spread_deg >= 0, "max_angle_spread_deg", "must be >= 0")
        check(
            len(self.snr_db_list) > 0
            and all(math.isfinite(s) for s in self.snr_db_list),
            "snr_db_list",
            "must be a non-empty list of finite values",
        )
        check(
            self.schedule_kind in SCHEDULE_KINDS,
            "schedule_kind",
            f"must be one of {SCHEDULE_KINDS}",
        )
        check(self.n_train_samples >= 2, "n_train_samples", "must be an integer >= 2")
        check(0.0 < self.rho < 1.0, "rho", "must lie strictly between 0 and 1")
        check(self.batch_size >= 1, "batch_size", "must be an integer >= 1")
        check(self.learning_rate > 0, "learning_rate", "must be positive")
        check(self.hidden_width >= 1, "hidden_width", "must be an integer >= 1")
        check(self.patience >= 0, "patience", "must be an integer >= 0")
        check(self.max_epochs >= 1, "max_epochs", "must be an integer >= 1")
        check(self.n_test_samples >= 1, "n_test_samples", "must be an integer >= 1")
        check(
            self.dictionary_oversampling >= 1,
            "dictionary_oversampling",
            "must be an integer >= 1",
        )

    # -- derived physical objects ---------------------------------------

    @property
    def max_angle_spread_rad(self) -> float:
        return math.radians(self.max_angle_spread_deg)

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.num_ports, self.aperture_wavelengths)

    def scattering(self) -> ScatteringConfig:
        return ScatteringConfig(
            self.num_clusters, self.rays_per_cluster, self.max_angle_spread_rad
        )

    def build_schedule(self) -> SwitchSchedule:
        """The (fixed) schedule all pipeline stages share for this config."""
        if self.schedule_kind == "sequential":
            return sequential_schedule(self.num_ports, self.num_antennas, self.num_slots)
        rng = np.random.default_rng((self.seeds.schedule,))
        return random_schedule(self.num_ports, self.num_antennas, self.num_slots, rng)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Build a config from a (possibly partial) dict over ``base`` defaults."""
        cfg = replace(base) if base is not None else cls()
        cfg.seeds = replace(cfg.seeds)
        known = set(cfg.to_dict())
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'")
            if key == "seeds":
                for seed_name, seed_value in value.items():
                    cfg.seeds.override(seed_name, seed_value)
            elif key == "snr_db_list":
                cfg.snr_db_list = [float(v) for v in value]
            else:
                setattr(cfg, key, type(getattr(cfg, key))(value))
        return cfg

    @classmethod
    def from_json(cls, text: str, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text), base=base)


def canonical_json(cfg: ExperimentConfig) -> str:
    """Canonical serialization: sorted keys, compact separators, exact floats."""
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))


# Storage locations are excluded from fingerprints: where artifacts live must
# not change what gets generated or trained.
_PATH_FIELDS = ("dataset_dir", "model_dir", "results_dir")


def _fingerprint_payload(cfg: ExperimentConfig) -> dict:
    data = cfg.to_dict()
    for key in _PATH_FIELDS:
        data.pop(key, None)
    return data


def config_fingerprint(cfg: ExperimentConfig) -> bytes:
    """32-byte digest of the experiment-defining fields (paths excluded)."""
    payload = json.dumps(_fingerprint_payload(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).digest()


def dataset_fingerprint(cfg: ExperimentConfig, snr_db) -> bytes:
    """Digest identifying one generated dataset: the config plus its SNR point.

    ``snr_db`` is a float for per-SNR datasets or a list for the mixed mode.
    """
    if isinstance(snr_db, (list, tuple)):
        tag: object = [float(s) for s in snr_db]
    else:
        tag = float(snr_db)
    doc = {"config": _fingerprint_payload(cfg), "dataset_snr_db": tag}
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).digest()


def paper_profile() -> ExperimentConfig:
    """Full-scale reference setup (GPU-friendly; heavy on CPU)."""
    return ExperimentConfig()


def desk_profile() -> ExperimentConfig:
    """Reduced setup sized for desktop CPUs and CI.

    Keeps full port coverage (P*M = N) and the sparse two-cluster scenario;
    the learning rate and batch size are rescaled so training converges,
    plateaus, and early-stops within the shortened epoch budget.
    """
    return replace(
        ExperimentConfig(),
        num_ports=64,
        num_slots=16,
        n_train_samples=8000,
        hidden_width=256,
        max_epochs=60,
        learning_rate=7e-4,
        batch_size=64,
        snr_db_list=[-10.0, 0.0, 10.0],
        n_test_samples=2000,
    )


PROFILES = {"paper": paper_profile, "desk": desk_profile}
