"""Experiment configuration: every knob of a run, JSON in and out.

Defaults mirror the headline setting this simulator targets: 40 clients, an
upload budget of 20, 240 rounds, a 10% sampling ratio, offline probability
0.2, recovery probability 0.1, peer rounds at half the cadence of server
rounds, one local epoch at learning rate 0.001, and 6-step windows in batches
of 16.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError

VARIANTS = ("fedavg", "fedprox", "fedcab", "feddecab", "fedprox_plus", "local_only")
SCENARIOS = ("random", "regional", "datasize", "constant")
SELECTION_MODES = ("ranked", "uniform", "proportional")

# Variant presets: (selection mode, peer rounds enabled, proximal penalty on).
_VARIANT_FLAGS = {
    "fedavg": ("uniform", False, False),
    "fedprox": ("uniform", False, True),
    "fedcab": ("ranked", False, False),
    "feddecab": ("ranked", True, False),
    "fedprox_plus": ("ranked", False, True),
    "local_only": ("uniform", False, False),
}


@dataclass
class ExperimentConfig:
    # dataset
    dataset: str = "synthetic"            # synthetic | csv | tdrive
    data_path: str | None = None
    synth_kind: str = "sinusoid"
    synth_vehicles: int = 40
    synth_points_each: int = 420

    # partitioning
    partition: str = "by_vehicle"         # equal | by_vehicle
    points_per_client: int = 2500
    vehicles_per_client: int = 1

    # availability scenario
    scenario: str = "random"
    alpha_dir: float = 1.0
    # weak-signal boxes as [lat_min, lat_max, lon_min, lon_max] in degrees
    weak_areas: list[list[float]] = field(default_factory=list)
    p_low: float = 0.2
    p_high: float = 0.9
    datasize_percentile: float = 90.0
    p_company: float = 0.95
    p_private: float = 0.3
    constant_p: float = 1.0
    reveal_slice_points: int | None = None  # None -> batch_size * seq_len

    # federation
    n_clients: int = 40
    rounds: int = 240
    sample_ratio: float = 0.10
    k_per_round: int | None = None        # overrides sample_ratio when set
    epochs: int = 1
    eta0: float = 0.001
    eta_decay: float = 1.0
    budget: int | None = 20
    p_offline: float = 0.2
    p_recover: float = 0.1
    decentral_freq: float = 0.5
    chi: int = 3
    offline_train_every_round: bool = False
    aggregate_by_datasize: bool = False

    # compensators
    alpha0: float = 2.0
    delta_alpha: float | None = None      # None -> alpha reaches 1 mid-run
    beta0: float = 1.5
    delta_beta: float = 0.05
    gamma: float = 1.2

    # algorithm
    variant: str = "feddecab"
    selection: str | None = None          # None -> variant preset
    prox_mu: float = 0.01

    # model
    n_in: int = 2
    hidden: int = 32
    n_out: int = 2
    seq_len: int = 6
    batch_size: int = 16

    # evaluation / reproducibility
    holdout_fraction: float = 0.2
    rmse_units: str = "normalized"        # normalized | degrees
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}, expected one of {SCENARIOS}")
        if self.selection is not None and self.selection not in SELECTION_MODES:
            raise ConfigError(
                f"unknown selection {self.selection!r}, expected one of {SELECTION_MODES}"
            )
        if self.dataset not in ("synthetic", "csv", "tdrive"):
            raise ConfigError(f"unknown dataset source {self.dataset!r}")
        if self.dataset != "synthetic" and not self.data_path:
            raise ConfigError(f"dataset {self.dataset!r} requires data_path")
        if self.partition not in ("equal", "by_vehicle"):
            raise ConfigError(f"unknown partition mode {self.partition!r}")
        if self.n_clients < 2:
            raise ConfigError(f"n_clients must be >= 2, got {self.n_clients}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if not 0.0 < self.sample_ratio <= 1.0:
            raise ConfigError(f"sample_ratio must be in (0, 1], got {self.sample_ratio}")
        if self.k_per_round is not None and self.k_per_round < 1:
            raise ConfigError(f"k_per_round must be >= 1, got {self.k_per_round}")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError(
                f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}"
            )
        if not (0.0 <= self.p_offline <= 1.0 and 0.0 <= self.p_recover <= 1.0):
            raise ConfigError("p_offline and p_recover must lie in [0, 1]")
        if not 0.0 <= self.decentral_freq <= 1.0:
            raise ConfigError(f"decentral_freq must be in [0, 1], got {self.decentral_freq}")
        if self.budget is not None and self.budget < 0:
            raise ConfigError(f"budget must be >= 0 or null, got {self.budget}")
        if self.eta0 <= 0 or self.eta_decay <= 0:
            raise ConfigError("eta0 and eta_decay must be positive")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.chi < 1:
            raise ConfigError(f"chi must be >= 1, got {self.chi}")
        if self.rmse_units not in ("normalized", "degrees"):
            raise ConfigError(f"unknown rmse_units {self.rmse_units!r}")
        if min(self.n_in, self.hidden, self.n_out, self.seq_len, self.batch_size) < 1:
            raise ConfigError("model dims, seq_len and batch_size must be >= 1")

    # resolved knobs -------------------------------------------------------

    @property
    def k_selected(self) -> int:
        if self.k_per_round is not None:
            return self.k_per_round
        return max(1, round(self.sample_ratio * self.n_clients))

    @property
    def slice_points(self) -> int:
        if self.reveal_slice_points is not None:
            return self.reveal_slice_points
        return self.batch_size * self.seq_len

    @property
    def alpha_step(self) -> float:
        if self.delta_alpha is not None:
            return self.delta_alpha
        # reach the linear phase halfway through the run
        return 2.0 * max(self.alpha0 - 1.0, 0.0) / self.rounds

    @property
    def selection_mode(self) -> str:
        if self.selection is not None:
            return self.selection
        return _VARIANT_FLAGS[self.variant][0]

    @property
    def decentralized_enabled(self) -> bool:
        return _VARIANT_FLAGS[self.variant][1] and self.decentral_freq > 0.0

    @property
    def proximal_mu(self) -> float:
        return self.prox_mu if _VARIANT_FLAGS[self.variant][2] else 0.0

    def decentral_period(self) -> int | None:
        """Peer rounds run every ceil(1/f)-th round; None means never."""
        if not self.decentralized_enabled:
            return None
        return math.ceil(1.0 / self.decentral_freq)

    def is_decentral_round(self, t: int) -> bool:
        period = self.decentral_period()
        return period is not None and t % period == 0

    def eta_at(self, t: int) -> float:
        return self.eta0 * self.eta_decay ** (t - 1)

    # serialization --------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with Path(path).open(encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)
