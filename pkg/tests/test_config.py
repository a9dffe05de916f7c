import json

import pytest

from fedsim.config import ExperimentConfig
from fedsim.errors import ConfigError


class TestDefaults:
    def test_headline_defaults(self):
        # the documented default setting: 40 clients, 240 rounds, budget 20,
        # 10% sampling, offline 0.2 / recovery 0.1, peer rounds at half
        # cadence, E=1 at eta 0.001, 6-step windows in batches of 16,
        # 2500 points per client under equal partitioning
        cfg = ExperimentConfig()
        assert cfg.n_clients == 40
        assert cfg.rounds == 240
        assert cfg.budget == 20
        assert cfg.sample_ratio == 0.10 and cfg.k_selected == 4
        assert cfg.p_offline == 0.2 and cfg.p_recover == 0.1
        assert cfg.decentral_freq == 0.5 and cfg.decentral_period() == 2
        assert cfg.epochs == 1 and cfg.eta0 == 0.001
        assert cfg.seq_len == 6 and cfg.batch_size == 16
        assert cfg.points_per_client == 2500
        assert cfg.vehicles_per_client == 1
        assert cfg.chi == 3
        assert cfg.slice_points == 16 * 6

    def test_compensator_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.alpha0 == 2.0
        assert cfg.alpha_step == pytest.approx(2.0 * (2.0 - 1.0) / 240)
        assert cfg.beta0 == 1.5 and cfg.delta_beta == 0.05
        assert cfg.gamma == 1.2

    def test_variant_presets(self):
        assert ExperimentConfig(variant="fedavg").selection_mode == "uniform"
        assert ExperimentConfig(variant="fedavg").proximal_mu == 0.0
        assert ExperimentConfig(variant="fedprox").proximal_mu == 0.01
        assert ExperimentConfig(variant="fedcab").selection_mode == "ranked"
        assert not ExperimentConfig(variant="fedcab").decentralized_enabled
        assert ExperimentConfig(variant="feddecab").decentralized_enabled
        assert ExperimentConfig(variant="fedprox_plus").selection_mode == "ranked"
        assert ExperimentConfig(variant="fedprox_plus").proximal_mu == 0.01

    def test_selection_override_beats_preset(self):
        cfg = ExperimentConfig(variant="feddecab", selection="uniform")
        assert cfg.selection_mode == "uniform"

    def test_schedule_helpers(self):
        cfg = ExperimentConfig(variant="feddecab", decentral_freq=0.25)
        assert cfg.decentral_period() == 4
        assert [t for t in range(1, 13) if cfg.is_decentral_round(t)] == [4, 8, 12]
        assert ExperimentConfig(decentral_freq=0.0).decentral_period() is None

    def test_eta_schedule(self):
        cfg = ExperimentConfig(eta0=0.1, eta_decay=0.5)
        assert [cfg.eta_at(t) for t in (1, 2, 3)] == pytest.approx([0.1, 0.05, 0.025])


class TestValidation:
    @pytest.mark.parametrize(
        "bad",
        [
            dict(variant="moon"),
            dict(scenario="foggy"),
            dict(selection="lottery"),
            dict(n_clients=1),
            dict(rounds=0),
            dict(sample_ratio=0.0),
            dict(sample_ratio=1.5),
            dict(holdout_fraction=1.0),
            dict(p_offline=1.5),
            dict(decentral_freq=2.0),
            dict(budget=-1),
            dict(eta0=0.0),
            dict(epochs=-1),
            dict(chi=0),
            dict(rmse_units="miles"),
            dict(dataset="csv"),  # missing data_path
            dict(dataset="parquet", data_path="x"),
        ],
    )
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)


class TestSerialization:
    def test_json_round_trip(self):
        cfg = ExperimentConfig(variant="fedprox", seed=9, weak_areas=[[0.0, 1.0, 2.0, 3.0]])
        again = ExperimentConfig.from_dict(json.loads(cfg.to_json()))
        assert again == cfg

    def test_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"variant": "fedcab", "seed": 4}', encoding="utf-8")
        cfg = ExperimentConfig.from_file(path)
        assert cfg.variant == "fedcab" and cfg.seed == 4

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"not_a_knob": 1})

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(path)
