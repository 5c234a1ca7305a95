import os

import numpy as np
import pytest

from spmalab.errors import ConfigError, InvalidMdp, StepSizeTooLarge
from spmalab.models.config import Method
from spmalab.models.mdp import TabularMdp
from spmalab.models.experiment import effective_eta
from spmalab.models.record import IterationRecord
from spmalab.services import experiment_service
from spmalab.services.experiment_service import (
    CellKey,
    CellResult,
    ResultSet,
    auc,
    best_eta,
    expand_cells,
    load_config,
    parse_config,
    run_experiment,
)

CONFIGS_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def make_bandit_config(**overrides):
    data = {
        "environment": {"kind": "bandit", "num_arms": 4, "min_gap": 0.1, "seed": 3},
        "methods": ["SPMA", "SPMA_bandit_gap"],
        "eta_grid": [0.5, 1.0],
        "outer_T": 6,
        "seeds": [0, 1],
    }
    data.update(overrides)
    return data


def make_curve(values):
    return [IterationRecord(t=t, j_value=v, subopt_inf=0.0, subopt_rho=0.0) for t, v in enumerate(values)]


class TestConfig:
    def test_defaults(self):
        cfg = parse_config({"environment": {"kind": "cliff_world"}, "methods": ["SPMA"], "outer_T": 5})
        assert cfg.eta_grid == [0.3, 0.5, 0.7, 0.9, 1.0]
        assert cfg.inner_m == [5, 25, 50]
        assert cfg.environment.gamma == 0.9

    def test_empty_eta_grid(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(make_bandit_config(eta_grid=[]))
        assert exc.value.field == "eta_grid"

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(make_bandit_config(bogus=1))
        assert exc.value.field == "bogus"

    def test_nested_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(make_bandit_config(armijo={"init_step": 1.0, "typo": 2}))
        assert exc.value.field.startswith("armijo")

    def test_unscaled_spma_step_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"environment": {"kind": "cliff_world"}, "methods": ["SPMA"], "outer_T": 5, "scale_eta": False})

    def test_gap_method_needs_bandit(self):
        with pytest.raises(ConfigError):
            parse_config({"environment": {"kind": "frozen_lake"}, "methods": ["SPMA_bandit_gap"], "outer_T": 5})

    def test_mdpo_needs_linear(self):
        with pytest.raises(ConfigError):
            parse_config({"environment": {"kind": "cliff_world"}, "methods": ["MDPO"], "outer_T": 5})

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"environment": {"kind": "frozen_lake"}, "methods": ["NPG"], "outer_T": 3}', encoding="utf-8")
        assert load_config(str(path)).methods == [Method.NPG]

    def test_load_bad_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_effective_eta(self):
        assert effective_eta(Method.SPMA, 0.5, 0.9, True) == pytest.approx(0.05)
        assert effective_eta(Method.NPG, 0.5, 0.9, True) == 0.5
        assert effective_eta(Method.SPMA, 0.5, 0.0, True) == 0.5

    @pytest.mark.parametrize("name", ["cliff.json", "bandit.json", "frozen_lake.json"])
    def test_shipped_configs_load(self, name):
        cfg = load_config(os.path.join(CONFIGS_DIR, name))
        assert cfg.methods


class TestCells:
    def test_expand_bandit(self):
        cells = expand_cells(parse_config(make_bandit_config()))
        assert len(cells) == 2 * 2 + 2
        assert all(c.m is None for c in cells)

    def test_expand_linear(self):
        cfg = parse_config({
            "environment": {"kind": "cliff_world"},
            "parameterization": {"kind": "linear"},
            "methods": ["SPMA", "SPG"],
            "eta_grid": [0.5],
            "inner_m": [5, 25],
            "outer_T": 2,
        })
        cells = expand_cells(cfg, seed_offset=10)
        assert sorted((c.method, c.m) for c in cells) == [("SPG", None), ("SPMA", 5), ("SPMA", 25)]
        assert {c.seed for c in cells} == {10}


class TestAuc:
    def test_trapezoid(self):
        assert auc(make_curve([0.0, 1.0, 1.0])) == pytest.approx(1.5)

    def test_best_eta_invariant_to_scaling(self):
        curves = {0.1: [0.0, 0.2, 0.4], 0.5: [0.0, 0.5, 0.6], 1.0: [0.0, 0.6, 0.3]}

        def results(scale):
            cells = [CellResult(key=CellKey("SPMA", eta, None, 0), records=make_curve([scale * v for v in values])) for eta, values in curves.items()]
            return ResultSet(config=None, cells=cells)

        assert best_eta(results(1.0))[("SPMA", None)][0] == 0.5
        assert best_eta(results(7.5))[("SPMA", None)][0] == 0.5

    def test_failed_cells_ignored(self):
        rs = ResultSet(config=None, cells=[CellResult(key=CellKey("NPG", 1.0, None, 0), error="boom")])
        assert best_eta(rs) == {}


class TestRunExperiment:
    def test_bandit_sweep(self):
        results = run_experiment(parse_config(make_bandit_config()), threads=2)
        assert not results.failed
        assert len(results.cells) == 6
        keys = [c.key.sort_key() for c in results.cells]
        assert keys == sorted(keys)
        assert all(len(c.records) == 7 for c in results.cells)

    def test_cell_isolation(self, monkeypatch):
        real = experiment_service.run_tabular

        def flaky(mdp, cfg, optimal=None):
            if cfg.method == Method.SPMA and cfg.step_size == 1.0:
                raise StepSizeTooLarge("forced")
            return real(mdp, cfg, optimal)

        monkeypatch.setattr(experiment_service, "run_tabular", flaky)
        results = run_experiment(parse_config(make_bandit_config()), threads=2)
        assert len(results.failed) == 2
        assert all("StepSizeTooLarge" in c.error for c in results.failed)
        assert sum(c.ok for c in results.cells) == 4

    def test_invalid_shared_environment_stops_the_sweep(self, monkeypatch):
        def broken(cfg, seed=0):
            P = np.full((2, 1, 2), 0.6)
            return TabularMdp(transition=P, reward=np.zeros((2, 1)), initial_dist=[1.0, 0.0], discount=0.9)

        monkeypatch.setattr(experiment_service, "build_environment", broken)
        cfg = parse_config({"environment": {"kind": "cliff_world"}, "methods": ["SPMA"], "eta_grid": [1.0], "outer_T": 2})
        with pytest.raises(InvalidMdp) as exc:
            run_experiment(cfg, threads=1)
        assert exc.value.field == "transition"

    def test_invalid_bandit_instance_fails_its_cells(self, monkeypatch):
        def broken(cfg, seed=0):
            return TabularMdp(transition=np.ones((1, 2, 1)), reward=np.array([[0.5, 2.0]]), initial_dist=[1.0], discount=0.0)

        monkeypatch.setattr(experiment_service, "build_environment", broken)
        results = run_experiment(parse_config(make_bandit_config(methods=["SPMA"], eta_grid=[1.0])), threads=1)
        assert len(results.failed) == 2
        assert all(c.error.startswith("InvalidMdp") for c in results.failed)

    def test_seed_offset_changes_bandit(self):
        cfg = parse_config(make_bandit_config(methods=["SPMA"], eta_grid=[1.0], seeds=[0]))
        a = run_experiment(cfg, threads=1)
        b = run_experiment(cfg, threads=1, seed_offset=5)
        assert a.cells[0].key.seed == 0 and b.cells[0].key.seed == 5
        assert a.cells[0].records[0].j_value != b.cells[0].records[0].j_value

    def test_tabular_cliff(self):
        cfg = parse_config({"environment": {"kind": "cliff_world"}, "methods": ["SPMA", "NPG"], "eta_grid": [1.0], "outer_T": 5})
        results = run_experiment(cfg, threads=1)
        assert not results.failed
        spma = next(c for c in results.cells if c.key.method == "SPMA")
        assert all(r.bound_ok for r in spma.records)
        assert np.isfinite(auc(spma.records))
