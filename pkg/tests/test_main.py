import json

from spmalab.main import main


def write_config(path, **overrides):
    data = {
        "environment": {"kind": "bandit", "num_arms": 3, "min_gap": 0.2},
        "methods": ["SPMA"],
        "eta_grid": [0.5, 1.0],
        "outer_T": 5,
    }
    data.update(overrides)
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


class TestCli:
    def test_grid_then_report(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        assert main(["--output-dir", str(out), "--no-svg", "grid", cfg]) == 0
        assert len(list(out.glob("*.csv"))) == 2
        assert not (out / "returns.svg").exists()
        assert main(["report", str(out)]) == 0
        assert (out / "returns.svg").exists()

    def test_run_uses_first_eta(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json")
        out = tmp_path / "out"
        assert main(["--output-dir", str(out), "run", cfg]) == 0
        assert [p.name for p in out.glob("*.csv")] == ["SPMA_eta-0.5_m-none_seed-0.csv"]

    def test_bad_config_exit_code(self, tmp_path):
        cfg = write_config(tmp_path / "cfg.json", eta_grid=[])
        assert main(["--output-dir", str(tmp_path / "out"), "run", cfg]) == 2

    def test_missing_results_dir(self, tmp_path):
        assert main(["report", str(tmp_path / "nothing")]) == 2

    def test_verify_bandit(self):
        assert main(["verify", "bandit"]) == 0
