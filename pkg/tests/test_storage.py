import xml.etree.ElementTree as ET

import pytest

from spmalab.errors import ReportIoError
from spmalab.models.record import CSV_COLUMNS, IterationRecord
from spmalab.services.experiment_service import parse_config, run_experiment
from spmalab.services.report_service import CHART_FILE, SUMMARY_FILE, emit_report, load_results, render_summary
from spmalab.storage import cell_filename, parse_cell_filename, read_records, write_records


def make_results():
    cfg = parse_config({
        "environment": {"kind": "bandit", "num_arms": 3, "min_gap": 0.2, "seed": 1},
        "methods": ["SPMA", "NPG", "SPMA_bandit_gap"],
        "eta_grid": [0.5, 1.0],
        "outer_T": 6,
        "seeds": [0, 1],
    })
    return run_experiment(cfg, threads=2)


class TestCsv:
    def test_round_trip(self, tmp_path):
        records = make_results().cells[0].records
        path = tmp_path / "cell.csv"
        write_records(str(path), records)
        back = read_records(str(path))
        assert [r.row() for r in back] == [r.row() for r in records]

    def test_header_and_empty_fields(self, tmp_path):
        path = tmp_path / "cell.csv"
        write_records(str(path), [IterationRecord(t=0, j_value=0.5, subopt_inf=0.1, subopt_rho=0.1)])
        lines = path.read_text(encoding="utf-8").split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1] == "0,0.5,0.1,0.1,,,1.0,,,"

    def test_booleans(self, tmp_path):
        path = tmp_path / "cell.csv"
        write_records(str(path), [IterationRecord(t=0, j_value=0.0, subopt_inf=0.0, subopt_rho=0.0, bound_ok=True)])
        assert path.read_text(encoding="utf-8").split("\n")[1].endswith(",true")
        assert read_records(str(path))[0].bound_ok is True

    def test_bad_header(self, tmp_path):
        path = tmp_path / "cell.csv"
        path.write_text("a,b\n", encoding="utf-8")
        with pytest.raises(ReportIoError):
            read_records(str(path))

    def test_filename_round_trip(self):
        name = cell_filename("SPMA_bandit_gap", 0.0, None, 3)
        assert parse_cell_filename(name) == ("SPMA_bandit_gap", 0.0, None, 3)
        assert parse_cell_filename(cell_filename("MDPO", 0.045, 25, 0)) == ("MDPO", 0.045, 25, 0)
        assert parse_cell_filename("summary.md") is None


class TestReport:
    def test_emit_files(self, tmp_path):
        results = make_results()
        written = emit_report(results, str(tmp_path))
        assert sum(p.endswith(".csv") for p in written) == len(results.cells)
        assert (tmp_path / SUMMARY_FILE).exists()
        assert (tmp_path / CHART_FILE).exists()

    def test_svg_has_one_polyline_per_method(self, tmp_path):
        emit_report(make_results(), str(tmp_path))
        root = ET.parse(tmp_path / CHART_FILE).getroot()
        lines = root.findall("{http://www.w3.org/2000/svg}polyline")
        assert sorted(line.get("data-method") for line in lines) == ["NPG", "SPMA", "SPMA_bandit_gap"]

    def test_no_svg(self, tmp_path):
        emit_report(make_results(), str(tmp_path), svg=False)
        assert not (tmp_path / CHART_FILE).exists()

    def test_summary_lists_products_and_sensitivity(self):
        text = render_summary(make_results())
        assert "prod alpha_t" in text
        assert "final subopt_inf" in text
        assert "Step-size sensitivity" in text
        assert "contraction PASS" in text

    def test_output_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        emit_report(make_results(), str(a))
        emit_report(make_results(), str(b))
        for path in sorted(a.iterdir()):
            assert path.read_bytes() == (b / path.name).read_bytes()

    def test_reload(self, tmp_path):
        results = make_results()
        emit_report(results, str(tmp_path))
        back = load_results(str(tmp_path))
        assert [c.key.sort_key() for c in back.cells] == [c.key.sort_key() for c in results.cells]
        assert [r.j_value for r in back.cells[0].records] == [r.j_value for r in results.cells[0].records]

    def test_reload_empty_dir(self, tmp_path):
        with pytest.raises(ReportIoError):
            load_results(str(tmp_path))
