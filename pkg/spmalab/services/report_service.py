"""
Report emission: per-cell CSVs, a markdown summary and an SVG chart of J(pi_t).
"""
import logging
import math
import os
import xml.etree.ElementTree as ET
from typing import Dict, List, Optional, Tuple

import numpy as np

from spmalab.errors import ReportIoError
from spmalab.models.record import IterationRecord
from spmalab.services.experiment_service import (
    CellKey,
    CellResult,
    ResultSet,
    auc,
    best_eta,
    group_by_setting,
)
from spmalab.storage import cell_filename, ensure_dir, list_cell_files, read_records, write_records

logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.md"
CHART_FILE = "returns.svg"
CHART_WIDTH, CHART_HEIGHT, CHART_PAD = 640, 400, 40
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def _label(method: str, m: Optional[int]) -> str:
    return method if m is None else f"{method} (m={m})"


def _mean_curve(cells: List[CellResult]) -> np.ndarray:
    length = min(len(c.records) for c in cells)
    return np.mean([[r.j_value for r in c.records[:length]] for c in cells], axis=0)


def alpha_product(records: List[IterationRecord]) -> float:
    """prod_{t < T} alpha_t; the last record's factor is never applied."""
    return float(np.prod([r.alpha_t for r in records[:-1]])) if len(records) > 1 else 1.0


def best_curves(results: ResultSet) -> Dict[Tuple[str, Optional[int]], Tuple[float, List[CellResult]]]:
    groups = group_by_setting(results)
    return {key: (eta, groups[(key[0], key[1], eta)]) for key, (eta, _) in best_eta(results).items()}


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6g}"


def render_summary(results: ResultSet) -> str:
    lines = ["# Experiment summary", ""]
    cfg = results.config
    if cfg is not None:
        lines += [f"Environment: `{cfg.environment.kind}`, parameterization: `{cfg.parameterization.kind}`, T = {cfg.outer_T}", ""]

    best = best_curves(results)
    lines += ["## Best step size by AUC", "", "| method | eta | mean AUC | seeds | final J | final subopt_inf | final subopt_rho | prod alpha_t |", "|---|---|---|---|---|---|---|---|"]
    for (method, m), (eta, cells) in sorted(best.items(), key=lambda kv: (kv[0][0], kv[0][1] or -1)):
        finals = [c.records[-1] for c in cells]
        lines.append(
            "| {} | {} | {} | {} | {} | {} | {} | {} |".format(
                _label(method, m),
                _fmt(eta),
                _fmt(float(np.mean([auc(c.records) for c in cells]))),
                len(cells),
                _fmt(float(np.mean([r.j_value for r in finals]))),
                _fmt(float(np.mean([r.subopt_inf for r in finals]))),
                _fmt(float(np.mean([r.subopt_rho for r in finals]))),
                _fmt(float(np.mean([alpha_product(c.records) for c in cells]))),
            )
        )

    lines += ["", "## Step-size sensitivity (final J, mean over seeds)", ""]
    groups = group_by_setting(results)
    etas = sorted({eta for (_, _, eta) in groups})
    settings = sorted({(method, m) for (method, m, _) in groups}, key=lambda k: (k[0], k[1] or -1))
    lines += ["| method | " + " | ".join(_fmt(e) for e in etas) + " |", "|---" * (len(etas) + 1) + "|"]
    for method, m in settings:
        cols = []
        for eta in etas:
            cells = groups.get((method, m, eta))
            cols.append(_fmt(float(np.mean([c.records[-1].j_value for c in cells]))) if cells else "")
        lines.append(f"| {_label(method, m)} | " + " | ".join(cols) + " |")

    lines += ["", "## Bound checks", ""]
    checked = [c for c in results.cells if c.ok and any(r.bound_ok is not None for r in c.records)]
    if not checked:
        lines.append("No run recorded a per-iteration contraction check.")
    for cell in checked:
        violations = [r.t for r in cell.records if r.bound_ok is False]
        verdict = "PASS" if not violations else f"FAIL at t = {violations[:5]}"
        lines.append(f"- {_label(cell.key.method, cell.key.m)} eta={_fmt(cell.key.eta)} seed={cell.key.seed}: contraction {verdict}")

    if results.failed:
        lines += ["", "## Failed cells", ""]
        for cell in results.failed:
            lines.append(f"- {_label(cell.key.method, cell.key.m)} eta={_fmt(cell.key.eta)} seed={cell.key.seed}: {cell.error}")
    return "\n".join(lines) + "\n"


def render_chart(results: ResultSet) -> ET.Element:
    """One polyline per (method, m): the mean J curve at its best eta."""
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(CHART_WIDTH), height=str(CHART_HEIGHT))
    curves = [(key, _mean_curve(cells)) for key, (_, cells) in sorted(best_curves(results).items(), key=lambda kv: (kv[0][0], kv[0][1] or -1))]
    curves = [(key, curve) for key, curve in curves if curve.size]
    ET.SubElement(svg, "rect", x="0", y="0", width=str(CHART_WIDTH), height=str(CHART_HEIGHT), fill="white")
    if not curves:
        return svg
    t_max = max(curve.size for _, curve in curves) - 1 or 1
    low = min(float(c.min()) for _, c in curves)
    high = max(float(c.max()) for _, c in curves)
    if math.isclose(low, high):
        high = low + 1.0
    inner_w, inner_h = CHART_WIDTH - 2 * CHART_PAD, CHART_HEIGHT - 2 * CHART_PAD

    def point(t: int, j: float) -> str:
        x = CHART_PAD + inner_w * t / t_max
        y = CHART_PAD + inner_h * (1.0 - (j - low) / (high - low))
        return f"{x:.2f},{y:.2f}"

    for i, ((method, m), curve) in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        ET.SubElement(
            svg,
            "polyline",
            points=" ".join(point(t, j) for t, j in enumerate(curve)),
            fill="none",
            stroke=color,
        ).set("data-method", _label(method, m))
        legend = ET.SubElement(svg, "text", x=str(CHART_PAD + 8), y=str(CHART_PAD + 16 * (i + 1)), fill=color)
        legend.text = _label(method, m)
    return svg


def emit_report(results: ResultSet, output_dir: str, svg: bool = True, write_csv: bool = True) -> List[str]:
    """
    Write one CSV per successful cell, summary.md and (optionally) returns.svg.
    Returns the written paths in emission order.

    Raises:
        ReportIoError: if the directory or a file cannot be written
    """
    ensure_dir(output_dir)
    written = []
    if write_csv:
        for cell in results.cells:
            if not cell.ok:
                continue
            path = os.path.join(output_dir, cell_filename(cell.key.method, cell.key.eta, cell.key.m, cell.key.seed))
            write_records(path, cell.records)
            written.append(path)

    summary = os.path.join(output_dir, SUMMARY_FILE)
    try:
        with open(summary, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_summary(results))
        written.append(summary)
        if svg:
            chart = os.path.join(output_dir, CHART_FILE)
            ET.ElementTree(render_chart(results)).write(chart, encoding="utf-8", xml_declaration=True)
            written.append(chart)
    except OSError as e:
        raise ReportIoError(f"cannot write report in {output_dir}: {e.strerror}")
    logger.info("✅ report written to %s (%d files)", output_dir, len(written))
    return written


def load_results(results_dir: str) -> ResultSet:
    """Rebuild a result set from the cell CSVs of an earlier run."""
    cells = []
    for path, (method, eta, m, seed) in list_cell_files(results_dir):
        cells.append(CellResult(key=CellKey(method, eta, m, seed), records=read_records(path, method)))
    if not cells:
        raise ReportIoError(f"no cell CSVs found in {results_dir}")
    cells.sort(key=lambda c: c.key.sort_key())
    return ResultSet(config=None, cells=cells)
