"""Sweep orchestration: build the mesh, measure one quantity along a grid, fit and judge."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..asym import ConjectureOnly, Unsupported, predict_heat_center, predict_poincare
from ..mesh import ConnectedSumSpec, WeightedGraph, build_connected_sum, ball_subgraph
from ..spectral import heat_trace, neumann_gap, rayleigh_lower
from ..whitney import WhitneyParams, build_whitney, combined_upper_bound
from .fitting import FitError, compare_fit, deep_log_offset, fit_exponents, write_table
from .scenario import Scenario

__all__ = ["SweepResult", "build_mesh", "run_sweep", "prediction_for", "compare", "run_and_report"]


@dataclass
class SweepResult:
    quantity: str
    rows: list[tuple[float, float, float]]
    errors: list[tuple[float, str]] = field(default_factory=list)

    @property
    def x(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def y(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])


def build_mesh(s: Scenario, extent: float | None = None) -> WeightedGraph:
    d = s.data["discretization"]
    if extent is None:
        extent = d["R_max"]
        if s.quantity == "heat":
            extent = d["heat_extent"] * math.sqrt(s.grid()[-1])
    spec = ConnectedSumSpec(tuple(s.profiles()), d["r0"])
    return build_connected_sum(spec, d["delta"], max(extent, 100 * d["r0"]), grade=d["grade"] if d["graded"] else None)


def _point(s: Scenario, G: WeightedGraph, x: float):
    q = s.quantity
    if q == "gap":
        res = neumann_gap(ball_subgraph(G, x))
        return res.lam, res.lam * res.residual
    if q == "whitney":
        w = s.data["whitney"]
        cov = build_whitney(x, WhitneyParams(w["eta"], w["kappa"]), G.n_ends,
                            center_radius=G.r0, resolution=G.step)
        return combined_upper_bound(G, cov).value, 0.0
    if q == "lower_bound":
        best = 0.0
        for i in range(G.n_ends):
            try:
                best = max(best, rayleigh_lower(G, i, x))
            except ValueError:
                continue  # the largest end carries no lower bound
        return best, 0.0
    raise ValueError(f"unknown quantity {q}")


def run_sweep(s: Scenario, threads: int = 1, G: WeightedGraph | None = None) -> SweepResult:
    grid = s.grid()
    if not grid:
        raise ValueError("empty grid")
    if G is None:
        G = build_mesh(s)
    G.laplacian()
    if s.quantity == "heat":
        tr = heat_trace(G, G.center, np.asarray(grid))
        rows, errors = [], []
        for t, p, m, bad in zip(tr.times, tr.values, tr.mass, tr.flagged):
            if bad:
                errors.append((float(t), f"accuracy flag: p={p:g}, mass={m:.17g}"))
            rows.append((float(t), float(p), float(abs(p) * max(abs(m - 1.0), 1e-15))))
        return SweepResult("heat", rows, errors)

    def one(x):
        try:
            v, e = _point(s, G, x)
            return (x, v, e), None
        except Exception as exc:  # recorded per row, the sweep continues
            return None, (x, f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, grid))
    else:
        out = [one(x) for x in grid]
    rows = sorted(r for r, _ in out if r is not None)
    errors = sorted(e for _, e in out if e is not None)
    return SweepResult(s.quantity, rows, errors)


def prediction_for(s: Scenario):
    """Predicted growth class of the swept quantity, or ``(None, reason)``."""
    ends = s.ends
    try:
        if s.quantity == "heat":
            return predict_heat_center(ends), None
        lam = predict_poincare(ends)
    except Unsupported as exc:
        return None, str(exc)
    return (lam.reciprocal() if s.quantity == "gap" else lam), None


def compare(s: Scenario, result: SweepResult) -> dict:
    """Fit the sweep and compare against the prediction; returns the report dictionary."""
    pred, reason = prediction_for(s)
    law = pred.law if isinstance(pred, ConjectureOnly) else pred
    f = s.data["fit"]
    use_ll = f["use_loglog_term"]
    if use_ll is None:
        use_ll = law is not None and law.depth > 0
    x, y = result.x, result.y
    report = {
        "quantity": s.quantity,
        "prediction": None if law is None else law.text(),
        "prediction_basis": None if pred is None else ("conjecture" if isinstance(pred, ConjectureOnly) else "theorem"),
        "config_hash": s.hash,
        "rows": len(result.rows),
        "errors": [{"abscissa": a, "message": m} for a, m in result.errors],
    }
    try:
        raw = fit_exponents(x, y, use_ll, f["window"])
    except FitError as exc:
        report.update(fit=None, verdict={"verdict": "SKIPPED", "reason": f"fit refused: {exc}"})
        return report
    fit = raw
    if law is not None and f["offset_deep_logs"] and law.depth > 1:
        fit = fit_exponents(x, y / deep_log_offset(law, x), use_ll, f["window"])
        report["fit_raw"] = raw.as_dict()
    report["fit"] = fit.as_dict()
    if pred is None:
        report["verdict"] = {"verdict": "SKIPPED", "reason": reason}
    else:
        tol = s.data["compare"]
        report["verdict"] = compare_fit(pred, fit, tol["tol_a"], tol["tol_b"])
    return report


def run_and_report(s: Scenario, out_dir, threads: int = 1) -> dict:
    """Run the sweep, write CSV, report and the resolved scenario into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(s, threads=threads)
    write_table(out / f"{s.quantity}.csv", result.rows)
    report = compare(s, result)
    (out / f"{s.quantity}.report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    (out / "scenario.resolved.json").write_text(json.dumps(s.data, sort_keys=True, indent=2) + "\n")
    return report
