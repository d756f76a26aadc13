"""Scenario files: JSON validated against a schema, with every default made explicit."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..asym import EndSpec, ExponentTuple, as_rational, make_ends
from ..model import VolumeProfile

__all__ = ["Scenario", "ScenarioError", "load_scenario", "resolve", "config_hash", "SCHEMA"]

SCHEMA = json.loads(resources.files(__package__).joinpath("scenario.schema.json").read_text())

DEFAULTS = {
    "discretization": {
        "delta": 0.25,
        "graded": True,
        "grade": 256,
        "r0": 1.0,
        "r_splice": None,
        "R_max": 1e5,
        "heat_extent": 100.0,
    },
    "sweep": {"quantity": "gap", "points": {"per_decade": 4}},
    "fit": {"use_loglog_term": None, "window": None, "offset_deep_logs": True},
    "compare": {"tol_a": 0.15, "tol_b": 0.35},
    "whitney": {"eta": 0.02, "kappa": 1.0},
    "output": None,
}


class ScenarioError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _rational_text(x) -> str | float:
    q = as_rational(x)
    return float(q) if q.denominator in (1, 2, 4, 5, 8, 10) else f"{q.numerator}/{q.denominator}"


def resolve(raw: dict) -> dict:
    """Validate ``raw`` and return the fully expanded scenario dictionary."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ScenarioError(f"invalid scenario: {exc.message} at {list(exc.absolute_path)}") from None
    s = _merge(DEFAULTS, raw)
    ends = []
    for e in s["ends"]:
        alpha = as_rational(str(e["alpha"]) if isinstance(e["alpha"], float) else e["alpha"])
        betas = [as_rational(str(b) if isinstance(b, float) else b) for b in e.get("betas", [])]
        try:
            spec = make_ends(ExponentTuple(alpha, tuple(betas)), dim=e.get("dim"))[0]
        except ValueError as exc:
            raise ScenarioError(f"end {len(ends) + 1}: {exc}") from None
        ends.append({
            "alpha": _rational_text(alpha),
            "betas": [_rational_text(b) for b in betas],
            "dim": spec.dim,
            "scale": float(e.get("scale", 1.0)),
        })
    s["ends"] = ends
    d = s["discretization"]
    if d["delta"] > d["r0"] / 4:
        raise ScenarioError("discretization.delta must not exceed r0/4")
    if d["R_max"] < 100 * d["r0"]:
        raise ScenarioError("discretization.R_max must be at least 100 r0")
    q = s["sweep"]["quantity"]
    pts = s["sweep"]["points"]
    if "values" in pts:
        grid = [float(v) for v in pts["values"]]
        pts = {"values": grid}
    else:
        start = pts.get("start", 1.0 if q == "heat" else 100 * d["r0"])
        stop = pts.get("stop", d["R_max"] ** 2 if q == "heat" else d["R_max"])
        pts = {"start": float(start), "stop": float(stop), "per_decade": int(pts.get("per_decade", 4))}
        grid = _grid(pts)
    s["sweep"]["points"] = pts
    if not grid:
        raise ScenarioError("empty sweep grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ScenarioError("sweep grid must be strictly increasing")
    if q != "heat" and grid[-1] > d["R_max"] * (1 + 1e-12):
        raise ScenarioError("sweep radii exceed R_max")
    f = s["fit"]
    if f["window"] is None:
        f["window"] = [grid[-1] / 100, grid[-1]]
    lo, hi = f["window"]
    if not (lo < hi and lo >= grid[0] * (1 - 1e-12) and hi <= grid[-1] * (1 + 1e-12)):
        raise ScenarioError(f"fit window {f['window']} must lie inside the sweep range [{grid[0]:g}, {grid[-1]:g}]")
    w = s["whitney"]
    w["eta"], w["kappa"] = float(w["eta"]), float(w["kappa"])
    return s


def _grid(pts: dict) -> list[float]:
    if "values" in pts:
        return [float(v) for v in pts["values"]]
    start, stop, k = pts["start"], pts["stop"], pts["per_decade"]
    if stop < start:
        return []
    n = int(round(math.log10(stop / start) * k)) + 1
    g = np.geomspace(start, stop, n) if n > 1 else np.array([start])
    return [float(x) for x in g]


def config_hash(resolved: dict) -> str:
    text = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class Scenario:
    data: dict
    source: str | None = None

    @property
    def ends(self) -> list[EndSpec]:
        return [
            EndSpec(i + 1, e["dim"], ExponentTuple(as_rational(str(e["alpha"])), tuple(as_rational(str(b)) for b in e["betas"])))
            for i, e in enumerate(self.data["ends"])
        ]

    def profiles(self) -> list[VolumeProfile]:
        rs = self.data["discretization"]["r_splice"]
        return [
            VolumeProfile(as_rational(str(e["alpha"])), [as_rational(str(b)) for b in e["betas"]], e["dim"], e["scale"], rs)
            for e in self.data["ends"]
        ]

    @property
    def quantity(self) -> str:
        return self.data["sweep"]["quantity"]

    def grid(self) -> list[float]:
        return _grid(self.data["sweep"]["points"])

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    def with_overrides(self, quantity=None, delta=None, rmax=None) -> "Scenario":
        raw = copy.deepcopy(self.data)
        if quantity is not None and quantity != raw["sweep"]["quantity"]:
            raw["sweep"] = {"quantity": quantity, "points": {"per_decade": raw["sweep"]["points"].get("per_decade", 4)}}
            raw["fit"]["window"] = None
        if delta is not None:
            raw["discretization"]["delta"] = float(delta)
        if rmax is not None:
            raw["discretization"]["R_max"] = float(rmax)
            if "values" not in raw["sweep"]["points"]:
                raw["sweep"]["points"] = {"per_decade": raw["sweep"]["points"].get("per_decade", 4)}
                raw["fit"]["window"] = None
        return Scenario(resolve(raw), self.source)


def load_scenario(path_or_dict) -> Scenario:
    if isinstance(path_or_dict, dict):
        return Scenario(resolve(path_or_dict))
    path = Path(path_or_dict)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return Scenario(resolve(raw), str(path))
