"""Least-squares exponent fits ``log y = a log x + b log log x + c`` and verdicts."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..asym import ConjectureOnly, GrowthLaw

__all__ = ["FitResult", "FitError", "fit_exponents", "compare_fit", "read_table", "write_table", "deep_log_offset"]


class FitError(ValueError):
    pass


@dataclass
class FitResult:
    a: float
    b: float
    c: float
    rms: float
    cov_diag: list[float]
    n_points: int
    use_loglog: bool
    window: list[float] = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def fit_exponents(x, y, use_loglog: bool = False, window=None) -> FitResult:
    """Ordinary least squares on the points with ``window[0] <= x <= window[1]``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise FitError("x and y differ in length")
    keep = np.isfinite(x) & np.isfinite(y)
    if window is not None:
        lo, hi = window
        keep &= (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12))
    x, y = x[keep], y[keep]
    if len(x) < 4:
        raise FitError(f"need at least 4 points in the fit window, have {len(x)}")
    if np.any(y <= 0) or np.any(x <= 0):
        raise FitError("values and abscissae must be positive")
    lx = np.log(x)
    cols = [lx]
    if use_loglog:
        if np.any(lx <= 0):
            raise FitError("log log x needs x > 1 throughout the window")
        cols.append(np.log(lx))
    cols.append(np.ones_like(lx))
    X = np.column_stack(cols)
    if np.linalg.matrix_rank(X) < X.shape[1] or np.linalg.cond(X) > 1e10:
        raise FitError(
            "design matrix is singular; widen the window or disable the log log term "
            "(log x and log log x are nearly collinear over short ranges)"
        )
    coef, *_ = np.linalg.lstsq(X, np.log(y), rcond=None)
    resid = np.log(y) - X @ coef
    dof = max(len(x) - X.shape[1], 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    a = float(coef[0])
    b = float(coef[1]) if use_loglog else 0.0
    c = float(coef[-1])
    # -0.0 and 0.0 must serialise identically
    a, b, c = (v + 0.0 for v in (a, b, c))
    rms = math.sqrt(float(resid @ resid) / len(x))
    return FitResult(a, b, c, rms, [float(v) for v in np.diag(cov)], int(len(x)), bool(use_loglog),
                     [float(x.min()), float(x.max())])


def deep_log_offset(law: GrowthLaw, x) -> np.ndarray:
    """Value of the predicted factors ``prod_{j>=2} log_[j]^beta_j``, which the fit model cannot represent."""
    deep = GrowthLaw(0, (0,) + tuple(law.betas[1:]), law.var) if law.depth > 1 else GrowthLaw.one(law.var)
    return np.asarray(deep.evaluate(np.asarray(x, dtype=float)), dtype=float)


def compare_fit(prediction, fit: FitResult, tol_a: float, tol_b: float) -> dict:
    """Verdict PASS iff the fitted exponents sit within tolerance of the prediction."""
    if prediction is None:
        return {"verdict": "SKIPPED", "reason": "no prediction"}
    basis = "theorem"
    law = prediction
    if isinstance(prediction, ConjectureOnly):
        basis, law = "conjecture", prediction.law
    a_pred, b_pred = law.log_exponents()
    ok_a = abs(fit.a - a_pred) <= tol_a
    ok_b = True
    if fit.use_loglog:
        ok_b = abs(fit.b - b_pred) <= tol_b
    elif b_pred != 0:
        ok_b = False
    return {
        "verdict": "PASS" if ok_a and ok_b else "FAIL",
        "basis": basis,
        "prediction": law.text(),
        "a_pred": a_pred,
        "b_pred": b_pred,
        "delta_a": fit.a - a_pred,
        "delta_b": (fit.b - b_pred) if fit.use_loglog else None,
        "tol_a": tol_a,
        "tol_b": tol_b,
    }


def write_table(path, rows) -> None:
    """CSV with header ``abscissa,value,stderr_estimate``; rows sorted by abscissa."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["abscissa", "value", "stderr_estimate"])
        for x, v, e in sorted(rows, key=lambda r: r[0]):
            w.writerow([repr(float(x)), repr(float(v)), repr(float(e))])


def read_table(path):
    xs, ys = [], []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames is None or not {"abscissa", "value"} <= set(rd.fieldnames):
            raise FitError("CSV needs columns abscissa,value")
        for row in rd:
            xs.append(float(row["abscissa"]))
            ys.append(float(row["value"]))
    return np.array(xs), np.array(ys)
