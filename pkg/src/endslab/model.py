"""Concrete volume profiles of model manifolds and the functions built on them.

A profile is Euclidean, ``V(r) = V(r_s) (r / r_s)^N``, below the splice radius
``r_s`` and follows the log-polynomial tail ``c r^alpha prod log_[j]^beta_j``
above it.  Volumes are normalised so that the inner branch has ``psi(r) = r``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .asym import ExponentTuple, GrowthLaw

__all__ = [
    "VolumeProfile",
    "ModelReport",
    "EnvelopeInputs",
    "psi_from_V",
    "validate_model_conditions",
    "h_num",
    "envelope_HD",
    "offdiag_envelope",
    "ball_volume",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_CELLS_PER_DECADE = 64


def _tower(depth: int) -> float:
    """Smallest r with every ``log_[j] r >= 1`` for j <= depth."""
    r = 1.0
    for _ in range(depth):
        r = math.exp(r)
    return r


def _iter_logs(r: np.ndarray, depth: int) -> list[np.ndarray]:
    logs, level = [], r
    for _ in range(depth):
        level = np.log(level)
        logs.append(level)
    return logs


def _tail_slope(alpha: float, betas: Sequence[float], r: np.ndarray) -> np.ndarray:
    """``d log V / d log r`` of the tail law."""
    out = np.full(np.shape(r), alpha, dtype=float)
    prod = np.ones(np.shape(r))
    for b, lj in zip(betas, _iter_logs(np.asarray(r, float), len(betas))):
        prod = prod * lj
        out = out + b / prod
    return out


class VolumeProfile:
    """Positive increasing volume function with a Euclidean core.

    ``VolumeProfile(alpha, betas, dim, scale=1, r_splice=None)``.  Without an
    explicit ``r_splice`` the smallest radius is used where all iterated logs of
    the tail are at least 1 and the tail is increasing from there on.
    """

    def __init__(self, alpha, betas=(), dim: int | None = None, scale: float = 1.0, r_splice: float | None = None):
        self.law = ExponentTuple(alpha, tuple(betas))
        alpha_q = self.law.alpha
        if alpha_q <= 0:
            raise ValueError(f"alpha must be positive, got {alpha_q}")
        if dim is None:
            dim = max(2, math.ceil(alpha_q))
        if dim < 2:
            raise ValueError("dimension N must be at least 2")
        if not (scale > 0 and math.isfinite(scale)):
            raise ValueError("scale must be positive and finite")
        self.dim = int(dim)
        self.scale = float(scale)
        self.alpha = float(alpha_q)
        self.betas = tuple(float(b) for b in GrowthLaw(alpha_q, self.law.betas).betas)

        floor = max(1.0, _tower(len(self.betas)))
        if r_splice is None:
            rs = floor
            while not self._increasing_from(rs):
                rs *= 2.0
                if rs > 1e300:
                    raise ValueError("tail is never increasing")
        else:
            rs = float(r_splice)
            if rs < floor:
                raise ValueError(f"r_splice must be at least {floor:g} so that all iterated logs are >= 1")
            if not self._increasing_from(rs):
                raise ValueError(f"profile is not monotone above r_splice={rs:g}")
        self.r_splice = rs
        self._log_vs = self._tail_logv(np.array([rs]))[0]
        self.v_splice = math.exp(self._log_vs)
        self.omega = self.dim * self.v_splice / rs**self.dim
        self._h_lock = threading.Lock()
        self._h_nodes = np.array([0.0])  # log r
        self._h_cum = np.array([0.0])

    def __repr__(self):
        return (
            f"VolumeProfile(alpha={self.alpha:g}, betas={list(self.betas)}, dim={self.dim}, "
            f"scale={self.scale:g}, r_splice={self.r_splice:g})"
        )

    def _increasing_from(self, rs: float) -> bool:
        r = np.geomspace(rs, max(rs, 1.0) * 1e12, 2000)
        return bool(np.all(_tail_slope(self.alpha, self.betas, r) > 0))

    def _tail_logv(self, r: np.ndarray) -> np.ndarray:
        out = math.log(self.scale) + self.alpha * np.log(r)
        for b, lj in zip(self.betas, _iter_logs(r, len(self.betas))):
            if b:
                out = out + b * np.log(lj)
        return out

    def log_V(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = self._log_vs + self.dim * np.log(np.where(r > 0, r, 1.0) / self.r_splice)
            tail = self._tail_logv(np.maximum(r, self.r_splice))
        out = np.where(r < self.r_splice, inner, tail)
        return np.where(r > 0, out, -np.inf)

    def V(self, r):
        out = np.exp(self.log_V(r))
        return out if out.ndim else float(out)

    __call__ = V

    def local_exponent(self, r):
        """``r V'(r) / V(r)``."""
        r = np.asarray(r, dtype=float)
        out = np.where(r < self.r_splice, float(self.dim), _tail_slope(self.alpha, self.betas, np.maximum(r, self.r_splice)))
        return out if out.ndim else float(out)

    def dV(self, r):
        r = np.asarray(r, dtype=float)
        out = self.local_exponent(r) * np.asarray(self.V(r)) / np.where(r > 0, r, 1.0)
        out = np.where(r > 0, out, 0.0)
        return out if out.ndim else float(out)

    def diff(self, a, b):
        """``V(b) - V(a)`` to full relative precision, elementwise, for 0 <= a <= b."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a, b = np.broadcast_arrays(a, b)
        if np.any(b < a):
            raise ValueError("diff expects a <= b")
        rs = self.r_splice
        out = np.empty(a.shape)
        zero = a <= 0
        out[zero] = np.asarray(self.V(b[zero]))
        m = ~zero
        lo, hi = a[m], b[m]
        mid = np.clip(rs, lo, hi)
        # split at the splice so each piece stays on one analytic branch
        left = np.where(mid > lo, np.asarray(self.V(lo)) * np.expm1(self._piece(lo, mid, inner=True)), 0.0)
        right = np.where(hi > mid, np.asarray(self.V(mid)) * np.expm1(self._piece(mid, hi, inner=False)), 0.0)
        out[m] = left + right
        return out if out.ndim else float(out)

    def _piece(self, a, b, inner: bool):
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.log1p((b - a) / a)
            if inner:
                return np.where(b > a, self.dim * step, 0.0)
            out = self.alpha * step
            la, lb, dl = a, b, step
            for beta in self.betas:
                la = np.log(la)
                dl = np.log1p(dl / la)
                if beta:
                    out = out + beta * dl
            return np.where(b > a, out, 0.0)

    # --- h(r) = 1 + (int_1^r s / V(s) ds)_+ on a memoised log grid -------------

    def _h_integrand(self, u: np.ndarray) -> np.ndarray:
        # s / V(s) ds with s = e^u: e^{2u} / V(e^u) du
        return np.exp(2.0 * u - self.log_V(np.exp(u)))

    def _extend_h(self, u_max: float):
        with self._h_lock:
            nodes = self._h_nodes
            if nodes[-1] >= u_max:
                return
            width = math.log(10.0) / _CELLS_PER_DECADE
            n_new = int(math.ceil((u_max - nodes[-1]) / width)) + 1
            n_new = max(n_new, int(math.ceil(nodes[-1] / width)) + 1)  # at least double the range
            new = nodes[-1] + width * np.arange(1, n_new + 1)
            us = math.log(self.r_splice)
            if nodes[-1] < us < new[-1] and not np.any(np.isclose(new, us, rtol=0, atol=1e-12)):
                new = np.sort(np.append(new, us))
            left = np.concatenate(([nodes[-1]], new[:-1]))
            inc = self._gl(left, new)
            cum = self._h_cum[-1] + np.cumsum(inc)
            self._h_nodes = np.concatenate((nodes, new))
            self._h_cum = np.concatenate((self._h_cum, cum))

    def _gl(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        pts = mid[:, None] + half[:, None] * _GL_X[None, :]
        return half * (self._h_integrand(pts) @ _GL_W)

    def h(self, r):
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r).ravel()
        out = np.ones(flat.shape)
        big = flat > 1.0
        if np.any(big):
            u = np.log(flat[big])
            self._extend_h(float(u.max()))
            nodes, cum = self._h_nodes, self._h_cum
            k = np.clip(np.searchsorted(nodes, u, side="right") - 1, 0, len(nodes) - 1)
            out[big] = 1.0 + cum[k] + self._gl(nodes[k], u)
        out = out.reshape(r.shape)
        return out if out.ndim else float(out)

    def integral_s_over_V(self, a, b):
        """``int_a^b s / V(s) ds`` for 1 <= a <= b."""
        return np.asarray(self.h(b)) - np.asarray(self.h(a))


def psi_from_V(p: VolumeProfile, r):
    """Radius function ``psi`` with ``V' = omega psi^(N-1)``; equals r on the core."""
    if p.dim < 2:
        raise ValueError("N = 1 is not a model manifold")
    return (np.asarray(p.dV(r)) / p.omega) ** (1.0 / (p.dim - 1))


def h_num(p: VolumeProfile, r):
    return p.h(r)


@dataclass
class ModelReport:
    passed: bool
    max_v_over_rN: float
    min_local_exponent: float
    max_local_exponent: float
    terminal_excess: float
    reasons: list[str] = field(default_factory=list)


def validate_model_conditions(p: VolumeProfile, r_max: float, samples: int = 400) -> ModelReport:
    """Desk-scale check of ``V <= C r^N`` and ``V ~ r V'``.

    ``V(r)/r^N`` is measured against the Euclidean continuation of the core, so
    it equals 1 at the splice.  Besides the bounds, the local exponent at
    ``r_max`` must not exceed N: a ratio still growing at the end of the range
    is treated as unbounded.
    """
    if r_max <= 10 * p.r_splice:
        raise ValueError("r_max must exceed 10 r_splice")
    r = np.geomspace(p.r_splice, r_max, samples)
    v = np.asarray(p.V(r))
    if np.any(np.diff(v) <= 0) or np.any(np.asarray(p.dV(r)) <= 0):
        raise ValueError("profile is not monotone")
    ratio = np.exp(np.asarray(p.log_V(r)) - p._log_vs - p.dim * np.log(r / p.r_splice))
    k = np.asarray(p.local_exponent(r))
    excess = float(k[-1] - p.dim)
    reasons = []
    if k.min() < 1 / 20 or k.max() > 20:
        reasons.append(f"r V'/V leaves [1/20, 20]: [{k.min():.3g}, {k.max():.3g}]")
    if ratio.max() > 100:
        reasons.append(f"V/r^N reaches {ratio.max():.3g} > 100")
    if excess > 1e-12:
        reasons.append(f"V/r^N still growing at r_max (local exponent exceeds N by {excess:.3g})")
    return ModelReport(not reasons, float(ratio.max()), float(k.min()), float(k.max()), excess, reasons)


def ball_volume(profiles: Sequence[VolumeProfile], i: int, x: float, s: float) -> float:
    """Volume of the radial-metric ball of radius s about the point at radius x on end i."""
    out = profiles[i].V(x + s) - (profiles[i].V(x - s) if x > s else 0.0)
    if s > x:
        out += sum(q.V(s - x) for j, q in enumerate(profiles) if j != i)
    return float(out)


class EnvelopeInputs:
    """Per-end profiles together with a sampled centre trace ``p(t, o, o)``."""

    def __init__(self, profiles: Sequence[VolumeProfile], times=None, p_center=None):
        self.profiles = list(profiles)
        if times is None:
            self.times = self.values = None
            self._cum = None
            return
        t = np.asarray(times, dtype=float)
        p = np.asarray(p_center, dtype=float)
        if t.shape != p.shape or t.ndim != 1 or len(t) < 2:
            raise ValueError("times and p_center must be matching 1-d arrays")
        if np.any(np.diff(t) <= 0) or np.any(t <= 0) or np.any(p <= 0):
            raise ValueError("need increasing positive times and positive values")
        self.times, self.values = t, p
        lt = np.log(t)
        f = p * t  # p dt = p t dlog t
        self._cum = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(lt))))

    def _need(self, t):
        if self.times is None:
            raise ValueError("missing centre-trace data")
        t = np.asarray(t, dtype=float)
        lo, hi = self.times[0], self.times[-1]
        if np.any(t < lo * (1 - 1e-12)) or np.any(t > hi * (1 + 1e-12)):
            raise ValueError(f"centre trace covers [{lo:g}, {hi:g}] only")
        return np.clip(t, lo, hi)

    def p(self, t):
        t = self._need(t)
        return np.exp(np.interp(np.log(t), np.log(self.times), np.log(self.values)))

    def integral(self, a, b):
        """``int_a^b p(s, o, o) ds`` (trapezoid in log s, interpolated inside cells)."""
        a, b = self._need(a), self._need(b)
        return self._cum_at(b) - self._cum_at(a)

    def _cum_at(self, t):
        lt = np.log(self.times)
        u = np.log(t)
        k = np.clip(np.searchsorted(lt, u, side="right") - 1, 0, len(lt) - 2)
        f = self.values * self.times
        fu = np.exp(np.interp(u, lt, np.log(f)))
        return self._cum[k] + 0.5 * (f[k] + fu) * (u - lt[k])


def envelope_HD(inputs: EnvelopeInputs, i: int, r: float, t: float) -> tuple[float, float]:
    p = inputs.profiles[i]
    hr, ht = float(p.h(r)), float(p.h(math.sqrt(t)))
    H = r * r / (float(p.V(r)) * hr) + max(ht - hr, 0.0) / ht
    D = hr / (hr + ht)
    return H, D


def offdiag_envelope(inputs: EnvelopeInputs, i: int, j: int, x_r: float, y_r: float, t: float) -> float:
    """Three-term two-sided heat kernel envelope with unit constants.

    Distance is the tree metric of the radial star: ``x + y`` across ends and
    ``|x - y|`` along one end.
    """
    if x_r < 3 or y_r < 3 or t < 1:
        raise ValueError("need x_r, y_r >= 3 and t >= 1")
    sq = math.sqrt(t)
    Hi, Di = envelope_HD(inputs, i, x_r, t)
    Hj, Dj = envelope_HD(inputs, j, y_r, t)
    gauss = math.exp(-(x_r**2 + y_r**2) / t)
    term1 = 0.0
    if i == j:
        d = abs(x_r - y_r)
        term1 = Di * Dj * math.exp(-d * d / t) / ball_volume(inputs.profiles, i, x_r, sq)
    term2 = float(inputs.p(t)) * Hi * Hj * gauss
    pi, pj = inputs.profiles[i], inputs.profiles[j]
    vhi = float(pi.V(sq)) * float(pi.h(sq))
    vhj = float(pj.V(sq)) * float(pj.h(sq))
    term3 = float(inputs.integral(1.0, t)) * (Di * Hj / vhi + Dj * Hi / vhj) * gauss
    return term1 + term2 + term3
