"""Whitney coverings of central balls on the radial star metric.

On each ray the balls are packed tangentially: ball p has centre ``x_p`` and
radius ``s_p = eta (r - x_p) / (1 + eta)``, i.e. its radius is exactly eta times
its distance to the complement of ``B(o, r)``.  The first ball touches
``B_0 = B(o, 12 kappa eta r)`` and ``s_{p+1} = s_p / (1 + 2 eta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import CENTER, WeightedGraph, radial_ball
from .spectral import couple_poincare

__all__ = [
    "WhitneyParams",
    "WBall",
    "WhitneyCovering",
    "WhitneyReport",
    "CombinedBound",
    "build_whitney",
    "verify_covering",
    "overlap_bound",
    "combined_upper_bound",
    "dump_covering",
]

_TOL = 1e-9


@dataclass(frozen=True)
class WhitneyParams:
    eta: float
    kappa: float = 1.0

    def __post_init__(self):
        eta, kappa = float(self.eta), float(self.kappa)
        if not kappa >= 1:
            raise ValueError("kappa must be at least 1")
        if not 0 < eta < 1 / 20:
            raise ValueError(f"eta must lie in (0, 1/20), got {eta}")
        if not eta < 1 / (kappa * (36 * kappa + 6)):
            raise ValueError(f"eta={eta} violates eta < 1/(kappa (36 kappa + 6)) for kappa={kappa}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "kappa", kappa)


@dataclass(frozen=True)
class WBall:
    end: int
    center: float
    radius: float
    index: int  # position on its ray, 1-based; the string is B0, ball 1, ..., ball index


@dataclass(frozen=True)
class WhitneyCovering:
    r: float
    params: WhitneyParams
    n_ends: int
    b0: float
    b1: float
    balls: tuple[WBall, ...]
    resolution: float

    def ray(self, i: int) -> list[WBall]:
        return sorted((b for b in self.balls if b.end == i), key=lambda b: b.index)

    def string(self, ball: WBall) -> list[WBall]:
        return [b for b in self.ray(ball.end) if b.index <= ball.index]

    def with_radius(self, k: int, radius: float) -> "WhitneyCovering":
        balls = list(self.balls)
        balls[k] = replace(balls[k], radius=radius)
        return replace(self, balls=tuple(balls))


def build_whitney(r: float, params: WhitneyParams, ends: int, center_radius: float = 0.0,
                  resolution: float | None = None) -> WhitneyCovering:
    """Tangent-packed covering of ``B(o, r)`` on ``ends`` rays.

    Balls are added until ``3F`` reaches ``r - resolution``.
    """
    if ends < 1:
        raise ValueError("need at least one ray")
    eta, kappa = params.eta, params.kappa
    b0 = 12 * kappa * eta * r
    b1 = (36 * kappa + 6) * eta * r
    if resolution is None:
        resolution = 1e-6 * r
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if b0 <= center_radius + resolution:
        raise ValueError(f"r={r:g} too small: B0 radius {b0:g} does not clear the centre")
    x = (b0 * (1 + eta) + eta * r) / (1 + 2 * eta)
    s = eta * (r - x) / (1 + eta)
    ray = []
    p = 1
    while True:
        ray.append((x, s, p))
        if x + 3 * s >= r - resolution:
            break
        s_next = s / (1 + 2 * eta)
        x, s, p = x + s + s_next, s_next, p + 1
    balls = tuple(WBall(i, x, s, p) for i in range(ends) for (x, s, p) in ray)
    return WhitneyCovering(float(r), params, ends, b0, b1, balls, float(resolution))


def overlap_bound(eta: float, alpha: float) -> float:
    """Upper bound on how many dilates ``alpha F`` can share a point on one ray."""
    a = alpha * eta / (1 + eta)
    if a >= 1:
        return math.inf
    return math.floor(math.log((1 + a) / (1 - a)) / math.log1p(2 * eta) + _TOL) + 1


@dataclass
class WhitneyReport:
    passed: bool
    checks: dict = field(default_factory=dict)
    first_failure: str | None = None
    max_overlap: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


def _max_depth(intervals) -> int:
    """Largest number of closed intervals sharing a point."""
    ev = [(lo, 0) for lo, hi in intervals] + [(hi, 1) for lo, hi in intervals]
    ev.sort()
    depth = best = 0
    for _, kind in ev:
        depth += 1 if kind == 0 else -1
        best = max(best, depth)
    return best


def _dilated_intervals(c: WhitneyCovering, alpha: float):
    """Per ray, the pieces of each ``alpha F`` (a ball reaching past o spills onto every ray)."""
    per_ray = [[] for _ in range(c.n_ends)]
    for b in c.balls:
        reach = alpha * b.radius
        per_ray[b.end].append((max(b.center - reach, 0.0), b.center + reach))
        if reach > b.center:
            for j in range(c.n_ends):
                if j != b.end:
                    per_ray[j].append((0.0, reach - b.center))
    return per_ray


def verify_covering(c: WhitneyCovering) -> WhitneyReport:
    """Check the covering axioms, the string properties and the inclusion lemmas."""
    eta, kappa, r = c.params.eta, c.params.kappa, c.r
    tol = _TOL * r
    rep = WhitneyReport(True)

    def record(name, ok, detail=""):
        prev = rep.checks.get(name, True)
        rep.checks[name] = prev and bool(ok)
        if not ok and rep.first_failure is None:
            rep.first_failure = f"{name}: {detail}"
            rep.passed = False

    for name in ("W1", "W2", "W3", "W4", "PW1", "PW2", "Fj", "lemB0", "lem3B0", "lemF1", "inc1", "inc2"):
        rep.checks[name] = True

    record("inc1", 3 * kappa * c.b0 <= kappa * c.b1 + tol and kappa * c.b1 <= r + tol,
           f"3k b0={3 * kappa * c.b0:g}, k b1={kappa * c.b1:g}, r={r:g}")

    for i in range(c.n_ends):
        ray = sorted((b for b in c.balls if b.end == i), key=lambda b: b.center)
        for b in ray:
            # W3: radius equals eta times the distance to the complement of B(o, r)
            target = eta * (r - b.center - b.radius)
            record("W3", abs(b.radius - target) <= 1e-9 * target + 1e-13 * r,
                   f"ball end={i} x={b.center:g}: r(F)={b.radius:g}, eta d={target:g}")
            # open balls must not overlap each other or B0
            record("W1", b.center - b.radius >= c.b0 - tol, f"ball end={i} x={b.center:g} meets B0")
        for a, b in zip(ray, ray[1:]):
            record("W1", a.center + a.radius <= b.center - b.radius + tol,
                   f"balls at x={a.center:g} and x={b.center:g} overlap on ray {i}")

        # W2: 3F together with 3B0 cover [0, r - resolution]
        covered = 3 * c.b0
        for lo, hi in sorted((b.center - 3 * b.radius, b.center + 3 * b.radius) for b in ray):
            if lo > covered + tol:
                break
            covered = max(covered, hi)
        record("W2", covered >= r - c.resolution - tol, f"ray {i} covered up to {covered:g} < {r - c.resolution:g}")

        # PW1 along the geodesic from o to each centre; 3F' meets it iff x' - 3 r(F') <= x
        if ray:
            xs = np.array([b.center for b in ray])
            ss = np.array([b.radius for b in ray])
            lefts = xs - 3 * ss
            order = np.argsort(lefts, kind="stable")
            prefix_min = np.minimum.accumulate(ss[order])
            k = np.searchsorted(lefts[order], xs + 1e-13 * r, side="right")
            worst = np.where(k > 0, prefix_min[np.maximum(k - 1, 0)], np.inf)
            bad = np.nonzero(worst < ss / (4 * eta + 1) * (1 - 1e-12))[0]
            record("PW1", len(bad) == 0,
                   f"ball at x={xs[bad[0]]:g} sees r(F')={worst[bad[0]]:g}" if len(bad) else "")
        for b in ray:
            disjoint_b0 = b.center - b.radius >= c.b0 - tol
            if disjoint_b0:
                record("lemB0", b.center - 12 * kappa * b.radius > 0, f"12 kappa F reaches o at x={b.center:g}")
            if b.center + 3 * b.radius > 3 * c.b0 + tol:
                record("lem3B0", disjoint_b0, f"3F not in 3B0 but F meets B0 at x={b.center:g}")
                record("inc2", b.center - 12 * kappa * b.radius > 0 and b.center + 12 * kappa * b.radius <= r + tol,
                       f"12 kappa F leaves B(o,r) cap E_{i} at x={b.center:g}")
            if b.center - 3 * b.radius <= 3 * c.b0 + tol:
                record("lemF1", b.center + 3 * b.radius <= c.b1 + tol, f"3F not inside B1 at x={b.center:g}")

        # strings: B0, F_1, ..., F; successive pairs
        q_lo, q_hi = 1 / eta - 4, 1 / eta + 4
        prev_x, prev_s = 0.0, c.b0
        for j, b in enumerate(sorted(ray, key=lambda b: b.index)):
            if j > 0:
                record("PW2", q_lo * prev_s <= q_hi * b.radius * (1 + 1e-12) and q_lo * b.radius <= q_hi * prev_s * (1 + 1e-12),
                       f"radius ratio {b.radius / prev_s:g} outside PW2 bounds at x={b.center:g}")
            record("Fj", b.center + 3 * b.radius <= prev_x + 12 * prev_s + tol
                   and b.center - 3 * b.radius >= prev_x - 12 * prev_s - tol,
                   f"3F_(j+1) not inside 12F_j at x={b.center:g}")
            prev_x, prev_s = b.center, b.radius

    for alpha in (1.0, 3.0, 12.0 * kappa):
        worst = max((_max_depth(iv) for iv in _dilated_intervals(c, alpha)), default=0)
        rep.max_overlap[alpha] = worst
        bound = overlap_bound(eta, alpha)
        record("W4", worst <= bound, f"{worst} dilates {alpha:g}F share a point (bound {bound})")
    return rep


@dataclass
class CombinedBound:
    value: float
    center_term: float
    b1_term: float
    ball_term: float
    worst_ball: WBall | None


def combined_upper_bound(G: WeightedGraph, c: WhitneyCovering) -> CombinedBound:
    """``Lambda(3B0, 3k B0) + Lambda(B1, k B1) + max_F max(Lambda(3F, 3k F), Lambda(12F, 12k F))``.

    The unknown multiplicative constant is not applied.
    """
    k = c.params.kappa

    def lam(i, x, s_in, s_out):
        U = radial_ball(G, i, x, s_in)
        if len(U) < 2:
            return 0.0
        return couple_poincare(G, U, radial_ball(G, i, x, s_out)).value

    t0 = lam(CENTER, 0.0, 3 * c.b0, 3 * k * c.b0)
    t1 = lam(CENTER, 0.0, c.b1, k * c.b1)
    worst, worst_ball = 0.0, None
    for b in c.balls:
        if b.center + 3 * b.radius <= 3 * c.b0:
            continue  # not in W'
        v = max(lam(b.end, b.center, 3 * b.radius, 3 * k * b.radius),
                lam(b.end, b.center, 12 * b.radius, 12 * k * b.radius))
        if v > worst:
            worst, worst_ball = v, b
    return CombinedBound(t0 + t1 + worst, t0, t1, worst, worst_ball)


def dump_covering(c: WhitneyCovering, stream) -> None:
    """One line per ball: ``F <end> <center> <radius> <string-length>``."""
    for b in c.balls:
        stream.write(f"F {b.end} {b.center:.17g} {b.radius:.17g} {b.index + 1}\n")
