"""Exact algebra of log-polynomial growth classes.

A growth class ``x^alpha * prod_j (log_[j] x)^beta_j`` is stored as exact
rationals.  Multiplicative constants are dropped; two classes over the same
variable compare by eventual domination, which for this family is the
lexicographic order on ``(alpha, beta_1, beta_2, ...)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

__all__ = [
    "ExponentTuple",
    "GrowthLaw",
    "EndSpec",
    "CoeParams",
    "CoeCertificate",
    "Violation",
    "EndOrdering",
    "ConjectureOnly",
    "Unsupported",
    "as_rational",
    "lex_cmp",
    "growth_mul",
    "h_sym",
    "vh_sym",
    "vtilde_sym",
    "is_parabolic",
    "is_subcritical",
    "is_regular",
    "classify_coe",
    "check_doe",
    "end_ordering",
    "predict_poincare",
    "predict_heat_center",
    "heat_conjecture",
    "make_ends",
    "PARAM_GRID",
]

#: rational grid searched for (COE) / regularity parameters
PARAM_GRID = tuple(Fraction(k, 8) for k in range(1, 16))


def as_rational(x) -> Fraction:
    """Exact rational from int, Fraction, str or float (floats read as decimals)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"exponent must be finite, got {x}")
        return Fraction(repr(x))
    return Fraction(x)


def _strip(betas: Sequence[Fraction]) -> tuple[Fraction, ...]:
    betas = list(betas)
    while betas and betas[-1] == 0:
        betas.pop()
    return tuple(betas)


def _pad(betas: Sequence[Fraction], n: int, fill=Fraction(0)) -> tuple[Fraction, ...]:
    return tuple(betas) + (fill,) * (n - len(betas))


class _Exponents:
    """Shared behaviour of exponent carriers: padded lexicographic comparison."""

    alpha: Fraction
    betas: tuple[Fraction, ...]

    @property
    def depth(self) -> int:
        return len(self.betas)

    def key(self) -> tuple[Fraction, ...]:
        return (self.alpha,) + _strip(self.betas)

    def beta(self, j: int) -> Fraction:
        """Exponent of ``log_[j]`` (1-based); zero beyond the stored depth."""
        return self.betas[j - 1] if 1 <= j <= len(self.betas) else Fraction(0)


@dataclass(frozen=True, eq=False)
class ExponentTuple(_Exponents):
    """Exponents ``(alpha, beta(1..J))`` of a volume function."""

    alpha: Fraction
    betas: tuple[Fraction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_rational(self.alpha))
        object.__setattr__(self, "betas", tuple(as_rational(b) for b in self.betas))

    def __eq__(self, other):
        if not isinstance(other, _Exponents):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"ExponentTuple({_fmt(self.alpha)}, [{', '.join(_fmt(b) for b in self.betas)}])"

    def law(self, var: str = "r") -> "GrowthLaw":
        return GrowthLaw(self.alpha, self.betas, var)


@dataclass(frozen=True, eq=False)
class GrowthLaw(_Exponents):
    """Asymptotic class ``var^alpha prod_j (log_[j] var)^beta_j``."""

    alpha: Fraction = Fraction(0)
    betas: tuple[Fraction, ...] = ()
    var: str = "r"

    def __post_init__(self):
        if self.var not in ("r", "t"):
            raise ValueError(f"variable tag must be 'r' or 't', got {self.var!r}")
        object.__setattr__(self, "alpha", as_rational(self.alpha))
        object.__setattr__(self, "betas", tuple(as_rational(b) for b in self.betas))

    @classmethod
    def one(cls, var: str = "r") -> "GrowthLaw":
        return cls(Fraction(0), (), var)

    def __eq__(self, other):
        if isinstance(other, GrowthLaw):
            return self.var == other.var and self.key() == other.key()
        if isinstance(other, ExponentTuple):
            return self.key() == other.key()
        return NotImplemented

    def __hash__(self):
        return hash((self.var,) + self.key())

    def _check_var(self, other: "GrowthLaw"):
        if self.var != other.var:
            raise ValueError(f"variable mismatch: {self.var} vs {other.var}")

    def __mul__(self, other: "GrowthLaw") -> "GrowthLaw":
        self._check_var(other)
        n = max(self.depth, other.depth)
        a, b = _pad(self.betas, n), _pad(other.betas, n)
        return GrowthLaw(self.alpha + other.alpha, _strip(x + y for x, y in zip(a, b)), self.var)

    def __truediv__(self, other: "GrowthLaw") -> "GrowthLaw":
        return self * other.reciprocal()

    def __pow__(self, k) -> "GrowthLaw":
        k = as_rational(k)
        return GrowthLaw(self.alpha * k, _strip(b * k for b in self.betas), self.var)

    def reciprocal(self) -> "GrowthLaw":
        return self ** -1

    def __lt__(self, other):
        self._check_var(other)
        return lex_cmp(self, other) < 0

    def __le__(self, other):
        self._check_var(other)
        return lex_cmp(self, other) <= 0

    def __gt__(self, other):
        self._check_var(other)
        return lex_cmp(self, other) > 0

    def __ge__(self, other):
        self._check_var(other)
        return lex_cmp(self, other) >= 0

    def at_sqrt(self) -> "GrowthLaw":
        """Substitute ``r = sqrt(t)``; ``log_[j] sqrt(t)`` is comparable to ``log_[j] t``."""
        if self.var != "r":
            raise ValueError("at_sqrt expects a law in r")
        return GrowthLaw(self.alpha / 2, self.betas, "t")

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Numeric value; each ``log_[j]`` is clamped below by 1."""
        import numpy as np

        x = np.asarray(x, dtype=float)
        out = np.power(x, float(self.alpha))
        level = x
        for b in self.betas:
            level = np.maximum(np.log(np.maximum(level, 1.0)), 1.0)
            if b:
                out = out * np.power(level, float(b))
        return out if out.ndim else float(out)

    def log_exponents(self) -> tuple[float, float]:
        """``(alpha, beta(1))`` as floats, i.e. the slope pair a log-log fit can resolve."""
        return float(self.alpha), float(self.beta(1))

    def __str__(self):
        return self.text()

    def __repr__(self):
        return f"GrowthLaw({self.text()})"

    def text(self) -> str:
        v = self.var
        parts = []
        if self.alpha:
            parts.append(v if self.alpha == 1 else f"{v}^{_fmt(self.alpha)}")
        for j, b in enumerate(self.betas, start=1):
            if not b:
                continue
            lg = f"log {v}" if j == 1 else f"log_[{j}] {v}"
            parts.append(f"({lg})" if b == 1 else f"({lg})^{_fmt(b)}")
        return " ".join(parts) if parts else "1"


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def lex_cmp(a: _Exponents, b: _Exponents) -> int:
    """-1, 0 or 1 comparing padded ``(alpha, betas)`` lexicographically."""
    n = max(a.depth, b.depth)
    ka = (a.alpha,) + _pad(a.betas, n)
    kb = (b.alpha,) + _pad(b.betas, n)
    return (ka > kb) - (ka < kb)


def growth_mul(u: GrowthLaw, v: GrowthLaw) -> GrowthLaw:
    return u * v


def _require_volume(V: _Exponents):
    if V.alpha <= 0:
        raise ValueError(f"volume exponent alpha must be positive, got {V.alpha}")


def is_parabolic(V: _Exponents) -> bool:
    """``(alpha, betas) <= (2, 1, ..., 1)`` with betas padded by zeros."""
    _require_volume(V)
    n = V.depth
    return lex_cmp(V, GrowthLaw(2, (Fraction(1),) * n)) <= 0


def is_subcritical(V: _Exponents) -> bool:
    _require_volume(V)
    return V.alpha < 2


def _critical_index(V: _Exponents) -> int:
    for j, b in enumerate(V.betas, start=1):
        if b < 1:
            return j
    return V.depth + 1


def h_sym(V: _Exponents) -> GrowthLaw:
    _require_volume(V)
    if not is_parabolic(V):
        return GrowthLaw.one()
    if V.alpha < 2:
        return GrowthLaw(2 - V.alpha, tuple(-b for b in V.betas))
    Ji = _critical_index(V)
    depth = max(V.depth, Ji)
    betas = [Fraction(0)] * depth
    for j in range(Ji, V.depth + 1):
        betas[j - 1] -= V.beta(j)
    betas[Ji - 1] += 1
    return GrowthLaw(0, _strip(betas))


def vh_sym(V: _Exponents) -> GrowthLaw:
    return V.law("r") * h_sym(V) if isinstance(V, ExponentTuple) else GrowthLaw(V.alpha, V.betas) * h_sym(V)


def vtilde_sym(V: _Exponents) -> GrowthLaw:
    h = h_sym(V)
    return GrowthLaw(V.alpha, V.betas) * h * h


def _dominates_power(V: _Exponents, power: Fraction) -> bool:
    """Eventually ``V >~ r^power``."""
    return lex_cmp(V, GrowthLaw(power)) >= 0


def _dominated_by_power(V: _Exponents, power: Fraction) -> bool:
    return lex_cmp(V, GrowthLaw(power)) <= 0


def is_regular(V: _Exponents, g1, g2) -> bool:
    """Two-sided power sandwich with exponents ``2 - g2`` and ``2 + g1``."""
    g1, g2 = as_rational(g1), as_rational(g2)
    if g1 <= 0 or g2 <= 0 or 2 * g1 + g2 >= 2:
        raise ValueError(f"need g1, g2 > 0 and 2*g1 + g2 < 2, got ({g1}, {g2})")
    _require_volume(V)
    lo, hi = 2 - g2, 2 + g1
    if lo < V.alpha < hi:
        return True
    rest = _strip(V.betas)
    zero = GrowthLaw(0)
    tail = GrowthLaw(0, rest)
    if V.alpha == lo:
        return lex_cmp(tail, zero) >= 0
    if V.alpha == hi:
        return lex_cmp(tail, zero) <= 0
    return False


def _regular_somewhere(V: _Exponents) -> bool:
    return any(is_regular(V, g1, g2) for g1, g2 in product(PARAM_GRID, PARAM_GRID) if 2 * g1 + g2 < 2)


@dataclass(frozen=True)
class EndSpec:
    """One end of a connected sum, described by its volume exponents."""

    id: int
    dim: int
    volume: ExponentTuple

    def __post_init__(self):
        if not isinstance(self.volume, ExponentTuple):
            object.__setattr__(self, "volume", ExponentTuple(*self.volume))
        if self.dim < 2:
            raise ValueError(f"dimension must be at least 2, got {self.dim}")
        _require_volume(self.volume)
        if lex_cmp(self.volume, GrowthLaw(self.dim)) > 0:
            raise ValueError(f"end {self.id}: {self.volume} exceeds (N, 0, ..., 0) with N={self.dim}")

    @property
    def label(self) -> str:
        a = self.volume.alpha
        return "super" if a > 2 else ("middle" if a == 2 else "sub")

    @property
    def parabolic(self) -> bool:
        return is_parabolic(self.volume)

    @property
    def subcritical(self) -> bool:
        return is_subcritical(self.volume)

    @property
    def regular(self) -> bool:
        return self.parabolic and _regular_somewhere(self.volume)


def make_ends(*tuples, dim: int | None = None) -> list[EndSpec]:
    """Build ends from ``(alpha, betas)`` pairs, ids 1..k.

    Without ``dim`` each end gets the smallest admissible dimension >= 2.
    """
    ends = []
    for i, t in enumerate(tuples, start=1):
        if isinstance(t, ExponentTuple):
            vol = t
        else:
            alpha, *rest = t
            vol = ExponentTuple(alpha, tuple(rest[0]) if rest else ())
        n = dim
        if n is None:
            n = max(2, math.ceil(vol.alpha))
            if lex_cmp(vol, GrowthLaw(n)) > 0:
                n += 1
        ends.append(EndSpec(i, n, vol))
    return ends


@dataclass(frozen=True)
class CoeParams:
    epsilon: Fraction
    delta: Fraction
    gamma1: Fraction
    gamma2: Fraction

    def __post_init__(self):
        for name in ("epsilon", "delta", "gamma1", "gamma2"):
            value = as_rational(getattr(self, name))
            if value <= 0:
                raise ValueError(f"{name} must be positive")
            object.__setattr__(self, name, value)
        e, d, g1, g2 = self.epsilon, self.delta, self.gamma1, self.gamma2
        if not (g1 < e and g1 + g2 < d < 2 and 2 * g1 + g2 < 2):
            raise ValueError(f"parameters violate g1 < eps, g1 + g2 < delta < 2, 2 g1 + g2 < 2: {self}")


@dataclass(frozen=True)
class CoeCertificate:
    params: CoeParams
    super: tuple[int, ...]
    middle: tuple[int, ...]
    sub: tuple[int, ...]


@dataclass(frozen=True)
class Violation:
    clause: str
    end_id: int | None
    reason: str

    def __bool__(self):
        return False


@dataclass(frozen=True)
class EndOrdering:
    m: int
    n: int
    crossover_note: float | None = None


@dataclass(frozen=True)
class ConjectureOnly:
    """A value that only an unproven conjecture supports."""

    law: GrowthLaw
    note: str = "unproven"


class Unsupported(Exception):
    """No theorem's hypotheses could be certified for these ends."""


def _partition(ends: Sequence[EndSpec]):
    sup = tuple(e.id for e in ends if e.volume.alpha > 2)
    mid = tuple(e.id for e in ends if e.volume.alpha == 2)
    sub = tuple(e.id for e in ends if e.volume.alpha < 2)
    return sup, mid, sub


def _clause_a(e: EndSpec, eps: Fraction) -> bool:
    return _dominates_power(e.volume, 2 + eps)


def _clause_b(e: EndSpec, delta: Fraction) -> bool:
    return e.subcritical and _dominated_by_power(e.volume, 2 - delta)


def _clause_c_order(middle: Sequence[EndSpec], all_parabolic: bool) -> Violation | None:
    for a in middle:
        for b in middle:
            if a.id == b.id or lex_cmp(a.volume, b.volume) < 0:
                continue
            if lex_cmp(vh_sym(a.volume), vh_sym(b.volume)) < 0:
                return Violation("c", a.id, f"V_{a.id} >= V_{b.id} but V h is not ordered the same way")
            if all_parabolic and lex_cmp(vtilde_sym(a.volume), vtilde_sym(b.volume)) > 0:
                return Violation("c", a.id, f"V_{a.id} >= V_{b.id} but V h^2 is not reversed")
    return None


def _check_coe(ends: Sequence[EndSpec], p: CoeParams) -> CoeCertificate | Violation:
    sup, mid, sub = _partition(ends)
    by_id = {e.id: e for e in ends}
    for i in sup:
        if not _clause_a(by_id[i], p.epsilon):
            return Violation("a", i, f"V_{i} is not >~ r^(2+{_fmt(p.epsilon)})")
    for i in sub:
        if not _clause_b(by_id[i], p.delta):
            return Violation("b", i, f"V_{i} is not subcritical with V <~ r^(2-{_fmt(p.delta)})")
    for i in mid:
        if not is_regular(by_id[i].volume, p.gamma1, p.gamma2):
            return Violation("c", i, f"V_{i} is not regular for ({_fmt(p.gamma1)}, {_fmt(p.gamma2)})")
    all_parabolic = all(e.parabolic for e in ends)
    bad = _clause_c_order([by_id[i] for i in mid], all_parabolic)
    if bad is not None:
        return bad
    return CoeCertificate(p, sup, mid, sub)


def classify_coe(ends: Sequence[EndSpec], params: CoeParams | None = None) -> CoeCertificate | Violation:
    """Certify critically ordered ends, or return the first violated clause.

    Without ``params`` the grid ``PARAM_GRID`` is searched; clauses (a), (b)
    and the regularity part of (c) each depend on a single parameter group,
    so the search is exact over the grid at the cost of its marginals.
    """
    if len(ends) < 2:
        raise ValueError("need at least two ends")
    if params is not None:
        return _check_coe(ends, params)

    sup, mid, sub = _partition(ends)
    by_id = {e.id: e for e in ends}
    ok_eps = [e for e in PARAM_GRID if all(_clause_a(by_id[i], e) for i in sup)]
    ok_delta = [d for d in PARAM_GRID if all(_clause_b(by_id[i], d) for i in sub)]
    ok_gamma = [
        (g1, g2)
        for g1, g2 in product(PARAM_GRID, PARAM_GRID)
        if 2 * g1 + g2 < 2 and all(is_regular(by_id[i].volume, g1, g2) for i in mid)
    ]
    for g1, g2 in ok_gamma:
        eps = next((e for e in ok_eps if e > g1), None)
        delta = next((d for d in ok_delta if g1 + g2 < d < 2), None)
        if eps is not None and delta is not None:
            return _check_coe(ends, CoeParams(eps, delta, g1, g2))
    # report against the most permissive grid point
    g = PARAM_GRID[0]
    return _check_coe(ends, CoeParams(2 * g, 3 * g, g, g))


def check_doe(ends: Sequence[EndSpec]) -> int | None:
    """Smallest id ``l`` with ``V_l`` largest and ``V_l h_l^2`` smallest; ``None`` if absent."""
    if not ends:
        raise ValueError("need at least one end")
    for e in ends:
        vt = vtilde_sym(e.volume)
        if all(lex_cmp(e.volume, o.volume) >= 0 and lex_cmp(vt, vtilde_sym(o.volume)) <= 0 for o in ends):
            return e.id
    return None


def end_ordering(ends: Sequence[EndSpec]) -> EndOrdering:
    if len(ends) < 2:
        raise ValueError("need at least two ends")
    import functools

    order = sorted(
        range(len(ends)),
        key=functools.cmp_to_key(lambda i, j: -lex_cmp(ends[i].volume, ends[j].volume) or (i - j)),
    )
    return EndOrdering(ends[order[0]].id, ends[order[1]].id)


def _by_id(ends: Sequence[EndSpec], i: int) -> EndSpec:
    return next(e for e in ends if e.id == i)


def predict_poincare(ends: Sequence[EndSpec]) -> GrowthLaw:
    """Growth class of ``Lambda(B(o, r))``; raises :class:`Unsupported`."""
    order = end_ordering(ends)
    vn = _by_id(ends, order.n).volume
    if all(not e.parabolic for e in ends):
        return vn.law("r")
    cert = classify_coe(ends)
    if isinstance(cert, Violation):
        raise Unsupported(f"(COE) not certified on the parameter grid: clause {cert.clause}: {cert.reason}")
    return vh_sym(vn)


def _lex_min(laws: Iterable[GrowthLaw]) -> GrowthLaw:
    laws = list(laws)
    best = laws[0]
    for law in laws[1:]:
        if lex_cmp(law, best) < 0:
            best = law
    return best


def heat_conjecture(ends: Sequence[EndSpec]) -> GrowthLaw:
    """``min_i h_i^2(sqrt t) / min_i V_i h_i^2 (sqrt t)`` as a law in t."""
    hmin = _lex_min(h_sym(e.volume) for e in ends)
    vtmin = _lex_min(vtilde_sym(e.volume) for e in ends)
    return (hmin * hmin / vtmin).at_sqrt()


def predict_heat_center(ends: Sequence[EndSpec]) -> GrowthLaw | ConjectureOnly:
    """Growth class of ``p(t, o, o)`` in t, or the conjectured value flagged as such."""
    if len(ends) < 2:
        raise ValueError("need at least two ends")
    if any(not e.parabolic for e in ends):
        return _lex_min(vtilde_sym(e.volume) for e in ends).at_sqrt().reciprocal()
    each_ok = all(e.subcritical or e.regular for e in ends)
    critical_regular = any(e.regular and not e.subcritical for e in ends)
    if each_ok and (not critical_regular or check_doe(ends) is not None):
        vm = _by_id(ends, end_ordering(ends).m).volume
        return vm.law("r").at_sqrt().reciprocal()
    return ConjectureOnly(heat_conjecture(ends))
