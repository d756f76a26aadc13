"""Radial star-graph discretisation of a connected sum of model manifolds.

Vertex 0 is the centre ``o`` (the compact block).  Each end is a chain of
vertices ordered by radius and attached to the centre by one edge.  Vertex
masses are shell volumes and conductances are ``(V(r') - V(r)) / (r' - r)^2``,
so the discrete Dirichlet form is exact on functions linear in r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import VolumeProfile

__all__ = [
    "CENTER",
    "ConnectedSumSpec",
    "WeightedGraph",
    "View",
    "build_connected_sum",
    "build_chain",
    "ball_subgraph",
    "annulus_set",
    "chain_segment",
    "radial_ball",
    "dump_graph",
]

CENTER = -1


@dataclass(frozen=True)
class ConnectedSumSpec:
    ends: tuple[VolumeProfile, ...]
    center_radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "ends", tuple(self.ends))
        if len(self.ends) < 2:
            raise ValueError("a connected sum needs at least two ends")
        if not self.center_radius > 0:
            raise ValueError("center radius must be positive")


class WeightedGraph:
    """Vertex masses ``mu``, undirected edges with conductances, optional chain layout.

    ``end[v]`` is the 0-based end of vertex v (``CENTER`` for the centre) and
    ``radius[v]`` its distance to o.  ``chains[i]`` lists the vertices of end i
    outward; ``chain_cond[i][j]`` is the conductance of the edge entering
    ``chains[i][j]`` from the inside (from the centre when j = 0).
    """

    def __init__(self, mu, edges, cond, end=None, radius=None, center: int = 0,
                 chains=None, chain_cond=None, profiles=None, r0=None, step=None):
        self.mu = np.ascontiguousarray(mu, dtype=float)
        self.edges = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2)
        self.cond = np.ascontiguousarray(cond, dtype=float)
        n = len(self.mu)
        if len(self.cond) != len(self.edges):
            raise ValueError("one conductance per edge")
        if not (np.all(np.isfinite(self.mu)) and np.all(self.mu > 0)):
            raise ValueError("vertex masses must be finite and positive")
        if not (np.all(np.isfinite(self.cond)) and np.all(self.cond > 0)):
            raise ValueError("conductances must be finite and positive")
        if len(self.edges) and (self.edges.min() < 0 or self.edges.max() >= n or np.any(self.edges[:, 0] == self.edges[:, 1])):
            raise ValueError("bad edge endpoints")
        self.end = np.full(n, CENTER, dtype=np.int64) if end is None else np.asarray(end, dtype=np.int64)
        self.radius = np.zeros(n) if radius is None else np.asarray(radius, dtype=float)
        self.center = int(center)
        self.chains = None if chains is None else [np.asarray(c, dtype=np.int64) for c in chains]
        self.chain_cond = None if chain_cond is None else [np.asarray(c, dtype=float) for c in chain_cond]
        self.profiles = None if profiles is None else list(profiles)
        self.r0 = r0
        self.step = step
        self._lap = None

    @classmethod
    def from_edges(cls, mu, edges, cond, center: int = 0) -> "WeightedGraph":
        return cls(mu, edges, cond, center=center)

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def n_ends(self) -> int:
        return 0 if self.chains is None else len(self.chains)

    def laplacian(self):
        """Sparse graph Laplacian ``L = D - C`` (CSR)."""
        if self._lap is None:
            import scipy.sparse as sp

            u, v = self.edges[:, 0], self.edges[:, 1]
            c = self.cond
            n = self.n
            rows = np.concatenate([u, v, u, v])
            cols = np.concatenate([v, u, u, v])
            vals = np.concatenate([-c, -c, c, c])
            self._lap = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        return self._lap

    def whole(self) -> "View":
        if self.chains is not None:
            return View(self, True, tuple((0, len(c)) for c in self.chains))
        return View.subset(self, np.arange(self.n))


@dataclass(frozen=True, eq=False)
class View:
    """Read-only vertex subset of a graph.

    On chain graphs a view is the centre (optionally) plus one contiguous
    index range per chain; this is what the tree solvers exploit.  Views of
    general graphs carry an explicit vertex list only.
    """

    graph: WeightedGraph
    has_center: bool
    ranges: tuple[tuple[int, int], ...] | None
    explicit: np.ndarray | None = None
    label: str = ""
    vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.graph
        if self.ranges is None:
            verts = np.unique(np.asarray(self.explicit, dtype=np.int64))
        else:
            if len(self.ranges) != g.n_ends:
                raise ValueError("one range per chain")
            parts = [np.array([g.center])] if self.has_center else []
            for c, (lo, hi) in zip(g.chains, self.ranges):
                if not 0 <= lo <= hi <= len(c):
                    raise ValueError("chain range out of bounds")
                parts.append(c[lo:hi])
            verts = np.concatenate(parts) if parts else np.array([], dtype=np.int64)
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def subset(cls, graph: WeightedGraph, vertices, label: str = "") -> "View":
        return cls(graph, False, None, np.asarray(vertices), label)

    def __len__(self):
        return len(self.vertices)

    @property
    def structured(self) -> bool:
        return self.ranges is not None

    @property
    def mass(self) -> float:
        return float(self.graph.mu[self.vertices].sum())

    def contains(self, other: "View") -> bool:
        return bool(np.all(np.isin(other.vertices, self.vertices)))

    def is_tree_connected(self) -> bool:
        """Structured views are connected iff they hang off the centre or use one chain from its start point."""
        if not self.structured:
            raise TypeError("not a chain view")
        used = [(lo, hi) for lo, hi in self.ranges if hi > lo]
        if self.has_center:
            return all(lo == 0 for lo, _ in used)
        return len(used) == 1


def _chain_radii(r0: float, step: float, r_max: float, grade: float | None) -> np.ndarray:
    if grade is None:
        n = int(np.floor((r_max - r0) / step + 1e-9))
        return r0 + step * np.arange(1, n + 1)
    out = []
    r = r0
    while True:
        r = r + max(step, r / grade)
        if r > r_max * (1 + 1e-12):
            break
        out.append(r)
    return np.asarray(out)


def _shell_weights(V: Callable, diff: Callable | None, r0: float, radii: np.ndarray):
    if diff is None:
        diff = lambda a, b: np.asarray(V(b)) - np.asarray(V(a))
    r_all = np.concatenate(([r0], radii))
    gaps = np.diff(r_all)
    lower = radii - 0.5 * gaps
    upper = np.empty_like(radii)
    upper[:-1] = lower[1:]
    upper[-1] = radii[-1] + 0.5 * gaps[-1]
    mu = np.asarray(diff(lower, upper))
    cond = np.asarray(diff(r_all[:-1], r_all[1:])) / gaps**2
    return mu, cond


def build_connected_sum(spec: ConnectedSumSpec, step: float, r_max: float,
                        grade: float | None = None) -> WeightedGraph:
    """Discretise the connected sum out to ``r_max``.

    With ``grade`` set, spacing grows as ``max(step, r / grade)``.
    """
    r0 = spec.center_radius
    if not step > 0:
        raise ValueError("step must be positive")
    if step > r0 / 4 * (1 + 1e-12):
        raise ValueError(f"step {step:g} exceeds r0/4 = {r0 / 4:g}")
    if r_max < 100 * r0 * (1 - 1e-12):
        raise ValueError(f"r_max {r_max:g} is below 100 r0")
    radii = _chain_radii(r0, step, r_max, grade)
    if len(radii) < 4:
        raise ValueError("chain shorter than 4 vertices")

    mus = [np.array([sum(p.V(r0) for p in spec.ends)])]
    ends_col = [np.array([CENTER])]
    rad_col = [np.array([0.0])]
    edges, conds, chains, chain_cond = [], [], [], []
    nxt = 1
    for i, p in enumerate(spec.ends):
        mu, cond = _shell_weights(p.V, p.diff, r0, radii)
        if not (np.all(np.isfinite(mu)) and np.all(mu > 0)):
            raise ValueError(f"end {i}: non-finite or non-positive shell measure")
        ids = np.arange(nxt, nxt + len(radii))
        prev = np.concatenate(([0], ids[:-1]))
        edges.append(np.stack([prev, ids], axis=1))
        conds.append(cond)
        chains.append(ids)
        chain_cond.append(cond)
        mus.append(mu)
        ends_col.append(np.full(len(ids), i))
        rad_col.append(radii)
        nxt += len(ids)
    return WeightedGraph(
        np.concatenate(mus), np.concatenate(edges), np.concatenate(conds),
        end=np.concatenate(ends_col), radius=np.concatenate(rad_col), center=0,
        chains=chains, chain_cond=chain_cond, profiles=list(spec.ends), r0=r0, step=step,
    )


def build_chain(V, length: float, step: float) -> WeightedGraph:
    """Cell-centred chain discretising ``(0, length)`` for the measure dV.

    Vertex j sits at ``(j + 1/2) step``.  The first vertex plays the role of the
    centre, so the result is a one-chain graph usable with chain views.
    """
    n = int(round(length / step))
    if n < 4:
        raise ValueError("chain shorter than 4 vertices")
    diff = getattr(V, "diff", None) or (lambda a, b: np.asarray(V(b)) - np.asarray(V(a)))
    faces = step * np.arange(n + 1)
    mu = np.asarray(diff(faces[:-1], faces[1:]), dtype=float)
    r = 0.5 * (faces[:-1] + faces[1:])
    cond = np.asarray(diff(r[:-1], r[1:]), dtype=float) / step**2
    ids = np.arange(1, n)
    edges = np.stack([ids - 1, ids], axis=1)
    return WeightedGraph(mu, edges, cond, end=np.r_[CENTER, np.zeros(n - 1, dtype=np.int64)],
                         radius=r, center=0, chains=[ids], chain_cond=[cond], r0=r[0], step=step)


def _require_chains(G: WeightedGraph):
    if G.chains is None:
        raise TypeError("graph has no chain layout")


def _count_within(G: WeightedGraph, i: int, R: float) -> int:
    return int(np.searchsorted(G.radius[G.chains[i]], R * (1 + 1e-12), side="right"))


def ball_subgraph(G: WeightedGraph, R: float) -> View:
    """Centre plus every chain vertex with radius at most R (Neumann restriction)."""
    _require_chains(G)
    ranges = tuple((0, _count_within(G, i, R)) for i in range(G.n_ends))
    if any(hi == 0 for _, hi in ranges):
        raise ValueError(f"ball of radius {R:g} misses a chain entirely")
    return View(G, True, ranges, label=f"B(o,{R:g})")


def chain_segment(G: WeightedGraph, i: int, lo_r: float, hi_r: float, label: str = "") -> View:
    """Vertices of end i with radius in ``[lo_r, hi_r]``."""
    _require_chains(G)
    rad = G.radius[G.chains[i]]
    lo = int(np.searchsorted(rad, lo_r * (1 - 1e-12), side="left"))
    hi = int(np.searchsorted(rad, hi_r * (1 + 1e-12), side="right"))
    ranges = tuple((lo, hi) if j == i else (0, 0) for j in range(G.n_ends))
    return View(G, False, ranges, label=label)


def annulus_set(G: WeightedGraph, i: int, r: float) -> View:
    """Vertices of end i with radius in ``(r/2, r]``."""
    _require_chains(G)
    if r / 2 <= G.r0:
        raise ValueError("annulus must stay outside the centre: need r/2 > r0")
    rad = G.radius[G.chains[i]]
    lo = int(np.searchsorted(rad, (r / 2) * (1 + 1e-12), side="right"))
    hi = int(np.searchsorted(rad, r * (1 + 1e-12), side="right"))
    if hi <= lo:
        raise ValueError(f"empty annulus A_{i}({r:g})")
    ranges = tuple((lo, hi) if j == i else (0, 0) for j in range(G.n_ends))
    return View(G, False, ranges, label=f"A_{i}({r:g})")


def radial_ball(G: WeightedGraph, i: int, x: float, s: float) -> View:
    """Closed metric ball of radius s about the point at radius x on end i (``i = CENTER`` for o)."""
    _require_chains(G)
    if i == CENTER or s >= x:
        reach = s if i == CENTER else s - x
        ranges = []
        for j in range(G.n_ends):
            R = x + s if j == i else reach
            ranges.append((0, _count_within(G, j, R)))
        return View(G, True, tuple(ranges))
    return chain_segment(G, i, x - s, x + s)


def dump_graph(G: WeightedGraph, stream) -> None:
    """Text dump: ``v <id> <end> <radius> <mu>`` then ``e <u> <v> <c>``."""
    for v in range(G.n):
        e = "C" if G.end[v] == CENTER else str(int(G.end[v]))
        stream.write(f"v {v} {e} {G.radius[v]:.17g} {G.mu[v]:.17g}\n")
    for (u, v), c in zip(G.edges, G.cond):
        stream.write(f"e {u} {v} {c:.17g}\n")
