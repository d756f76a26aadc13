import io
import math

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from endslab.mesh import (
    CENTER,
    ConnectedSumSpec,
    WeightedGraph,
    annulus_set,
    ball_subgraph,
    build_chain,
    build_connected_sum,
    chain_segment,
    dump_graph,
    radial_ball,
)
from endslab.model import VolumeProfile
from endslab.spectral import neumann_gap


def euclid(n, k=2, r_max=1e3, step=0.25, grade=None):
    spec = ConnectedSumSpec(tuple(VolumeProfile(n, dim=n) for _ in range(k)), 1.0)
    return build_connected_sum(spec, step, r_max, grade=grade)


def test_structure():
    G = euclid(3, k=3)
    assert np.all(G.mu > 0) and np.all(G.cond > 0)
    assert connected_components(G.laplacian(), directed=False)[0] == 1
    center_edges = np.sum(np.any(G.edges == G.center, axis=1))
    assert center_edges == 3
    for ch in G.chains:
        assert np.all(np.diff(G.radius[ch]) > 0)
        assert np.all(G.end[ch] == G.end[ch[0]])
    assert G.end[G.center] == CENTER


def test_half_line():
    # V(r) = r, unit spacing: unit masses and conductances away from the ends
    spec = ConnectedSumSpec((VolumeProfile(1, dim=2), VolumeProfile(1, dim=2)), 4.0)
    G = build_connected_sum(spec, 1.0, 400.0)
    c = G.chain_cond[0]
    mu = G.mu[G.chains[0]]
    assert np.allclose(c, c[5], rtol=1e-9)
    assert np.allclose(mu[1:-1], mu[5], rtol=1e-9)
    assert c[5] == pytest.approx(VolumeProfile(1, dim=2).dV(100.0), rel=1e-9)


def test_euclid_plane_shell_growth():
    G = euclid(2)
    ch = G.chains[0]
    r = G.radius[ch][10:-1]
    mu = G.mu[ch][10:-1]
    assert np.allclose(mu / r, (mu / r)[0], rtol=1e-9)


def test_ball_mass_factor_four():
    for n in (2, 3):
        G = euclid(n)
        for R in (10, 100, 500):
            B = ball_subgraph(G, R)
            want = sum(p.V(R) for p in G.profiles)
            assert 0.25 <= B.mass / want <= 4


def test_ball_extremes():
    G = euclid(3)
    assert len(ball_subgraph(G, 1e3)) == G.n
    small = ball_subgraph(G, 1.0 + 0.25)
    assert len(small) == 1 + G.n_ends


def test_annulus():
    G = euclid(2)
    A = annulus_set(G, 0, 100.0)
    V = G.profiles[0].V
    assert A.mass == pytest.approx(V(100.0) - V(50.0), rel=0.02)  # (3/4) V(100) for V = c r^2
    assert len(annulus_set(G, 1, 2 * 1.0 + 2 * 0.25)) >= 1
    with pytest.raises(ValueError):
        annulus_set(G, 0, 1.5)


def test_annulus_mass_tracks_volume():
    spec = ConnectedSumSpec((VolumeProfile(2, [1], dim=3), VolumeProfile(1.5, dim=2)), 1.0)
    G = build_connected_sum(spec, 0.25, 1e4, grade=256)
    for i, p in enumerate(G.profiles):
        for r in (50.0, 500.0, 5000.0):
            assert 1 / 8 <= annulus_set(G, i, r).mass / p.V(r) <= 8


def test_views_nest():
    G = euclid(3)
    assert ball_subgraph(G, 500).contains(ball_subgraph(G, 100))
    seg = chain_segment(G, 0, 50, 60)
    assert ball_subgraph(G, 60).contains(seg)
    assert seg.is_tree_connected


def test_radial_ball():
    G = euclid(3)
    b = radial_ball(G, 0, 100.0, 10.0)
    assert np.all(np.abs(G.radius[b.vertices] - 100) <= 10 + 1e-9)
    c = radial_ball(G, 0, 5.0, 10.0)
    assert G.center in set(c.vertices)


def test_build_rejects_bad_inputs():
    spec = ConnectedSumSpec((VolumeProfile(3), VolumeProfile(3)), 1.0)
    with pytest.raises(ValueError):
        build_connected_sum(spec, 0.5, 1e3)
    with pytest.raises(ValueError):
        build_connected_sum(spec, 0.25, 50)
    with pytest.raises(ValueError):
        ConnectedSumSpec((VolumeProfile(3),), 1.0)


def test_graded_mesh_size():
    G = euclid(3, r_max=1e5, grade=256)
    assert G.n < 10_000
    gaps = np.diff(G.radius[G.chains[0]])
    assert gaps.max() <= 1e5 / 256 * 1.01


def test_refinement_stability():
    R = 1e3
    lams = []
    for step in (0.25, 0.125):
        G = euclid(3, r_max=R, step=step)
        lams.append(neumann_gap(ball_subgraph(G, R)).lam)
    assert abs(lams[1] / lams[0] - 1) < 0.01


def test_chain_builder():
    G = build_chain(lambda r: np.asarray(r, dtype=float), 10.0, 0.5)
    assert G.n == 20
    assert np.allclose(G.mu, 0.5) and np.allclose(G.cond, 2.0)


def test_dump_graph():
    G = WeightedGraph.from_edges([1.0, 2.0], [(0, 1)], [3.0])
    buf = io.StringIO()
    G.chains = None
    G.end = np.array([CENTER, 0])
    G.radius = np.array([0.0, 1.0])
    dump_graph(G, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("v 0 C") and lines[-1] == "e 0 1 3"
