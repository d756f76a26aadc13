import io

import numpy as np
import pytest

from endslab.mesh import ConnectedSumSpec, ball_subgraph, build_connected_sum
from endslab.model import VolumeProfile
from endslab.spectral import neumann_gap
from endslab.whitney import WhitneyParams, build_whitney, combined_upper_bound, dump_covering, overlap_bound, verify_covering


def test_b0_b1_radii():
    c = build_whitney(1e4, WhitneyParams(1 / 200, 2), 2)
    assert c.b0 == pytest.approx(1200)
    assert c.b1 == pytest.approx(3900)
    assert 2 * c.b1 < c.r


def test_construction_verifies():
    for eta, kappa in [(1 / 200, 2), (1 / 100, 1), (0.02, 1), (1e-3, 4)]:
        rep = verify_covering(build_whitney(1e5, WhitneyParams(eta, kappa), 3))
        assert rep.passed, rep.first_failure
        assert all(rep.checks.values())


def test_radius_law_and_pw2():
    eta = 1 / 100
    c = build_whitney(1e4, WhitneyParams(eta, 1), 1)
    ray = c.ray(0)
    s = np.array([b.radius for b in ray])
    assert np.allclose(s[1:] / s[:-1], 1 / (1 + 2 * eta))
    assert np.all((1 / eta - 4) * s[:-1] <= (1 / eta + 4) * s[1:])


def test_string_inclusion_at_largest_admissible_eta():
    eta = 1 / 42 * (1 - 1e-9)
    rep = verify_covering(build_whitney(1e4, WhitneyParams(eta, 1), 2))
    assert rep.checks["Fj"] and rep.passed


@pytest.mark.parametrize("eta,kappa", [(1 / 19, 1), (1 / 21, 1), (0.01, 0.5), (1 / 156, 2), (0.0, 1)])
def test_params_rejected(eta, kappa):
    with pytest.raises(ValueError):
        WhitneyParams(eta, kappa)


def test_overlap_bounded_independent_of_r():
    worst = []
    for r in (1e3, 1e4, 1e5, 1e6):
        rep = verify_covering(build_whitney(r, WhitneyParams(0.005, 2), 2))
        worst.append(rep.max_overlap[24.0])
    assert max(worst) <= 64
    assert max(worst) - min(worst) <= 1
    assert worst[0] <= overlap_bound(0.005, 24.0)


@pytest.mark.parametrize("factor", [1.1, 0.9])
def test_mutations_caught(factor):
    c = build_whitney(1e4, WhitneyParams(1 / 200, 2), 2)
    for k in (0, 3, len(c.balls) // 2, len(c.balls) - 1):
        rep = verify_covering(c.with_radius(k, c.balls[k].radius * factor))
        assert not rep.passed
        assert rep.first_failure.split(":")[0] in {"W1", "W3", "W2"}


def test_dump_covering():
    c = build_whitney(1e3, WhitneyParams(0.02, 1), 1)
    buf = io.StringIO()
    dump_covering(c, buf)
    assert len(buf.getvalue().splitlines()) >= len(c.balls)


@pytest.fixture(scope="module")
def plane():
    spec = ConnectedSumSpec((VolumeProfile(2, dim=2), VolumeProfile(2, dim=2)), 1.0)
    return build_connected_sum(spec, 0.25, 1e5, grade=256)


def test_combined_bound_summands(plane):
    c = build_whitney(1e4, WhitneyParams(0.02, 1), 2, center_radius=plane.r0, resolution=plane.step)
    b = combined_upper_bound(plane, c)
    assert b.value >= max(b.center_term, b.b1_term, b.ball_term)
    assert b.value == pytest.approx(b.center_term + b.b1_term + b.ball_term)


def test_combined_bound_ratio_stable(plane):
    rs = np.geomspace(1e3, 1e5, 5)
    ratios = []
    for r in rs:
        c = build_whitney(r, WhitneyParams(0.02, 1), 2, center_radius=plane.r0, resolution=plane.step)
        ratios.append(combined_upper_bound(plane, c).value * neumann_gap(ball_subgraph(plane, r)).lam)
    ratios = np.array(ratios)
    assert np.all(ratios[1:] / ratios[:-1] < 2) and np.all(ratios[:-1] / ratios[1:] < 2)
