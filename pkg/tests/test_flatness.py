import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from reiflab.domains import Domain, DomainSpec, rasterize
from reiflab.flatness import (
    FlatnessError,
    admissible_step,
    best_hyperplane,
    best_hyperplane_points,
    certify,
    flatness_profile,
    line_deviation,
    normal_angle_check,
    scale_grid,
    separation_check,
    separation_propagation_check,
)
from reiflab.geometry import Hyperplane, hausdorff, plane_ball_hausdorff, segment_points

S = DomainSpec


def near(d, p):
    return d.nearest_boundary_point(p)[0]


def brute_epsilon(d, x, r, n_angles=3600, n_seg=2001):
    """min over line angles of d_H(slice, dense segment) / r."""
    P = d.boundary_in_ball(x, r)
    best = math.inf
    for th in np.arange(n_angles) * math.pi / n_angles:
        u = np.array([math.cos(th), math.sin(th)])
        seg = segment_points(x - r * u, x + r * u, 2 * r / (n_seg - 1))
        best = min(best, hausdorff(P, seg, "kdtree"))
    return best / r


def test_halfspace_is_flat(halfspace):
    d = halfspace
    s = best_hyperplane(d, near(d, (0.3, 0)), 0.5)
    assert s.epsilon <= 2 * d.resolution / 0.5
    assert np.allclose(abs(s.plane.normal[1]), 1)
    assert np.array_equal(s.plane.base, s.x)


def test_ball_epsilon(unit_ball):
    d = unit_ball
    x = near(d, (1, 0))
    s = best_hyperplane(d, x, 0.1)
    assert s.epsilon == pytest.approx(0.05, rel=0.2)
    assert s.epsilon == pytest.approx(brute_epsilon(d, x, 0.1, 720), rel=0.02)


def test_rectangle_corner_epsilon():
    d = rasterize(S.rectangle(1.0, 1.0), 0.002)
    s = best_hyperplane(d, near(d, (0.5, 0.5)), 0.2)
    assert s.epsilon == pytest.approx(math.sin(math.pi / 4), rel=0.1)


def test_best_hyperplane_errors(unit_ball):
    with pytest.raises(FlatnessError, match="under-resolved"):
        best_hyperplane(unit_ball, near(unit_ball, (1, 0)), 5 * unit_ball.resolution)
    with pytest.raises(FlatnessError):
        best_hyperplane(unit_ball, (0.0, 0.0), 0.1)  # not on the boundary


def test_optimizer_dominates_random_candidates(unit_ball, rng):
    d = rasterize(S.koch_flat(8, 3), 0.002)
    for _ in range(5):
        x = d.boundary_samples()[rng.integers(d.boundary_count())]
        r = float(rng.uniform(0.03, 0.2))
        s = best_hyperplane(d, x, r)
        for th in rng.uniform(0, math.pi, 100):
            assert s.epsilon <= line_deviation(d, x, r, th) + 1e-12


def test_separation_examples(halfspace, unit_ball):
    s = best_hyperplane(halfspace, near(halfspace, (0, 0)), 0.5)
    res = separation_check(halfspace, s)
    assert res.ok and np.allclose(res.sample.inward_normal, (0, 1))
    b = unit_ball
    s = best_hyperplane(b, near(b, (1, 0)), 0.1)
    res = separation_check(b, s, 0.06)
    assert res.ok
    assert res.sample.inward_normal[0] < -0.99


def test_separation_fails_when_both_sides_inside():
    # plane minus a thin circle: both sides of the boundary are in the domain
    ring = rasterize(S.annulus(1.0, 0.004), 0.001, (-1.5, -1.5, 1.5, 1.5))
    d = Domain(ring.bbox, ring.resolution, ring.grid.complement(), "plane minus circle")
    x = near(d, (1.0, 0.0))
    s = best_hyperplane(d, x, 0.1)
    res = separation_check(d, s)
    assert not res.ok and res.plus == res.minus == "inside"


def test_degenerate_slab(unit_ball):
    s = best_hyperplane(unit_ball, near(unit_ball, (1, 0)), 0.1)
    with pytest.raises(FlatnessError, match="degenerate slab"):
        separation_check(unit_ball, s, 0.49)


def test_profile_examples(unit_ball):
    hs = rasterize(S.halfspace(), 0.001, (-1, -1, 1, 1))
    rep = flatness_profile(hs, 0.2, 2, max_points=100)
    assert rep.sup_epsilon <= 2 * 0.001 / 0.1 and rep.separation_ok
    rep = flatness_profile(unit_ball, 0.1, 2, max_points=200)
    assert rep.sup_epsilon == pytest.approx(0.05, rel=0.15)
    assert rep.worst[1] == 0.1
    assert rep.subsampled and len(rep.samples) == 400
    slit = rasterize(S.disk_with_slit(0.05, 1.0), 0.005)
    rep = flatness_profile(slit, 0.5, 1, max_points=300)
    assert not rep.separation_ok or rep.sup_epsilon > 0.5


def test_scale_grid():
    assert scale_grid(0.1, 3, 0.001) == [0.1, 0.05, 0.025]
    assert scale_grid(0.1, 8, 0.001)[-1] >= 0.01
    with pytest.raises(FlatnessError):
        scale_grid(0.005, 1, 0.001)


def test_certify_examples(unit_ball, fine_halfspace):
    c = certify(fine_halfspace, 1 / 600, 0.5, 1, max_points=200)
    assert c.certified and c.separation_r0
    v = certify(unit_ball, 1 / 600, 0.1, 2, max_points=200)
    assert not v.certified and v.reason == "flatness"
    with pytest.raises(FlatnessError):
        certify(unit_ball, 0.5, 0.1)
    with pytest.raises(FlatnessError):
        certify(unit_ball, 0.0, 0.1)


@pytest.mark.slow
def test_fine_ball_certifies_at_small_radius(fine_ball):
    c = certify(fine_ball, 1 / 600, 0.002, 2, max_points=150)
    assert c.certified
    assert c.sup_epsilon + c.margin <= 1 / 600


@pytest.fixture(scope="module")
def ball_report(coarse_ball):
    return flatness_profile(coarse_ball, 0.4, 2, max_points=150)


@given(st.floats(0.01, 0.49), st.floats(0.01, 0.49))
def test_certification_monotone_in_eps(ball_report, coarse_ball, e1, e2):
    e1, e2 = sorted((e1, e2))
    c1 = certify(coarse_ball, e1, 0.4, 2, report=ball_report)
    c2 = certify(coarse_ball, e2, 0.4, 2, report=ball_report)
    if c1.certified:
        assert c2.certified


@pytest.mark.parametrize("spec,eps,r0", [(S.ball(1.0), 0.3, 0.4), (S.ball(1.0), 0.05, 0.4), (S.koch_flat(8, 3), 0.3, 0.1)])
def test_certification_complement_symmetric(spec, eps, r0):
    d = rasterize(spec, 0.004)
    a = certify(d, eps, r0, 2, max_points=150)
    b = certify(d.complement(), eps, r0, 2, max_points=150)
    assert a.certified == b.certified


def test_normal_angle_examples(halfspace, unit_ball):
    a = normal_angle_check(halfspace, near(halfspace, (0.2, 0)), 0.05, 4, 0.01)
    assert a.cos == pytest.approx(1.0) and a.passed
    b = normal_angle_check(unit_ball, near(unit_ball, (1, 0)), 0.01, 4, 0.05)
    assert b.cos >= 0.75 and b.passed
    with pytest.raises(FlatnessError):
        normal_angle_check(unit_ball, near(unit_ball, (1, 0)), 0.01, 0.5, 0.05)


def test_normal_angles_on_certified_koch(koch5):
    eps, r0 = 0.1, 0.03
    assert certify(koch5, eps, r0, 2, max_points=200).certified
    rng = np.random.default_rng(11)
    pts, _ = koch5.boundary_subsample(2000)
    h = koch5.resolution
    for _ in range(100):
        x = pts[rng.integers(len(pts))]
        M = float(rng.choice([2, 4]))
        r = float(np.exp(rng.uniform(np.log(10 * h), np.log(r0 / M))))
        assert normal_angle_check(koch5, x, r, M, eps).passed


def test_propagation_examples():
    hs = rasterize(S.halfspace(), 0.001, (-1, -1, 1, 1))
    rep = separation_propagation_check(hs, 0.2, 0.01, max_points=50)
    assert rep.ok and len(rep.scales) >= 3
    assert admissible_step(1 / 600) == pytest.approx(199.6667, abs=1e-3)
    slit = rasterize(S.disk_with_slit(0.05, 1.0), 0.002)
    rep = separation_propagation_check(slit, 0.4, 0.2, max_points=200)
    assert not rep.ok
    failing = [r for r, ok in zip(rep.scales, rep.passed) if not ok]
    assert all(0.05 / 2 < r < 1.0 for r in failing)


@pytest.mark.slow
def test_fine_ball_propagates_separation(fine_ball):
    rep = separation_propagation_check(fine_ball, 0.002, 1 / 600, max_points=60)
    assert rep.ok
    assert rep.M_bound == pytest.approx(199.67, abs=0.01)


def test_three_dimensional_fit():
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1, 1, (400, 3)) * [1, 1, 0.02]
    plane, eps = best_hyperplane_points(pts, np.zeros(3), 1.0)
    inside = pts[np.linalg.norm(pts, axis=1) <= 1.0]
    flat = plane_ball_hausdorff(inside, Hyperplane(np.zeros(3), (0, 0, 1)), 1.0)
    assert eps <= flat + 1e-9
    assert abs(plane.normal[2]) > 0.99
