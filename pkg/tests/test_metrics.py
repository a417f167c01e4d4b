import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reiflab.domains import DomainSpec as S
from reiflab.domains import complement, rasterize
from reiflab.flatness import certify
from reiflab.metrics import (
    MODES,
    MetricsError,
    check_boundary_vs_sets,
    check_inner_radius_bound,
    check_measure_bounds,
    domain_distance,
    min_enclosing_circle,
    radii,
    symmetric_difference_measure,
    unit_ball_volume,
)

H = 0.002
BOX = (-1.5, -1.5, 2.5, 1.5)
CERT = dict(n_scales=1, max_points=200)


def lens(d):
    return 2 * math.pi - 2 * (2 * math.acos(d / 2) - (d / 2) * math.sqrt(4 - d * d))


@pytest.fixture(scope="module")
def disk():
    return rasterize(S.ball(1.0), H, BOX)


@pytest.fixture(scope="module")
def shifted():
    return rasterize(S.ball(1.0, (0.1, 0)), H, BOX)


@pytest.fixture(scope="module")
def certified_disks(disk, shifted):
    out = {}
    for key, d in {"disk": disk, "shifted": shifted, "big": rasterize(S.ball(1.05), H, BOX)}.items():
        c = certify(d, 0.15, 0.1, **CERT)
        assert c.certified
        out[key] = d
    return out


# distances


def test_identical_domains_are_at_distance_zero(disk):
    for mode in MODES:
        assert domain_distance(disk, disk, mode).value == 0


def test_annulus_pair():
    bb = (-1.5, -1.5, 1.5, 1.5)
    X = rasterize(S.ball(1.0), 0.005, bb)
    Y = rasterize(S.annulus(1.0, 0.2), 0.005, bb)
    assert domain_distance(X, Y, "boundaries").value == pytest.approx(0.2, rel=0.05)
    assert domain_distance(X, Y, "sets").value == pytest.approx(1.0, rel=0.05)
    assert domain_distance(X, Y, "complements").value == pytest.approx(1.0, rel=0.05)


def test_tentacle_pair(disk):
    w = 0.02
    T = rasterize(S.disk_with_tentacle(w, 1.0), H, BOX)
    assert domain_distance(disk, T, "sets").value == pytest.approx(1.0, rel=0.05)
    assert domain_distance(disk, T, "complements").value == pytest.approx(w / 2, abs=H)


def test_complement_report_is_clipped_with_interior_witness(disk, shifted):
    r = domain_distance(disk, shifted, "complements")
    assert r.clipped and r.witness_interior
    assert not domain_distance(disk, shifted, "sets").clipped
    json.dumps(r.to_dict())


def test_witness_realizes_value(disk, shifted):
    for mode in MODES:
        r = domain_distance(disk, shifted, mode)
        p, q = r.witness_pair
        assert np.linalg.norm(p - q) == pytest.approx(r.value, abs=1e-9)


@pytest.mark.parametrize("mode", MODES)
def test_distance_is_symmetric(disk, shifted, mode):
    assert domain_distance(disk, shifted, mode).value == pytest.approx(domain_distance(shifted, disk, mode).value, abs=1e-12)


def test_distance_errors(disk):
    other = rasterize(S.ball(1.0), 0.004, BOX)
    with pytest.raises(MetricsError, match="mismatched grids"):
        domain_distance(disk, other)
    with pytest.raises(MetricsError):
        domain_distance(disk, disk, "nope")
    empty = disk.with_grid(disk.grid.select_runs(np.zeros(len(disk.grid.starts), dtype=bool)))
    with pytest.raises(MetricsError, match="empty"):
        domain_distance(disk, empty, "sets")


# symmetric difference


def test_lens_area(disk, shifted):
    m = symmetric_difference_measure(disk, shifted)
    assert lens(0.1) == pytest.approx(0.3998, abs=1e-4)
    assert m == pytest.approx(lens(0.1), rel=0.01)
    assert symmetric_difference_measure(disk, disk) == 0


@settings(max_examples=20)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(0.3, 1.0))
def test_symmetric_difference_of_complements(cx, cy, R):
    bb = (-1.5, -1.5, 1.5, 1.5)
    X = rasterize(S.ball(1.0), 0.01, bb)
    Y = rasterize(S.ball(R, (cx, cy)), 0.01, bb)
    assert symmetric_difference_measure(X, Y) == symmetric_difference_measure(complement(X), complement(Y))


# radii


def test_radii_ball():
    h = 0.005
    r = radii(rasterize(S.ball(1.0), h, (-1.5, -1.5, 1.5, 1.5)))
    t = h * math.sqrt(2)
    assert r.rad == pytest.approx(1, abs=t)
    assert r.big_rad == pytest.approx(1, abs=t)
    assert r.diam == pytest.approx(2, abs=t)
    assert r.ordered


def test_radii_rectangle():
    h = 0.005
    r = radii(rasterize(S.rectangle(1, 2), h, (-1.5, -1.5, 1.5, 1.5)))
    t = h * math.sqrt(2)
    assert r.rad == pytest.approx(0.5, abs=t)
    assert r.big_rad == pytest.approx(math.sqrt(5) / 2, abs=t)
    assert r.diam == pytest.approx(math.sqrt(5), abs=t)


def test_radii_annulus():
    h = 0.005
    r = radii(rasterize(S.annulus(1.0, 0.1), h, (-1.5, -1.5, 1.5, 1.5)))
    t = h * math.sqrt(2)
    assert r.rad == pytest.approx(0.05, abs=t)
    assert r.diam == pytest.approx(2.2, abs=t)
    assert r.ordered
    json.dumps(r.to_dict())


def test_radii_refuses_clipped(halfspace):
    with pytest.raises(MetricsError, match="unbounded at this clip"):
        radii(halfspace)


@settings(max_examples=15)
@given(
    st.sampled_from(["ball", "rectangle", "annulus", "tentacle", "slit", "koch"]),
    st.floats(0.3, 1.0),
    st.floats(0.2, 1.0),
)
def test_radii_ordering(kind, a, b):
    spec = {
        "ball": S.ball(a),
        "rectangle": S.rectangle(a, b),
        "annulus": S.annulus(a, 0.1 * b),
        "tentacle": S.disk_with_tentacle(0.05 * b, a, 0.5),
        "slit": S.disk_with_slit(0.05 * b, a * 0.5, 0.5),
        "koch": S.koch_flat(5 + 10 * b, 2, R=a),
    }[kind]
    r = radii(rasterize(spec, 0.01))
    assert r.ordered


def test_min_enclosing_circle_matches_brute_force(rng):
    P = rng.normal(size=(60, 2))
    c, rho = min_enclosing_circle(P)
    assert np.linalg.norm(P - c, axis=1).max() <= rho + 1e-9
    # no grid point does better
    g = np.linspace(-3, 3, 241)
    X, Y = np.meshgrid(g, g)
    C = np.column_stack([X.ravel(), Y.ravel()])
    best = np.sqrt(((C[:, None, :] - P[None]) ** 2).sum(-1)).max(1).min()
    assert rho <= best + 1e-9


def test_inner_radius_bound_examples(halfspace, coarse_ball):
    assert check_inner_radius_bound(coarse_ball, 0.002).passed
    assert check_inner_radius_bound(halfspace, 0.5).passed
    assert not check_inner_radius_bound(coarse_ball, 10.0).passed


# inequality checks


def test_boundary_vs_sets_concentric(certified_disks):
    X, Y = certified_disks["disk"], certified_disks["big"]
    r = check_boundary_vs_sets(X, Y, 0.15, 0.1, certified=True)
    assert r.status == "pass"
    assert r.lhs == pytest.approx(0.05, abs=2 * H)
    assert r.rhs >= 4 / 0.7 * 0.05 - 4 / 0.7 * 2 * H


def test_boundary_vs_sets_shifted():
    X = rasterize(S.ball(1.0), H, BOX)
    Y = rasterize(S.ball(1.0, (0.01, 0)), H, BOX)
    r = check_boundary_vs_sets(X, Y, 0.15, 0.1, **CERT)
    assert r.status == "pass"
    assert r.details["achieved_ratio"] >= 1 - 1e-9


def test_boundary_vs_sets_tentacle_inapplicable(disk):
    T = rasterize(S.disk_with_tentacle(0.02, 1.0), H, BOX)
    r = check_boundary_vs_sets(disk, T, 0.15, 0.1, **CERT)
    assert r.status == "inapplicable"
    assert "not certified" in r.details["reason"]


def test_boundary_vs_sets_hypothesis_not_met(disk):
    Y = rasterize(S.ball(0.5), H, BOX)
    r = check_boundary_vs_sets(disk, Y, 0.15, 0.1, certified=True)
    assert r.status == "inapplicable"
    assert r.details["reason"] == "hypothesis not met"


def test_measure_bounds_shifted(certified_disks):
    X, Y = certified_disks["disk"], certified_disks["shifted"]
    r = check_measure_bounds(X, Y, 0.15, 0.1, certified=True)
    assert r.status == "pass"
    assert r.lhs == pytest.approx(0.1, abs=H)
    assert r.rhs == pytest.approx(8 / 0.7 * math.sqrt(lens(0.1) / math.pi), rel=0.01)


def test_measure_bounds_rhs_at_small_eps(disk, shifted):
    r = check_measure_bounds(disk, shifted, 1e-9, 0.1, certified=True)
    assert r.rhs == pytest.approx(2.854, rel=0.01)


def test_measure_bounds_identical(disk):
    r = check_measure_bounds(disk, disk, 0.15, 0.1, certified=True)
    assert r.status == "pass" and r.lhs == 0 and r.rhs == 0


def test_measure_bounds_slit_inapplicable(disk):
    Sl = rasterize(S.disk_with_slit(0.02, 1.0), H, BOX)
    assert check_measure_bounds(disk, Sl, 0.15, 0.1, **CERT).status == "inapplicable"


# unit balls


def test_unit_ball_volume_examples():
    w2, ok2 = unit_ball_volume(2)
    assert w2 == pytest.approx(math.pi) and ok2
    w3, ok3 = unit_ball_volume(3)
    assert w3 == pytest.approx(4 * math.pi / 3) and ok3


@pytest.mark.parametrize("N", range(1, 21))
def test_unit_ball_volume_gamma(N):
    w, ok = unit_ball_volume(N)
    assert w == pytest.approx(math.pi ** (N / 2) / math.gamma(N / 2 + 1), rel=1e-12)
    assert ok


def test_unit_ball_volume_range():
    with pytest.raises(MetricsError):
        unit_ball_volume(0)
    with pytest.raises(MetricsError):
        unit_ball_volume(21)
