import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from reiflab.components import check_count_bound, check_separation_bound, components, count_bound
from reiflab.domains import DomainError
from reiflab.domains import DomainSpec as S
from reiflab.domains import rasterize
from reiflab.flatness import certify, flatness_profile
from reiflab.raster import RunGrid


@pytest.fixture(scope="module")
def two_disks():
    return rasterize(S.disks([(0, 0), (5, 0)], 1.0), 0.01)


def test_single_ball(coarse_ball):
    rep = components(coarse_ball)
    assert rep.n == 1
    assert rep.min_pairwise_separation == math.inf
    assert rep.areas[0] == pytest.approx(coarse_ball.area())


def test_two_disks(two_disks):
    rep = components(two_disks, 0.5)
    assert rep.n == 2
    assert rep.min_pairwise_separation == pytest.approx(3.0, abs=2 * 0.01)
    p, q = rep.closest_pair
    assert np.linalg.norm(p - q) == pytest.approx(rep.min_pairwise_separation)
    assert [c.label for c in rep.components] == [f"{two_disks.label}#0", f"{two_disks.label}#1"]
    json.dumps(rep.to_dict())


def test_slit_stays_connected():
    d = rasterize(S.disk_with_slit(0.05, 1.0), 0.005)
    assert components(d).n == 1
    # flood-fill oracle
    _, n = ndimage.label(d.occupancy())
    assert n == 1


def test_diagonal_pinch_separates():
    d = rasterize(S.ball(1.0), 0.5, (-2, -2, 2, 2))
    m = np.zeros_like(d.occupancy())
    m[2, 2] = m[3, 3] = True
    e = d.with_grid(RunGrid.from_dense(m))
    assert components(e).n == 2


def test_empty_occupancy(two_disks):
    g = two_disks.grid
    empty = two_disks.with_grid(g.select_runs(np.zeros(len(g.starts), dtype=bool)))
    with pytest.raises(DomainError, match="empty"):
        components(empty)


@settings(max_examples=25)
@given(st.lists(st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.05, 0.6)), min_size=1, max_size=5))
def test_masks_partition_the_domain(disks):
    spec = S.union([S.ball(r, (x, y)) for x, y, r in disks])
    d = rasterize(spec, 0.02, (-2.5, -2.5, 2.5, 2.5))
    rep = components(d)
    _, n = ndimage.label(d.occupancy())
    assert rep.n == n == len(rep.components)
    total = np.zeros(d.occupancy().shape, dtype=np.int64)
    for c in rep.components:
        total += c.occupancy()
    assert total.max() == 1
    assert np.array_equal(total.astype(bool), d.occupancy())
    assert sum(c.grid.count() for c in rep.components) == d.grid.count()
    assert rep.areas == sorted(rep.areas, reverse=True)


def test_count_bound_arithmetic():
    assert count_bound(2 * math.pi, 0.5) == pytest.approx(3200)


def test_count_and_separation_two_disks(two_disks):
    rep = components(two_disks, 0.5)
    c = check_count_bound(two_disks, 0.5, rep)
    assert c.passed and c.lhs == 2
    assert c.rhs == pytest.approx(3200, rel=0.01)
    s = check_separation_bound(two_disks, 0.5, rep)
    assert s.passed
    assert s.rhs == pytest.approx(0.5 / 70)


def test_single_component_is_vacuous(coarse_ball):
    assert check_count_bound(coarse_ball, 0.5).passed
    s = check_separation_bound(coarse_ball, 0.5)
    assert s.status == "vacuous" and not s.passed


def test_clipped_count_not_asserted(halfspace):
    assert check_count_bound(halfspace, 0.5).status == "clipped"


def test_close_disks_fail_certification_first():
    # gap 0.005: the domain is not flat at scale 0.5, so the bound never applies
    d = rasterize(S.disks([(0, 0), (2.005, 0)], 1.0), 0.001)
    rep = components(d, 0.5)
    assert rep.n == 2
    assert rep.min_pairwise_separation == pytest.approx(0.005, abs=0.0015)
    assert not certify(d, 1 / 400, 0.5, max_points=200).certified


@pytest.mark.slow
def test_components_of_certified_domain_are_flat_at_smaller_scale():
    h = 1e-5
    r0 = 1400 * h
    eps = 0.05
    d = rasterize(S.disks([(0, 0), (2.5, 0)], 1.0), h)
    assert certify(d, eps, r0, n_scales=1, max_points=200).certified
    rep = components(d, r0)
    assert check_count_bound(d, r0, rep).passed
    assert check_separation_bound(d, r0, rep).passed
    for u in rep.components:
        p = flatness_profile(u, r0 / 140, 1, max_points=100)
        # at 10 cells the grid staircase dominates; compare up to the margin
        assert p.sup_epsilon <= eps + p.margin
