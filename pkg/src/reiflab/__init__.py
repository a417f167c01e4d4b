"""Reifenberg-flat domain toolkit.

Raster domains, boundary flatness certification, explicit curves between
interior points, and numerical checks of the inequalities that relate
flatness, radii, components and Hausdorff distances.
"""
from . import kernels
from .components import ComponentReport, check_count_bound, check_separation_bound, components
from .domains import Domain, DomainError, DomainSpec, boundary_samples, complement, nearest_boundary_point, rasterize
from .flatness import (
    Certificate,
    FlatnessError,
    FlatnessReport,
    FlatnessSample,
    Violation,
    best_hyperplane,
    certify,
    flatness_profile,
    normal_angle_check,
    separation_check,
    separation_propagation_check,
)
from .geometry import GeometryError, Hyperplane, angle_cosine, dist_point_set, hausdorff
from .jones import (
    CigarReport,
    JonesError,
    Polyline,
    check_chain,
    empirical_jones_constant,
    gamma_chain,
    jones_curve,
    verify_curve,
    y_point,
)
from .metrics import (
    DistanceReport,
    RadiiReport,
    check_boundary_vs_sets,
    check_inner_radius_bound,
    check_measure_bounds,
    domain_distance,
    radii,
    symmetric_difference_measure,
    unit_ball_volume,
)
from .render import render

__version__ = "0.1.0"
