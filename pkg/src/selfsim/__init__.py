"""Certified numerics for self-similar sets in the plane.

Builds iterated function systems from exact rational data, computes certified
distances and nearest-point structure on their attractors, analyses convex
hulls, and runs the interval-refinement construction for rotation families
with uncountably many critical values.
"""

from .distance_engine import (
    CriticalityStatus,
    critical_scan,
    distance_to_attractor,
    near_set,
)
from .errors import (
    BudgetExceeded,
    CertificationFailed,
    ConfigError,
    DomainViolation,
    HypothesisViolation,
    SearchExhausted,
)
from .ifs_core import (
    IFS,
    Similarity,
    attractor_cloud,
    cantor_ifs,
    ifs_from_json,
    load_ifs,
    rot_pair_ifs,
    segment_ifs,
    sierpinski_ifs,
)
from .hull_analysis import (
    cuts_well_disk,
    edge_directions_match,
    gamma_estimate,
    hull_census,
)
from .kalpha import (
    CertificateVerdict,
    CheckVerdict,
    KAlphaConfig,
    certificate_check,
    check_ball_separation,
    check_cr,
    check_sqrt_bounds,
    critical_family,
    kappa_search,
    refine,
)
from .precision import DEFAULT_BITS, AngleRep, CertInterval, Ordering, trig_eval

__all__ = [
    "AngleRep",
    "BudgetExceeded",
    "CertInterval",
    "CertificateVerdict",
    "CertificationFailed",
    "CheckVerdict",
    "ConfigError",
    "CriticalityStatus",
    "DEFAULT_BITS",
    "DomainViolation",
    "HypothesisViolation",
    "IFS",
    "KAlphaConfig",
    "Ordering",
    "SearchExhausted",
    "Similarity",
    "attractor_cloud",
    "cantor_ifs",
    "certificate_check",
    "check_ball_separation",
    "check_cr",
    "check_sqrt_bounds",
    "critical_family",
    "critical_scan",
    "cuts_well_disk",
    "distance_to_attractor",
    "edge_directions_match",
    "gamma_estimate",
    "hull_census",
    "ifs_from_json",
    "kappa_search",
    "load_ifs",
    "near_set",
    "refine",
    "rot_pair_ifs",
    "segment_ifs",
    "sierpinski_ifs",
    "trig_eval",
]
