"""Numerical dynamics of holomorphic self-maps of Hopf manifolds.

Hopf manifolds are realized as (C^k minus 0) / (z ~ lambda z) and self-maps as
homogeneous polynomial maps of C^k.  The package estimates dynamical degrees,
samples equilibrium measures by random backward iteration and probes their
ergodic properties (mixing rate, central limit theorem, moderateness).
"""

__version__ = "0.1.0"

from .geometry import (DomainError, HermitianForm, HopfParams, HopfPoint, chordal_distance, fs_pullback,
                       hopf_distance, metric_omega, mixed_discriminant, normalize, omega_prime)
from .maps import (ClassCertificate, HomogeneousMap, NumericError, certify_class, evaluate,
                   forward_orbit_with_jacobian, forward_step, general2d_map, jacobian, power_map,
                   random_triangular_map, triangular_map)
from .roots import univariate_roots
from .preimage import InverseBranchSet, backward_orbit, periodic_points, preimages, random_preimage
from .equilibrium import (Observable, SampleCloud, StartMeasure, builtin_observables, invariance_check,
                          nu_independence, sample_equilibrium, test_average)
from .degrees import DegreeReport, GrowthSeries, degree_report, growth_rate, growth_series, mass_estimate
from .ergodic import birkhoff_sums, clt_test, correlation_series, mixing_rate_check, moderate_check
from .plots import emit_plot
