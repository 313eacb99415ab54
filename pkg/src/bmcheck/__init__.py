"""Brownian motion simulation and the affine-transform conformance toolkit.

The core question this package operationalizes: if a process is a Brownian
motion and its image under a map f is again a Brownian motion, then f must
be affine.  The toolkit simulates exact Brownian paths, applies transforms,
and provides two independent ways to detect non-affine maps: a statistical
battery on path ensembles and numerical diagnostics on the fields
themselves.
"""

from .conformance import (DriftEstimate, QVReport, TestReport,
                          conditional_mean_test, conformance_suite,
                          gaussian_marginal_test, holm_rejections,
                          increment_independence_test, qv_linearity,
                          stationarity_test, two_sample_test)
from .errors import (BmcheckError, ConfigInvalid, DegenerateDesign,
                     DegenerateSample, DimensionMismatch, DisconnectedMask,
                     HaloOutsideEvaluationDomain, NotDifferentiableHere,
                     NotPositiveDefinite, SingularCovariance,
                     UnsupportedFormat, WindowNotOnGrid)
from .pde import (GridDomain, JensenGapReport, ResidualReport, ball_volume,
                  ball_volume_mc, eikonal_residual, gradient_constancy,
                  jensen_gap, laplacian_residual, mean_value_check,
                  smoothing_representation_check)
from .process import (GaussianLaw, PathEnsemble, TimeGrid, apply_transform,
                      cholesky, load_ensemble, sample_paths, save_ensemble,
                      standard_law, transition_density)
from .scenario import (BUILTIN_SCENARIOS, RunReport, ScenarioConfig,
                       builtin_scenario, emit_report, run_scenario,
                       validate_config)
from .transforms import (AffineTransform, AxisPolynomial, ComponentView,
                         HarmonicField, HarmonicGallery, QuadraticForm,
                         RadialLift, RestrictedDomain, SphereMap, Transform,
                         affine_field, eikonal_profile, fd_gradient,
                         fd_laplacian, gradient, identity_transform,
                         laplacian, parse_transform)

__version__ = "0.1.0"
