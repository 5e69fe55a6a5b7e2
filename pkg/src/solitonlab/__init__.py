"""Numerical blow-up experiments for radial (4+1)-d Yang-Mills and charge-2 sigma-model solitons."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, FitFailureError, InsufficientDataError,  # noqa: E402
                     SingularityError, SolitonLabError, StencilError)
from .grid import (RadialField, RadialGrid, centered_d1, centered_d2, make_grid,  # noqa: E402
                   natural_radial_operator)
from .models import (GeodesicPrediction, ModelKind, ParabolicAnsatz, ansatz_residual,  # noqa: E402
                     ansatz_value, geodesic_prediction, rhs_acceleration)
from .stepper import (OuterBoundary, Profile, RunConfig, RunRecord, SimulationState,  # noqa: E402
                      Termination, apply_boundaries, init_state, run, step)
from .fitting import (ComparisonReport, EllipseFit, ParabolaFit, ProfileParabolaFit,  # noqa: E402
                      compare_run, fit_ellipse, fit_origin_parabola, fit_profile_parabola,
                      predicted_ellipse)
