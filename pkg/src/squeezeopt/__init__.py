"""Drive-pulse optimization for transient mechanical quadrature squeezing
in a driven, lossy optomechanical cavity.

The package simulates the linearized Gaussian dynamics (classical mean
fields plus ten second-order fluctuation moments), differentiates the
final-time quadrature variance with respect to piecewise-constant drive
amplitude/phase waveforms, and descends that gradient to shape pulses
that squeeze the mechanical mode below the zero-point variance.
"""

from .core import (
    InvalidParameter,
    MeanFieldState,
    MOMENT_LABELS,
    NumericalOverflow,
    Pulse,
    SqueezeOptError,
    SystemParams,
    symplectic_eigenvalues,
    thermal_initial_moments,
    validate_moments,
    validate_params,
)
from .dynamics import (
    MeanFieldTrajectory,
    MomentTrajectory,
    PropagatorGrid,
    drift_matrix,
    inhomogeneous_term,
    integrate_meanfield,
    integrate_moments,
    propagator_meanfield,
    propagator_moments,
    simulate,
)
from .analysis import (
    SqueezingReport,
    WignerField,
    covariance_from_moments,
    mechanism_variance,
    minimum_variance,
    quadrature_variance,
    squeezing_degree,
    variance_from_degree,
    wigner,
)
from .gradient import (
    ControlGradient,
    control_kick,
    finite_difference_gradient,
    loss_gradient,
    loss_value,
    sensitivity_matrix,
)
from .optimizer import (
    OptimizationResult,
    OptimizerConfig,
    descent_step,
    optimize,
    random_smooth_pulse,
)
from .oracle import FockConfig, fock_reference_moments

__version__ = "0.1.0"
