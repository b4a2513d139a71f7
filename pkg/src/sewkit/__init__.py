"""sewkit: dyadic sewing of additive and multiplicative germs.

Turn approximately additive (or multiplicative) two-parameter maps into
their unique exact limits by midpoint refinement, with error certificates
from control-function summed moduli.  Ships germs for Young integration,
pathwise stochastic integration over sampled Brownian paths, matrix
product integrals with their Trotter splitting, and Lyons-type extension
of truncated signatures in the tensor algebra.
"""

__version__ = "0.1.0"

from .additive import AdditiveGerm, SewingResult, refine_once, riemann_sum, sew
from .control import (
    ControlFunction,
    custom_control,
    logpow_control,
    modulus_over_t_limit_check,
    power_control,
    summed_modulus,
    summed_modulus_series,
)
from .errors import (
    BootstrapError,
    GermEvaluationError,
    NonConvergenceError,
    PreconditionError,
    SewkitError,
)
from .germs import (
    AreaTable,
    StochasticGerm,
    build_area_table,
    scalar_field,
    stochastic_germ,
    stochastic_integral,
    young_germ,
    young_integral,
)
from .matops import expm, operator_norm
from .multiplicative import (
    MatrixOps,
    MonoidOps,
    MultiplicativeGerm,
    refine_once_mul,
    sew_mul,
    windowed_sew,
)
from .paths import SampledPath, estimate_holder, linear_path, path_from_function, poly_path, sample_brownian
from .prodint import (
    MatrixPath,
    TrotterStep,
    ode_residual,
    ode_solution,
    pair_product_germ,
    product_germ,
    product_integral,
    trotter_limit,
)
from .signature import (
    CallableFunctional,
    EnvelopeFit,
    ExtendedFunctional,
    GeodesicFunctional,
    GridSignature,
    TensorOps,
    TruncatedTensor,
    binomial_power_sum,
    chen_defects,
    decay_constants,
    eval_e_beta,
    extend_functional,
    growth_envelope,
    signature_from_json,
    signature_to_json,
    tensor_exp,
    tensor_log,
    tensor_multiply,
)

__all__ = [name for name in dir() if not name.startswith("_")]
