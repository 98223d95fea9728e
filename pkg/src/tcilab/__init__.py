"""Numerical laboratory for transportation cost-information inequalities.

Exact Wasserstein/entropy computation on finite supports, inequality
checkers and constant estimators, dependent tensorization with constructive
couplings, random-dynamical-system and diffusion simulators, and
covariance-spectrum tools for path-space constants.
"""

from .spaces import (DiscreteMeasure, FiniteMetricSpace, LipschitzFunction,
                     PathGrid, bernoulli, lipschitz_regularize, path_distance,
                     product_space, trapezoid_weights)
from .transport import (TransportPlan, export_plan_csv, gaussian_kl, gaussian_w2,
                        kl_divergence, total_variation, wasserstein_exact)
from .tci import (T1Estimate, T1EstimatorConfig, TpCertificate, TpWitness,
                  bg_dual_gap, check_tp, entropy_pushforward_min,
                  estimate_t1_constant, pinsker_check, pushforward_constant,
                  tilt_family)
from .tensorize import (ContractionProfile, InvariantResult, SequentialModel,
                        backward_coefficients, dependent_hoeffding_bound,
                        entropy_chain_rule, forward_coefficient,
                        invariant_fixed_point, joint_law, marton_coupling,
                        martingale_constant, tensorized_constant, weight_vector)
from .dynamics import (BoundSpec, MarkovChainSampler, PathEnsemble,
                       QuadraticFunctional, RandomMapSystem, SdeSpec, SimConfig,
                       ar1_path_covariance, coupling_decay,
                       discrete_sde_t2_constant, euler_maruyama,
                       inf_convolution, l1_contraction_estimate,
                       noise_tail_condition, norm_vs_spectral_radius,
                       path_stream, tail_vs_bound, time_average_functional)
from .pathspace import (CovarianceKernel, GaussianMarginal, SpectrumResult,
                        alpha_squared, girsanov_entropy, jacobian_ode,
                        operator_spectrum, pathspace_t2_constants,
                        poincare_check, rayleigh_indicator,
                        shift_w2_certificate, tsirelson_check)
from .errors import (CapacityError, ContractionError, DivergenceError,
                     KernelError, SchemaError, SimulationBlowupError)

__version__ = "0.1.0"
