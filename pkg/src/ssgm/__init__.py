"""Self-similar Gaussian Markov processes: kernels, samplers, diagnostics."""

from .errors import NumericalError, ParameterError
from .gram import (GramMatrix, MinorQuery, PosDefReport, TimeGrid, build_gram,
                   chain_det, gram_to_csv, lindstrom_minor, minor_residual,
                   psd_check, standard_grid)
from .kernels import (CovKernel, Family, GFunction, ProcessSpec, eval_bifbm,
                      eval_canonical, eval_fbm, eval_l, eval_rl, eval_subfbm,
                      format_spec_string, isometry_residual, make_kernel,
                      parse_spec_string, rl_r11, volterra_g_variance,
                      volterra_kernel)
from .markov import (AsymReport, CanonicalFit, FactorizationResult,
                     MarkovReport, asym_coeff_estimate, doob_residual,
                     fit_canonical, gf_factorize, markov_test,
                     multiplicative_check, sqrt_diag_profile)
from .quadrature import QuadResult, adaptive_simpson, integrate_power_upper
from .samplers import (EmpiricalCov, PathEnsemble, SelfSimReport,
                       empirical_cov, ensemble_to_csv, load_ensemble,
                       sample_cholesky, sample_spec, sample_timechange,
                       sample_volterra_canonical, sample_volterra_zg,
                       sample_whitenoise, save_ensemble, selfsim_check,
                       set_max_workers)
from .variation import (ErgodicAverage, IncrementVariance, VariationReport,
                        ergodic_average, gaussian_abs_moment,
                        increment_variance, int_limit_residual,
                        pvariation_sum, pvariation_trichotomy,
                        variation_to_csv)

__version__ = "0.1.0"
