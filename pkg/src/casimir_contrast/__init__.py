"""Lifshitz fluctuation energies by expansion in the dielectric contrast."""
from .errors import (BranchViolation, CasimirError, ContactError, ConvergenceFailure, DomainError, EigenFailure,
                     GridTooCoarse, IllConditioned, NoPlasmaFrequency, NonMonotoneConvergence, StaticDivergence,
                     TableRange)
from .exact_planar import (EnergyBreakdown, PlanarScenario, conductor_limit_study, exact_lifshitz_energy,
                           figure2_table, l_kernel_energy, perfect_conductor_energy, pws_planar_energy,
                           ratio_crossover, taylor_in_contrast)
from .layered_engine import (Layer, LayeredScenario, MixedGreenEntry, ModeMatrix, build_mode_matrix,
                             convergence_report, interaction_logdet, interaction_series, mixed_green, trace_powers)
from .materials import (DielectricModel, Units, cm_contrast, delta_epsilon, epsilon_at, figure2_model,
                        plasma_wavelength)
from .quadrature import QuadratureSpec, integrate_interval, integrate_nested, integrate_semi_infinite
from .rough_surface import HeightMap, RoughScenario, e2_proximity, e2_pws, e2_rough
from .specfun import KernelEvalControls, L_kernel, W_kernel, exp_integral_En, incomplete_gamma0

__version__ = "0.1.0"
