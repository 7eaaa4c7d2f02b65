"""Koopman-operator estimation of conditional statistics under partial observation."""
from .dictionary import Dictionary, delay_dictionary, dual_normalization, monomial_dictionary
from .edmd import EdmdOptions, KoopmanMatrix, RankDeficientError, fit_koopman, predict_statistic
from .generator import (GeneratorMatrix, ReferenceKoopman, build_generator, propagate_coefficients_cn,
                        reference_koopman, validate_against_rk4)
from .mori_zwanzig import GleSolution, MzSplit, integrate_gle, memory_kernel, noise_term, split_generator
from .powerlaw import PowerLawFit, fit_power_law
from .simulate import (SimConfig, SimulationDivergence, SnapshotPairs, TrajectoryDataset, make_delay_pairs,
                       make_fullstate_pairs, simulate_dataset)
from .systems import (MultiIndexPolynomial, SdeSystem, make_linear, make_lorenz, make_modified_vdp,
                      make_ornstein_uhlenbeck, make_system, make_van_der_pol)

__version__ = "0.1.0"
