"""Simulation of entanglement swapping chains built from pulsed down-conversion sources."""

from .chain import (ChainConfig, MaximallyCorrelatedState, SwapAmplitudes, amplitude_T, coefficient_F1234,
                    coefficient_G, detection_probability, output_state, swap_amplitudes, visibility)
from .errors import (ConfigError, DegeneratePostselectionError, DimensionMismatchError, DivergentIntegralError,
                     DomainError, InvalidStateError, NumericError, ResolutionError, SwapError)
from .gaussform import ComplexQuadraticForm, integrate_all, marginalize, modulus, product
from .oracle import FockGrid, ModeNetwork, oracle_visibility, pair_time_correlation
from .spectra import SourceSpectra, SpectralProfile, eval_frequency, g_kernel, h_kernel
from .twoqubit import (TwoQubitState, bell_mixture_weights, concurrence, correlation_tensor,
                       entanglement_of_formation, max_bell_violation, partial_transpose_test, plane_criterion,
                       to_density_matrix)

__version__ = "0.1.0"
