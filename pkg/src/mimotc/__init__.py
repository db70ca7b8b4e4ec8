"""Transmission capacity of multi-antenna Poisson ad-hoc networks.

Monte Carlo simulation of partial zero-forcing receivers (nearest, CMSIR
and beamforming variants) together with closed-form outage and capacity
bounds.
"""

from .params import DimensionError, Mode, ParameterError, SystemParams
from .geometry import PointProcessSample, disk_radius, sample_interferers
from .channel import (ChannelDecomposition, EigenMoments, decompose, null_space_basis,
                      sample_complex_gaussian, wishart_eigen_moments)
from .receiver import (ChannelSet, SirSample, draw_channels, fast_sir, sir_cmsir,
                       sir_csit_bf, sir_no_csit_nearest, zf_vectors_nearest)
from .bounds import (PoutBounds, TcBounds, cancelable_count, gamma_ratio, gamma_ratio_bound,
                     optimal_design, pout_bounds, pout_bounds_csit, pout_bounds_no_csit,
                     tc_bounds, tc_bounds_csit, tc_bounds_no_csit)
from .montecarlo import (BracketNotFoundError, MonotonicityError, OutageCurve,
                         OutageEstimate, SimOptions, TcResult, estimate_outage,
                         find_lambda_star, simulate_sir, sweep)

__version__ = "0.1.0"
