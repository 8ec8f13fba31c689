"""Wideband sub-THz ISAC hybrid-precoding laboratory."""

from .model import (ChannelRealization, CommChannel, SensingScene, SystemConfig,
                    msia, sample_realization, steering_vector,
                    subcarrier_frequency)
from .metrics import (PerformancePoint, SingularFisher, crb, cs_correlation,
                      evaluate, rate)
from .precoder import (PhaseShifters, PowerAllocation, PrecoderState, TtdGrid,
                       effective_precoder, ttd_phase_profile, ttd_quantize)
from .schemes import Infeasible, OptimizerConfig, SCHEMES
from .pareto import ParetoRegion, dual_gain, trace_boundary

__all__ = [
    "ChannelRealization", "CommChannel", "SensingScene", "SystemConfig",
    "PerformancePoint", "SingularFisher", "PhaseShifters", "PowerAllocation",
    "PrecoderState", "TtdGrid", "Infeasible", "OptimizerConfig", "SCHEMES",
    "ParetoRegion", "msia", "sample_realization", "steering_vector",
    "subcarrier_frequency", "crb", "cs_correlation", "evaluate", "rate",
    "effective_precoder", "ttd_phase_profile", "ttd_quantize", "dual_gain",
    "trace_boundary",
]
