"""Run-length analysis for GWMA and EWMA control charts."""

__version__ = "0.1.0"

from .chart import (ChartSpec, EwmaParams, GwmaParams, LimitMode, ProcessModel, WeightProfile,
                    apply_chart, control_limits, ewma_statistic, ewma_variance_factor,
                    gwma_q_asymptotic, gwma_qt, gwma_statistic, gwma_weights)
from .errors import (CalibrationError, ConditioningError, EstimationError, HorizonError,
                     ParameterError, ResolutionError)
