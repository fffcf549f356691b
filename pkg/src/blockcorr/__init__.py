"""Block correlation matrices of correlated time series: sampling, deterministic equivalents, diagnostics."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlockCorrError, DimensionError, DomainError, GridError, NoConvergence, NonPositiveVariance,
    NotPositiveDefinite, ParseError, PositivityError, SingularBlockError,
)
from .tsmodel import CovarianceModel, Ensemble, ModelBank, sample_ensemble  # noqa: E402
from .mplaw import MPLaw  # noqa: E402
from .detequiv import solve_canonical, sq_dev_integral, trace_stieltjes  # noqa: E402
