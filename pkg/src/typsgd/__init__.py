"""Typicality-sampled minibatch SGD with a verifiable error analysis.

The package splits a training set into a high-representative stratum and a
remainder via t-SNE + kernel density estimation, draws stratified batches
that oversample the dense stratum, and provides exact enumeration oracles
for every closed-form gradient-error expectation used to justify the
scheme.
"""

__version__ = "0.1.0"

from . import (  # noqa: E402,F401
    analysis,
    benchmark,
    data,
    density,
    embedding,
    models,
    optimize,
    sampling,
    verify,
)
from .errors import (  # noqa: F401
    CapabilityError,
    CsvFormatError,
    InvalidArgumentError,
    NumericError,
    TypsgdError,
)
