"""spnn: privacy-preserving training of vertically partitioned neural networks.

The package splits a dense network across four roles: two data-holder clients
jointly compute the first affine layer under arithmetic secret sharing or
additive homomorphic encryption, a compute server runs the hidden stack, and
the label holder evaluates the prediction head.  A simulated network with
exact byte accounting and a TCP transport share one protocol implementation.
"""

from .fixedpoint import FixedPointCodec
from .protocol import (
    SessionResult,
    TrainConfig,
    VerticalData,
    hidden_features,
    predict_proba,
    run_session,
)

__all__ = [
    "FixedPointCodec",
    "SessionResult",
    "TrainConfig",
    "VerticalData",
    "hidden_features",
    "predict_proba",
    "run_session",
]
__version__ = "0.1.0"
