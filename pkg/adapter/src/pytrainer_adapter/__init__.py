"""Reference external trainer for the topicforge stdio protocol."""

from .model import HashedLogisticModel, IncrementalModel
from .server import ProtocolServer, main

__version__ = "0.1.0"

__all__ = ["HashedLogisticModel", "IncrementalModel", "ProtocolServer", "main"]
