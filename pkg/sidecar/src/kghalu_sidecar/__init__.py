"""HTTP sidecar serving sentence embeddings and entailment scores."""

from .app import create_app
from .config import SidecarConfig

__version__ = "0.1.0"
