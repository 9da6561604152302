"""Feature reduction for quantum-kernel classification.

Reduces 67-feature collision events to a latent size a small simulated
quantum circuit can encode, then benchmarks classical and autoencoder
reducers through a kernel SVM trained on circuit-overlap Gram matrices.
"""

from .config import ALL_METHODS, PipelineConfig, load_config
from .data import FeatureMatrix, generate_synthetic
from .errors import QrdxError
from .pipeline import run_benchmark, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ALL_METHODS",
    "FeatureMatrix",
    "PipelineConfig",
    "QrdxError",
    "__version__",
    "generate_synthetic",
    "load_config",
    "run_benchmark",
    "run_pipeline",
]
