"""Bundle-based hyperspectral unmixing with class- and atom-level sparsity."""
from .core import (
    DimensionError,
    GroupingMap,
    PixelBatch,
    SpectralBundles,
    Truth,
    aggregate_abundance,
    compose_r,
    equivalent_endmembers,
    reconstruct,
)
from .memm import MemmConfig, MemmSolution, solve_batch, solve_pixel, stack
from .baselines import BaselineConfig, fcls, run_baseline
from .metrics import EvalReport, evaluate
from .simgen import SimConfig, simulate

__version__ = "0.1.0"
