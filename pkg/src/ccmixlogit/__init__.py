"""Mixed logit estimation for matched case-control data."""

__version__ = "0.1.0"

from .dataset import CaseControlDataset, load_dataset, validate_matching, write_dataset  # noqa: E402
from .likelihood import ModelSpec, ParameterVector, RandomTerm  # noqa: E402
from .estimate import EstimationResult, OptimOptions, fit  # noqa: E402
from .quasirandom import HaltonConfig  # noqa: E402

__all__ = [
    "__version__",
    "CaseControlDataset",
    "load_dataset",
    "write_dataset",
    "validate_matching",
    "ModelSpec",
    "RandomTerm",
    "ParameterVector",
    "HaltonConfig",
    "EstimationResult",
    "OptimOptions",
    "fit",
]
