"""Multi-objective feature selection that keeps activity recognition and
suppresses user identification in chest-worn respiration signals."""
from vitalselect._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
