from . import json as json
from . import experiments as experiments
from .config import Config as Config
from .ctx import has_lab_context as has_lab_context
from .errors import ConfigError, DomainError, Error, InvariantViolation, NumericalResolutionError
from .experiment import ExperimentConfig as ExperimentConfig
from .experiment import ExperimentResult as ExperimentResult
from .experiment import experiment as experiment
from .globals import current_lab as current_lab
from .lab import Lab as Lab
from .version import __version__

# flake8: noqa
__version__ = __version__
