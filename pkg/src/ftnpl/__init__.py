"""Game dynamics with a neural mediator.

Follow-the-leader style learners (regularized, perturbed, and a queue-based
variant whose game is perturbed by codes from a small stochastic mediator
network) on matching pennies, a 1-D GAN and a CircleWorld imitation task.
"""
from ._jit import NUMBA_ENABLED
from .analytics import RunSummary, TrajectoryLog, convergence_verdict, cycle_score
from .config import ExperimentConfig
from .errors import ConfigError, FtnplError, NumericError, PreconditionError
from .games import DiscretePennies, PenniesGame, ToyGanGame
from .learners import HistoryQueue, LearnerConfig
from .mediator import MediatorPolicy, marginal_gains, mediator_reward, mediator_update

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED",
    "ConfigError",
    "FtnplError",
    "NumericError",
    "PreconditionError",
    "ExperimentConfig",
    "PenniesGame",
    "DiscretePennies",
    "ToyGanGame",
    "HistoryQueue",
    "LearnerConfig",
    "MediatorPolicy",
    "marginal_gains",
    "mediator_reward",
    "mediator_update",
    "TrajectoryLog",
    "RunSummary",
    "convergence_verdict",
    "cycle_score",
]
