"""Distance-dependent CRP clustering with collapsed Gibbs and reversible-jump samplers."""

from .diagnostics import acceptance_report, esjd_k, ess, k_posterior, link_probabilities, map_partition, tv_distance
from .gibbs import run_gibbs
from .hyper import HyperConfig
from .models import GammaMarginalShapeModel, PoissonGammaModel
from .partition import MoveClass, classify_move, partition_from_assignments
from .predictive import PredictiveTask, predict_joint, predict_sequential
from .prior import DdcrpPrior, DecaySpec
from .proposals import BirthProposalConfig, IndependenceSpec, ResampleConfig
from .rjmcmc import LinkStrategy, RjConfig, run_rjmcmc
from .trace import ChainSettings, TraceStore

__version__ = "0.1.0"
