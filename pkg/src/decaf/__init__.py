"""Counterfactual-guided debugging for simulated cyber-physical systems.

Pipeline: falsification-driven test generation (simulated annealing on STL
robustness), causal-model learning (M5 model tree / random forest),
counterfactual generation (random search, genetic algorithm, KD-tree
nearest passing neighbors, all simulator-validated), and success-assertion
inference with temporal translation.
"""

__version__ = "0.1.0"

from .signals import InputSpec, SignalSpec, TestInput  # noqa: F401
from .stl import Trace, parse, robustness, verdict  # noqa: F401
from .plants import Plant, Requirement, get_plant, plant_names, simulate  # noqa: F401
from .testgen import SAParams, TrainingSet, build_training_set  # noqa: F401
from .learn import CausalModel, make_causal_model, transform  # noqa: F401
from .cfgen import CFParams, Counterfactual, generate, select, validate  # noqa: F401
from .assertions import Assertion, infer, prune, translate  # noqa: F401
from .config import RunConfig, load_config  # noqa: F401
