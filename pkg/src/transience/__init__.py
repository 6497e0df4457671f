"""Transience analysis of lambda-sink semi-Markov decision processes."""

from .model import Action, ModelError, Smdp, load_model, dump_model, validate, reduce_costs
from .rates import Regime

__all__ = ["Action", "ModelError", "Smdp", "load_model", "dump_model", "validate",
           "reduce_costs", "Regime"]
__version__ = "0.1.0"
