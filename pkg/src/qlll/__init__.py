"""Dense simulation of quantum local lemma resampling algorithms on small qubit systems."""

from .instance import DependencyGraph, Flaw, QsatInstance
from .io import load_instance, loads_instance, dumps_instance, save_instance

__version__ = "0.1.0"
