"""Stochastic discrete STDP on a network of binary neurons: exact simulation and slow-timescale analytics."""
from .model import NEVER, NetworkState, NeuronParams, PlasticityParams, WeightMatrix, config_probability, neuron_rate

__all__ = ["NEVER", "NetworkState", "NeuronParams", "PlasticityParams", "WeightMatrix",
           "config_probability", "neuron_rate"]
