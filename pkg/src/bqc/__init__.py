"""Bayesian quantum circuits: a latent-variable generative model on a state-vector simulator."""
from .circuits import AnsatzLayout, Circuit, GateSpec, ParameterSet, build_bqc, build_qcbm_baseline, run
from .distribution import DiscreteDistribution, total_variation
from .loss import KernelSpec, mmd
from .probability import RegisterSplit
from .statevector import EXACT, StateVector
from .trainer import TrainConfig, TrainReport, train

__all__ = [
    "AnsatzLayout", "Circuit", "DiscreteDistribution", "EXACT", "GateSpec", "KernelSpec",
    "ParameterSet", "RegisterSplit", "StateVector", "TrainConfig", "TrainReport",
    "build_bqc", "build_qcbm_baseline", "mmd", "run", "total_variation", "train",
]
