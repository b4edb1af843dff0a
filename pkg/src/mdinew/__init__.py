"""Measurement-device-independent nonlinear entanglement witnesses under
detection loopholes and noisy quantum inputs."""

from .errors import (
    ConfigError,
    DegenerateDenominatorError,
    IllConditionedError,
    InfeasibleCorruptionError,
    NotNPTError,
    ResidualTooLargeError,
)
from .loophole import EfficiencyModel, Verdict, certification_bound, certify, corrupt_probability, corrupt_table, offsets
from .protocol import ProbabilityTable, build_table, i_alpha, joint_distribution, max_entangled_effect, n_phi
from .quantum import DensityMatrix, DimSpec, PovmEffect, PureState, SeparableEnsemble, named_state
from .witness import InputBasis, WitnessBundle, make_bundle, nonlinear_value

__version__ = "0.1.0"
