"""Random Fourier feature classification with feature vectors sampled from
random Ry/CNOT quantum circuits."""

from .ansatz import AnsatzParams, FeatureBasis, sample_basis, sample_circuit
from .featmap import (MappedFeatures, approx_kernel, map_dataset, map_dataset_by_simulation,
                      normalize_points, sample_gaussian_basis)
from .kernels import BACKEND
from .linclf import LinearModel, accuracy, predict, train
from .qsim import Circuit, Cnot, RotationY

__version__ = "0.1.0"
