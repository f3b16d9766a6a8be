"""Hyperspectral band selection with a dropout-gated concrete autoencoder.

Per-band keep probabilities are learned through a binary-concrete relaxation
with temperature annealing while a small decoder reconstructs the spectrum
from the gated input; the k bands with the highest keep probabilities are the
selected subset, evaluated downstream with a linear SVM and OA/AA/Kappa.
"""

__version__ = "0.1.0"

from .concrete import (AnnealSchedule, SelectorParams, binary_concrete_grad,
                       sample_binary_concrete, sample_concrete_softmax,
                       temperature_at)
from .data import (HsiCube, HsiMatrix, SplitSpec, flatten_labeled, read_hsic,
                   remove_bands, split, synth_scene, write_hsic)
from .errors import (DataError, DimensionError, DomainError, DropcaeError,
                     FormatError, ParameterError, TrainingError)
from .eval import (ConfusionMatrix, EvalReport, LinearSvm, band_entropy,
                   confusion, evaluate_subset, metrics, predict,
                   train_linear_svm)
from .model import (SCHEDULE_PRESETS, BandSubset, DropoutCae, TrainConfig,
                    TrainingTrace, select_bands, train)
from .numerics import (AdamState, DenseLayer, adam_step, dense_backward,
                       dense_forward, matmul, milestone_lr)
