"""Greedy deep dictionary learning.

Dictionaries are learnt one layer at a time: every layer but the last is a
dense least-squares factorization, the last one is sparse (l1, solved with
ISTA). Features of unseen samples are obtained by coding through the frozen
stack, and compared with a 1-nearest-neighbour classifier.
"""

from deepdict.exceptions import (
    DataFormatError,
    DegenerateDataError,
    DeepDictError,
    DimensionError,
)
from deepdict.dataio import read_amat, read_idx_images, read_idx_labels, write_amat
from deepdict.shallow import (
    LayerTrainConfig,
    estimate_step,
    ista_sparse_code,
    normalize_columns,
    qr_init,
    soft_threshold,
    solve_coefficients_dense,
    train_layer_dense,
    train_layer_sparse,
    update_dictionary,
)
from deepdict.deep import (
    DeepDictModel,
    DeepTrainConfig,
    Layer,
    collapse_check,
    encode,
    reconstruct,
    train_deep,
)
from deepdict.classify import EvalReport, accuracy, knn1_classify
from deepdict.persist import load_features, load_model, save_features, save_model

__version__ = "0.1.0"
