"""Self-supervised pretraining for graph convolutional node classifiers.

The package implements, from scratch on numpy arrays: a small
reverse-mode differentiation engine over dense and CSR-sparse matrices,
a two-layer GCN, link-prediction pretraining with edge-removal and
feature-covering input corruption, weight transfer with semi-supervised
fine-tuning, and a seeded multi-run experiment harness with paired
t-tests.
"""

from .data_io import load_dataset, store_dataset, validate_against_reference
from .errors import SslGcnError
from .graph import Graph, NormalizedAdjacency, adjacency_dense, degree_stats, normalize_adjacency
from .model import (GcnClassifier, GcnEncoder, WeightSnapshot, glorot_init,
                    random_snapshot, transfer_weights)
from .optim import AdamState, adam_step
from .rng import Rng
from .sparse import SparseMatrix, spmm
from .ssl_task import SslConfig, SslInput, Strategy, build_ssl_input, positive_weight
from .stats import paired_t_test
from .tensor import Parameter, Tape, Tensor, backward
from .train import (ExperimentConfig, FinetuneConfig, PretrainConfig, RunReport,
                    evaluate_accuracy, export_embeddings, finetune, pretrain,
                    run_experiment, sweep)

__version__ = "0.1.0"
