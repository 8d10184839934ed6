"""Node embeddings trained to reproduce a chosen node-similarity distribution."""

__version__ = "0.1.0"

from .errors import CapExceededError, ConfigError, GraphFormatError, InputError, ModelFormatError, SimEmbedError
from .graph import Graph, load_edge_list, watts_strogatz, write_edge_list
from .similarity import (
    Order,
    SimilaritySpec,
    alpha_for_window,
    exact_ppr_row,
    exact_row,
    exact_rows,
    exact_simrank_matrix,
    parse_spec,
    sample,
    sample_adjacency,
    sample_ppr,
    sample_simrank,
)
from .storage import load_model, save_model
from .trainer import EmbeddingModel, TrainConfig, init_model, kl_objective, nce_update, train_fverse, train_verse
