"""Implicit-feedback book recommendation and evaluation toolkit.

Fuses library circulation data with social-network reading data, trains
content-based and latent-factor recommenders, and scores them with top-k
ranking metrics.  See the README for the pipeline walkthrough.
"""

from .bpr import BprConfig, BprRecommender, LatentModel, bpr_fit, load_model, save_model
from .domain import Book, Interner, ItemType, Reading, ReadingsTable, Source
from .embed import (
    EmbeddingStore,
    Field,
    cosine,
    field_set_name,
    hash_embed,
    load_embeddings,
    metadata_summary,
    parse_fields,
    write_embeddings,
)
from .errors import (
    BookrecError,
    ColdStartError,
    CorruptInput,
    DimError,
    DivergenceError,
    EmptySummary,
    EvalError,
    FormatError,
    GridError,
    InvalidId,
    InvariantViolation,
    IoError,
    LinkError,
    MissingEmbedding,
    SchemaError,
    SplitError,
    UnknownUser,
)
from .eval import (
    EvalReport,
    SplitMode,
    SplitSpec,
    cohort_nrr,
    equal_count_bins,
    evaluate,
    evaluate_many,
    evaluate_rankings,
    first_rank,
    grid_search,
    nrr,
    precision,
    recall,
    split,
    timing,
    urr,
)
from .genres import (
    GenreConfig,
    GenreVoteMatrix,
    aggregate_genres,
    assign_top4,
    genre_distribution,
    prune_genres,
    shannon_entropy,
)
from .ingest import (
    Dataset,
    MergePolicy,
    Schema,
    build_readings,
    match_books,
    normalized_key,
    parse_table,
    read_catalog,
    read_readings,
    write_catalog,
    write_readings,
)
from .recsys import ClosestItems, MostReadItems, RandomItems, Recommender
from .synth import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
