"""Box embeddings of images for asymmetric surface overlap."""

from ._core import (
    BoxIndex,
    CameraView,
    ConfigError,
    DataError,
    EmbeddingTable,
    GeometryError,
    Metrics,
    NsoConfig,
    OverlapRecord,
    QueryResult,
    TrainConfig,
    TrainingError,
    classify_relation,
    compute_nso,
    estimate_scale,
    evaluate,
    generate_dataset,
    load_table,
    make_pair,
    nbo,
    read_pairs_csv,
    save_table,
    sigma,
    train,
    volume,
    write_pairs_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
