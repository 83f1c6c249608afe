from .base import InteractionRecord, RecordSource, ArrayDataset
from .binary import DatasetHeader, DatasetWriter, PokeDataset, read_header, read_record, write_records
from .generate import generate, iter_interactions, make_rng

__all__ = [
    "InteractionRecord", "RecordSource", "ArrayDataset", "DatasetHeader", "DatasetWriter",
    "PokeDataset", "read_header", "read_record", "write_records", "generate",
    "iter_interactions", "make_rng",
]
