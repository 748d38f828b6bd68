# SPDX-License-Identifier: MIT
"""File writers; every writer goes through a temp file and an atomic rename."""

from .atomic import AtomicFile, write_json
from .femb import save_dataset, write_femb, write_metadata_csv
from .tables import (
    write_clustering_csv,
    write_cmc_csv,
    write_ident_csv,
    write_merge_trace_csv,
    write_rows_csv,
    write_splits_csv,
    write_sweep_csv,
)

__all__ = [
    "AtomicFile",
    "write_json",
    "save_dataset",
    "write_femb",
    "write_metadata_csv",
    "write_clustering_csv",
    "write_cmc_csv",
    "write_ident_csv",
    "write_merge_trace_csv",
    "write_rows_csv",
    "write_splits_csv",
    "write_sweep_csv",
]
