# SPDX-License-Identifier: MIT
"""File readers for datasets, splits, clusterings and association inputs."""

from .femb import load_dataset, read_femb, read_metadata_csv
from .tables import read_boxes_json, read_clustering_csv, read_sets_json, read_splits_csv

__all__ = [
    "load_dataset",
    "read_femb",
    "read_metadata_csv",
    "read_boxes_json",
    "read_clustering_csv",
    "read_sets_json",
    "read_splits_csv",
]
