"""Datastore multi-fuente con recuperación por sufijo"""

from .index import (
    Continuation,
    Datastore,
    DatastoreParams,
    RetrievalResult,
    SourceIndex,
    par_retrieve,
    suffix_retrieve,
)
from .builder import ExcludedSpan, build_common, build_repo, read_exclusion_file
from .storage import file_digest, load_datastore, save_datastore

__all__ = [
    'Continuation',
    'Datastore',
    'DatastoreParams',
    'ExcludedSpan',
    'RetrievalResult',
    'SourceIndex',
    'build_common',
    'build_repo',
    'file_digest',
    'load_datastore',
    'par_retrieve',
    'read_exclusion_file',
    'save_datastore',
    'suffix_retrieve',
]
