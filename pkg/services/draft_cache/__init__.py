"""Caché de recuperación y missing table por sesión"""

from .cache import (
    MissingTable,
    RetrievalCache,
    cache_insert_output,
    cache_insert_verified,
    cache_search,
    dump_session,
    missing_add,
    missing_contains,
)

__all__ = [
    'MissingTable',
    'RetrievalCache',
    'cache_insert_output',
    'cache_insert_verified',
    'cache_search',
    'dump_session',
    'missing_add',
    'missing_contains',
]
