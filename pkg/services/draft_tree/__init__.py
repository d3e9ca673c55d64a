"""Trie ponderado y árbol de borradores con máscara de atención"""

from .trie import (
    DraftTree,
    TrieNode,
    WeightedTrie,
    build_trie,
    position_offsets,
    select_top_k,
    tree_mask,
)

__all__ = [
    'DraftTree',
    'TrieNode',
    'WeightedTrie',
    'build_trie',
    'position_offsets',
    'select_top_k',
    'tree_mask',
]
