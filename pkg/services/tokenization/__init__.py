"""Tokenización de referencia y vocabulario"""

from .tokenizer import (
    TokenSequence,
    Vocabulary,
    as_ids,
    detokenize,
    is_skip_position,
    tokenize,
)

__all__ = ['TokenSequence', 'Vocabulary', 'as_ids', 'detokenize', 'is_skip_position', 'tokenize']
