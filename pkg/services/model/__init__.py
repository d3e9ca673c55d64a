"""Contrato del modelo objetivo y modelo n-grama de referencia"""

from .ngram_model import ReferenceNgramModel, train_ngram
from .target_model import (
    Predictions,
    TargetModel,
    VerificationResult,
    predict_tree,
    verify,
)

__all__ = [
    'Predictions',
    'ReferenceNgramModel',
    'TargetModel',
    'VerificationResult',
    'predict_tree',
    'train_ngram',
    'verify',
]
