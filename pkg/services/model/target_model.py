"""
Contrato del modelo objetivo y verificación greedy del árbol de borradores
"""

import logging
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

from services.draft_tree.trie import DraftTree
from services.errors import MismatchedPredictionsError
from services.tokenization.tokenizer import TokenLike, as_ids

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Predictions:
    """Predicción greedy en la raíz y en cada nodo del árbol"""

    at_root: int
    at_node: Tuple[int, ...] = ()


@dataclass(frozen=True)
class VerificationResult:
    accepted: Tuple[int, ...]
    bonus: int
    accepted_node_path: Tuple[int, ...]

    @property
    def emitted(self) -> Tuple[int, ...]:
        return self.accepted + (self.bonus,)


class TargetModel(ABC):
    """
    Modelo objetivo greedy y determinista

    La predicción en un nodo depende solo de (contexto + camino raíz-nodo); los
    hermanos y primos quedan aislados como con la máscara de atención en árbol.
    Una sesión de decodificación usa la instancia en exclusiva.
    """

    end_token: Optional[int] = None

    def __init__(self):
        self.forward_count = 0
        self._count_lock = threading.Lock()

    def predict_tree(self, context: TokenLike, tree: DraftTree) -> Predictions:
        """
        Un paso forward sobre el contexto y el árbol de borradores

        Args:
            context: Contexto actual
            tree: Árbol de borradores (vacío = paso autorregresivo)

        Returns:
            Predictions con una predicción por nodo
        """
        predictions = self.forward(as_ids(context), tree)
        if len(predictions.at_node) != len(tree):
            raise MismatchedPredictionsError(
                f"El modelo devolvió {len(predictions.at_node)} predicciones para {len(tree)} nodos"
            )
        with self._count_lock:
            self.forward_count += 1
        return predictions

    @abstractmethod
    def forward(self, context_ids: Tuple[int, ...], tree: DraftTree) -> Predictions:
        """Implementación concreta del paso forward"""


def predict_tree(model: TargetModel, context: TokenLike, tree: DraftTree) -> Predictions:
    return model.predict_tree(context, tree)


def verify(tree: DraftTree, preds: Predictions) -> VerificationResult:
    """
    Acepta tokens del borrador hasta el primer error

    Args:
        tree: Árbol verificado
        preds: Predicciones del modelo sobre ese árbol

    Returns:
        VerificationResult con el prefijo aceptado y el token bonus
    """
    if len(preds.at_node) != len(tree):
        raise MismatchedPredictionsError(
            f"{len(preds.at_node)} predicciones para un árbol de {len(tree)} nodos"
        )
    children = tree.children()
    accepted, path = [], []
    current, prediction = -1, preds.at_root
    while True:
        child = children.get(current, {}).get(prediction)
        if child is None:
            break
        accepted.append(tree.tokens[child])
        path.append(child)
        current, prediction = child, preds.at_node[child]
    return VerificationResult(tuple(accepted), prediction, tuple(path))
