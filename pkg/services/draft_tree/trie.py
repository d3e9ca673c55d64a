"""
Trie ponderado sobre los resultados de recuperación y árbol de borradores aplanado
El peso de cada nodo es alpha * t_r + beta * t_c, donde t_r y t_c son las veces que
el prefijo aparece en los resultados de D_r y D_c
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from services.datastore.index import RetrievalResult
from services.errors import EmptyDraftError

logger = logging.getLogger(__name__)

DEFAULT_DRAFT_BUDGET = 64
RANK_DENOMINATOR = 10**6


@dataclass
class TrieNode:
    token: int
    t_r: int = 0
    t_c: int = 0
    weight: float = 0.0
    children: Dict[int, "TrieNode"] = field(default_factory=dict)

    def get_child(self, token: int) -> "TrieNode":
        if token not in self.children:
            self.children[token] = TrieNode(token=token)
        return self.children[token]


@dataclass
class WeightedTrie:
    root: TrieNode
    alpha: float
    beta: float

    def node(self, prefix: Sequence[int]) -> TrieNode:
        node = self.root
        for token in prefix:
            node = node.children[token]
        return node

    def node_count(self) -> int:
        count, stack = 0, [self.root]
        while stack:
            node = stack.pop()
            count += len(node.children)
            stack.extend(node.children.values())
        return count

    def rank_key(self) -> Callable[[int, int], Fraction]:
        """
        Peso exacto alpha * t_r + beta * t_c para ordenar

        Los coeficientes se normalizan por el mayor y se aproximan por una fracción
        de denominador acotado, de modo que (c*alpha, c*beta) produce la misma clave
        que (alpha, beta) y los empates entre conteos enteros son exactos.
        """
        scale = max(self.alpha, self.beta)
        if scale == 0:
            return lambda t_r, t_c: Fraction(0)
        a = Fraction(self.alpha / scale).limit_denominator(RANK_DENOMINATOR)
        b = Fraction(self.beta / scale).limit_denominator(RANK_DENOMINATOR)
        return lambda t_r, t_c: a * t_r + b * t_c


def build_trie(r_repo: RetrievalResult, r_common: RetrievalResult, alpha: float = 1.0, beta: float = 1.0) -> WeightedTrie:
    """
    Construye el Trie ponderado

    Args:
        r_repo: Resultado de D_r (o de la caché)
        r_common: Resultado de D_c
        alpha: Coeficiente de los conteos del repositorio
        beta: Coeficiente de los conteos comunes

    Returns:
        WeightedTrie con pesos por nodo
    """
    if alpha < 0 or beta < 0:
        raise ValueError(f"alpha y beta deben ser >= 0: alpha={alpha}, beta={beta}")
    if not r_repo and not r_common:
        raise EmptyDraftError()

    root = TrieNode(token=-1)
    for result in (r_repo, r_common):
        for cont in result.continuations:
            node = root
            for token in cont.tokens:
                node = node.get_child(token)
                node.t_r += cont.count_repo
                node.t_c += cont.count_common

    stack = list(root.children.values())
    while stack:
        node = stack.pop()
        node.weight = alpha * node.t_r + beta * node.t_c
        stack.extend(node.children.values())
    return WeightedTrie(root=root, alpha=alpha, beta=beta)


@dataclass(frozen=True, eq=False)
class DraftTree:
    """Nodos en orden BFS; parents[i] < i; mask y positions derivados de parents"""

    tokens: Tuple[int, ...]
    parents: Tuple[int, ...]
    mask: np.ndarray
    positions: Tuple[int, ...]

    @classmethod
    def from_parents(cls, tokens: Sequence[int], parents: Sequence[int]) -> "DraftTree":
        tokens, parents = tuple(int(t) for t in tokens), tuple(int(p) for p in parents)
        if len(tokens) != len(parents):
            raise ValueError("tokens y parents deben tener la misma longitud")
        for i, parent in enumerate(parents):
            if not -1 <= parent < i:
                raise ValueError(f"parent[{i}] = {parent} no precede al nodo")
        return cls(tokens, parents, _ancestor_mask(parents), _depth_offsets(parents))

    @classmethod
    def empty(cls) -> "DraftTree":
        return cls.from_parents((), ())

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def depth(self) -> int:
        return max(self.positions) + 1 if self.positions else 0

    def path(self, node: int) -> Tuple[int, ...]:
        """Tokens desde la raíz hasta el nodo, ambos incluidos"""
        path = []
        while node >= 0:
            path.append(self.tokens[node])
            node = self.parents[node]
        return tuple(reversed(path))

    def children(self) -> Dict[int, Dict[int, int]]:
        """parent -> {token: índice del primer hijo con ese token}; -1 es la raíz"""
        children: Dict[int, Dict[int, int]] = {}
        for i, (token, parent) in enumerate(zip(self.tokens, self.parents)):
            children.setdefault(parent, {}).setdefault(token, i)
        return children

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "parents": list(self.parents),
            "positions": list(self.positions),
            "mask": ["".join(str(int(v)) for v in row) for row in self.mask],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _ancestor_mask(parents: Sequence[int]) -> np.ndarray:
    n = len(parents)
    mask = np.eye(n, dtype=np.uint8)
    for i, parent in enumerate(parents):
        if parent >= 0:
            mask[i] |= mask[parent]
    return mask


def _depth_offsets(parents: Sequence[int]) -> Tuple[int, ...]:
    offsets: List[int] = []
    for parent in parents:
        offsets.append(0 if parent < 0 else offsets[parent] + 1)
    return tuple(offsets)


def tree_mask(tree: DraftTree) -> np.ndarray:
    """mask[i][j] = 1 si j == i o j es ancestro de i"""
    return _ancestor_mask(tree.parents)


def position_offsets(tree: DraftTree) -> List[int]:
    """offsets[i] = profundidad(i) - 1"""
    return list(_depth_offsets(tree.parents))


def select_top_k(trie: WeightedTrie, k: int = 10, budget: int = DEFAULT_DRAFT_BUDGET) -> DraftTree:
    """
    Selecciona los k caminos raíz-hoja de mayor peso y los aplana

    Args:
        trie: Trie ponderado
        k: Número de caminos
        budget: Máximo de nodos del árbol resultante

    Returns:
        DraftTree con a lo sumo budget nodos y cierre de ancestros
    """
    if k < 1 or budget < 1:
        raise ValueError(f"k y budget deben ser >= 1: k={k}, budget={budget}")

    rank = trie.rank_key()

    # conteos enteros acumulados por camino; el peso se evalúa una sola vez por hoja
    leaves: List[Tuple[Fraction, Tuple[int, ...]]] = []
    stack = [(child, (token,), child.t_r, child.t_c) for token, child in trie.root.children.items()]
    while stack:
        node, prefix, sum_r, sum_c = stack.pop()
        if not node.children:
            leaves.append((rank(sum_r, sum_c), prefix))
            continue
        for token, child in node.children.items():
            stack.append((child, prefix + (token,), sum_r + child.t_r, sum_c + child.t_c))
    leaves.sort(key=lambda leaf: (-leaf[0], leaf[1]))

    selected = set()
    for _, prefix in leaves[:k]:
        for depth in range(1, len(prefix) + 1):
            selected.add(prefix[:depth])

    # BFS sobre los nodos seleccionados; hermanos por peso descendente y luego token
    order: List[Tuple[Tuple[int, ...], TrieNode]] = []
    frontier = [((), trie.root)]
    while frontier:
        next_frontier = []
        for prefix, node in frontier:
            kids = sorted(node.children.items(), key=lambda item: (-rank(item[1].t_r, item[1].t_c), item[0]))
            for token, child in kids:
                child_prefix = prefix + (token,)
                if child_prefix in selected:
                    order.append((child_prefix, child))
                    next_frontier.append((child_prefix, child))
        frontier = next_frontier

    if len(order) > budget:
        # el peso no crece con la profundidad, así que el recorte conserva los ancestros
        ranked = sorted(range(len(order)), key=lambda i: (-rank(order[i][1].t_r, order[i][1].t_c), i))
        keep = set(ranked[:budget])
        order = [entry for i, entry in enumerate(order) if i in keep]

    index_of = {prefix: i for i, (prefix, _) in enumerate(order)}
    tokens = [prefix[-1] for prefix, _ in order]
    parents = [index_of[prefix[:-1]] if len(prefix) > 1 else -1 for prefix, _ in order]
    return DraftTree.from_parents(tokens, parents)
