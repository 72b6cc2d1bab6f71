"""
Reference implementations used to validate the concurrent engines.

Nothing here shares code with the engines: counting goes through an
adjacency matrix (dense bit-matrix or a degree-oriented sparse matrix), and
the pipeline's partition relation is replayed sequentially.
"""
import logging
from collections import defaultdict
from itertools import combinations
from typing import Dict, List, NamedTuple, Set, Tuple

import numpy as np
from scipy import sparse

from .graph_core import EdgeStream, NodeId, PathTriple, edge_array

logger = logging.getLogger(__name__)

# Graphs with at most this many vertices are counted with a dense bit-matrix.
DENSE_NODE_LIMIT = 4096


class Triangle(NamedTuple):
    a: NodeId
    b: NodeId
    c: NodeId


class PartitionEntry(NamedTuple):
    responsible: NodeId
    adjacency: Tuple[NodeId, ...]


PartitionResult = List[PartitionEntry]


def _compact(array: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    """Relabel endpoints to ``0..n-1``; returns (rows, cols, n)."""
    labels, inverse = np.unique(array, return_inverse=True)
    inverse = inverse.reshape(array.shape)
    return inverse[:, 0], inverse[:, 1], len(labels)


def count_triangles_exact(edges: EdgeStream, dense_limit: int = DENSE_NODE_LIMIT) -> int:
    array = edge_array(edges)
    if len(array) < 3:
        return 0
    rows, cols, n = _compact(array)
    if n <= dense_limit:
        # float32 is exact here: every entry of A @ A is at most n <= 2**24.
        matrix = np.zeros((n, n), dtype=np.float32)
        matrix[rows, cols] = 1
        matrix[cols, rows] = 1
        closed = (matrix @ matrix) * matrix
        return int(round(closed.sum(dtype=np.float64) / 6))
    # Orient every edge from lower to higher (degree, id); each triangle is then
    # a unique u->w->v, u->v pattern.
    degree = np.bincount(np.concatenate([rows, cols]), minlength=n)
    rank = np.lexsort((np.arange(n), degree))
    position = np.empty(n, dtype=np.int64)
    position[rank] = np.arange(n)
    forward = position[rows] < position[cols]
    src = np.where(forward, rows, cols)
    dst = np.where(forward, cols, rows)
    oriented = sparse.csr_matrix((np.ones(len(src), dtype=np.int64), (src, dst)), shape=(n, n))
    return int((oriented @ oriented).multiply(oriented).sum())


def _adjacency(edges: EdgeStream) -> Dict[NodeId, List[NodeId]]:
    adjacency = defaultdict(list)
    for first, second in edges:
        adjacency[first].append(second)
        adjacency[second].append(first)
    return adjacency


def list_triangles(edges: EdgeStream) -> Set[Triangle]:
    adjacency = {node: set(nbrs) for node, nbrs in _adjacency(edges).items()}
    order = {node: (len(nbrs), node) for node, nbrs in adjacency.items()}
    # forward neighbours: those ranked after the node
    forward = {node: {x for x in nbrs if order[x] > order[node]} for node, nbrs in adjacency.items()}
    found = set()
    for u, higher in forward.items():
        for v in higher:
            for w in higher & forward[v]:
                found.add(Triangle(*sorted((u, v, w))))
    return found


def enumerate_2paths(edges: EdgeStream) -> List[PathTriple]:
    """One ``(a, mid, b)`` with ``a < b`` per pair of distinct neighbours of every ``mid``."""
    paths = []
    for mid, nbrs in _adjacency(edges).items():
        for a, b in combinations(sorted(nbrs), 2):
            paths.append(PathTriple(a, mid, b))
    return paths


def simulate_partition(edges: EdgeStream) -> PartitionResult:
    """
    Replay the pipeline's partition phase sequentially.

    An edge goes to the earliest-created filter whose responsible node is one
    of its endpoints; otherwise it opens a new filter responsible for its
    first endpoint.
    """
    position: Dict[NodeId, int] = {}
    responsible: List[NodeId] = []
    adjacency: List[List[NodeId]] = []
    for first, second in edges:
        owners = [position[x] for x in (first, second) if x in position]
        if owners:
            index = min(owners)
            other = second if responsible[index] == first else first
            adjacency[index].append(other)
        else:
            position[first] = len(responsible)
            responsible.append(first)
            adjacency.append([second])
    return [PartitionEntry(r, tuple(adj)) for r, adj in zip(responsible, adjacency)]


def simulate_filter_counts(partition: PartitionResult, edges: EdgeStream) -> List[Tuple[NodeId, int]]:
    """Per filter, the number of edges with both endpoints in its adjacency."""
    holders = defaultdict(set)
    for index, entry in enumerate(partition):
        for node in entry.adjacency:
            holders[node].add(index)
    counts = [0] * len(partition)
    for first, second in edges:
        for index in holders.get(first, set()) & holders.get(second, set()):
            counts[index] += 1
    return [(entry.responsible, count) for entry, count in zip(partition, counts)]
