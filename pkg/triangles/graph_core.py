"""
Node/edge domain types and the simple-graph pre-processing shared by every engine.

Edges keep the endpoint order they were read with: the pipeline seeds a
filter's responsible node from the first endpoint. Identity, on the other
hand, is orientation-free and goes through ``edge_key``.
"""
from dataclasses import dataclass
from itertools import islice
from typing import Iterable, Iterator, NamedTuple, Union

import numpy as np

from .exceptions import InvalidEdge

NodeId = int

# Middle slot of an edge-triple. Node ids are non-negative, so -1 never collides.
EMPTY = -1


class Edge(NamedTuple):
    first: NodeId
    second: NodeId


class EdgeKey(NamedTuple):
    lo: NodeId
    hi: NodeId


class PathTriple(NamedTuple):
    """A 2-length path ``a - mid - b`` or, with ``mid == EMPTY``, the edge ``a - b``."""
    a: NodeId
    mid: NodeId
    b: NodeId

    @property
    def key(self) -> EdgeKey:
        return EdgeKey(min(self.a, self.b), max(self.a, self.b))

    @property
    def is_edge(self) -> bool:
        return self.mid == EMPTY


class EdgeArray:
    """
    A re-iterable edge stream backed by an ``(m, 2)`` int64 array.

    Iterating yields ``Edge`` tuples in row order; engines read ``array``
    directly and skip the per-edge conversion.
    """

    def __init__(self, array):
        array = np.asarray(array, dtype=np.int64)
        if array.size == 0:
            array = array.reshape(0, 2)
        if array.ndim != 2 or array.shape[1] != 2:
            raise ValueError(f"expected an (m, 2) array, got shape {array.shape}")
        self.array = array

    @classmethod
    def from_edges(cls, edges: Iterable) -> 'EdgeArray':
        if isinstance(edges, EdgeArray):
            return edges
        return cls(np.fromiter((v for e in edges for v in e), dtype=np.int64).reshape(-1, 2))

    def __len__(self):
        return len(self.array)

    def __iter__(self) -> Iterator[Edge]:
        for first, second in self.array.tolist():
            yield Edge(first, second)

    def __getitem__(self, index) -> Edge:
        first, second = self.array[index].tolist()
        return Edge(first, second)

    def __repr__(self):
        return f"EdgeArray({len(self)} edges)"


EdgeStream = Union[Iterable[Edge], EdgeArray]


@dataclass(frozen=True)
class GraphStats:
    num_vertices: int
    num_edges: int
    num_arcs: int
    density: float

    def __str__(self):
        return (f"vertices={self.num_vertices} edges={self.num_edges} "
                f"arcs={self.num_arcs} density={self.density:.4f}")


def edge_key(e) -> EdgeKey:
    first, second = e
    if first == second:
        raise InvalidEdge(f"self-loop ({first},{second}) has no edge key; dedup the stream first")
    return EdgeKey(first, second) if first < second else EdgeKey(second, first)


def dedup_stream(edges: EdgeStream) -> Iterator[Edge]:
    """
    Yield the first occurrence of every undirected edge, in input order and
    with its original orientation. Self-loops are dropped.
    """
    seen = set()
    for first, second in edges:
        if first == second:
            continue
        key = (first, second) if first < second else (second, first)
        if key in seen:
            continue
        seen.add(key)
        yield Edge(first, second)


def arc_density(num_vertices: int, num_arcs: int) -> float:
    if num_vertices < 2:
        return 0.0
    return num_arcs / (num_vertices * (num_vertices - 1))


def graph_stats(edges: EdgeStream) -> GraphStats:
    """Counts and density of a deduplicated stream; arcs count each edge twice."""
    if isinstance(edges, EdgeArray):
        num_edges = len(edges)
        num_vertices = len(np.unique(edges.array)) if num_edges else 0
    else:
        vertices = set()
        num_edges = 0
        for first, second in edges:
            vertices.add(first)
            vertices.add(second)
            num_edges += 1
        num_vertices = len(vertices)
    num_arcs = 2 * num_edges
    return GraphStats(num_vertices, num_edges, num_arcs, arc_density(num_vertices, num_arcs))


def iter_batches(edges: EdgeStream, size: int) -> Iterator[np.ndarray]:
    """Chop a stream into ``(k, 2)`` int64 arrays of at most ``size`` rows."""
    if size < 1:
        raise ValueError("batch size must be positive")
    if isinstance(edges, EdgeArray):
        for start in range(0, len(edges.array), size):
            yield edges.array[start:start + size]
        return
    iterator = iter(edges)
    while True:
        chunk = list(islice(iterator, size))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.int64).reshape(-1, 2)


def edge_array(edges: EdgeStream) -> np.ndarray:
    return EdgeArray.from_edges(edges).array
