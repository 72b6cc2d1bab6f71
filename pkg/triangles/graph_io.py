"""
Edge-list readers/writers for the three on-disk formats and the seeded
generator that reproduces the benchmark graph shapes.

Formats:
    dimacs    ``c`` comments, one ``p sp N M`` header, arcs as ``a U V [W]``
              (both orientations of every edge; the weight is ignored).
    snap      ``#`` comments, ``U<TAB>V`` per undirected edge.
    edgelist  ``#`` comments, ``U V`` per undirected edge.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, Tuple

import numpy as np

from .exceptions import GraphIOError, InfeasibleSpec, MalformedLine
from .graph_core import Edge, EdgeArray, EdgeStream, dedup_stream, edge_array, iter_batches

logger = logging.getLogger(__name__)

WRITE_CHUNK = 1 << 16


class GraphFormat(str, Enum):
    DIMACS = 'dimacs'
    SNAP = 'snap'
    EDGELIST = 'edgelist'

    @classmethod
    def from_path(cls, path) -> 'GraphFormat':
        return _SUFFIXES.get(Path(path).suffix.lower(), cls.EDGELIST)


_SUFFIXES = {
    '.gr': GraphFormat.DIMACS,
    '.dimacs': GraphFormat.DIMACS,
    '.snap': GraphFormat.SNAP,
    '.txt': GraphFormat.SNAP,
    '.el': GraphFormat.EDGELIST,
    '.edges': GraphFormat.EDGELIST,
}


def _node(token: str) -> int:
    value = int(token)
    if value < 0:
        raise ValueError(token)
    return value


def _parse_dimacs(path, lines) -> Iterator[Edge]:
    declared_arcs = None
    arcs = 0
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line[0] == 'c':
            continue
        tokens = line.split()
        try:
            if tokens[0] == 'p' and len(tokens) == 4:
                declared_arcs = int(tokens[3])
                continue
            # ``e`` lines are the coloring-archive spelling of an edge.
            if tokens[0] in ('a', 'e') and len(tokens) in (3, 4):
                first, second = _node(tokens[1]), _node(tokens[2])
                if len(tokens) == 4:
                    float(tokens[3])
            else:
                raise ValueError(line)
        except ValueError:
            raise MalformedLine(path, line_no, raw.rstrip('\n')) from None
        arcs += 1
        yield Edge(first, second)
    if declared_arcs is not None and declared_arcs != arcs:
        logger.warning("%s: header declares %d arcs but %d were read", path, declared_arcs, arcs)


def _parse_pairs(path, lines) -> Iterator[Edge]:
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line[0] == '#':
            continue
        tokens = line.split()
        try:
            if len(tokens) != 2:
                raise ValueError(line)
            edge = Edge(_node(tokens[0]), _node(tokens[1]))
        except ValueError:
            raise MalformedLine(path, line_no, raw.rstrip('\n')) from None
        yield edge


def parse(path, fmt: GraphFormat) -> Iterator[Edge]:
    """Yield the raw edges of ``path`` lazily, in file order. No dedup."""
    fmt = GraphFormat(fmt)
    reader = _parse_dimacs if fmt is GraphFormat.DIMACS else _parse_pairs
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            yield from reader(path, fh)
    except OSError as exc:
        raise GraphIOError(f"cannot read {path}: {exc}") from exc


class GraphFile:
    """
    A graph file as a re-iterable edge stream.

    Each iteration re-reads the file (deduplicated unless ``dedup=False``), so
    consumers that need two passes never buffer the stream.
    """

    def __init__(self, path, fmt: Optional[GraphFormat] = None, dedup: bool = True):
        self.path = Path(path)
        self.format = GraphFormat(fmt) if fmt else GraphFormat.from_path(path)
        self.dedup = dedup

    def __iter__(self) -> Iterator[Edge]:
        edges = parse(self.path, self.format)
        return dedup_stream(edges) if self.dedup else edges

    def __repr__(self):
        return f"GraphFile({str(self.path)!r}, {self.format.value})"


def write(edges: EdgeStream, path, fmt: GraphFormat) -> None:
    """Write a deduplicated stream so that ``dedup(parse(write(s))) == s``."""
    fmt = GraphFormat(fmt)
    array = edge_array(edges)
    try:
        with open(path, 'w', encoding='utf-8') as fh:
            if fmt is GraphFormat.DIMACS:
                num_nodes = int(array.max()) if len(array) else 0
                fh.write(f"p sp {num_nodes} {2 * len(array)}\n")
                for start in range(0, len(array), WRITE_CHUNK):
                    chunk = array[start:start + WRITE_CHUNK]
                    arcs = np.empty((2 * len(chunk), 3), dtype=np.int64)
                    arcs[0::2, :2] = chunk
                    arcs[1::2, :2] = chunk[:, ::-1]
                    arcs[:, 2] = 1
                    np.savetxt(fh, arcs, fmt='a %d %d %d')
            elif fmt is GraphFormat.SNAP:
                num_nodes = len(np.unique(array)) if len(array) else 0
                fh.write(f"# Undirected graph: {Path(path).name}\n")
                fh.write(f"# Nodes: {num_nodes} Edges: {len(array)}\n")
                for chunk in iter_batches(EdgeArray(array), WRITE_CHUNK):
                    np.savetxt(fh, chunk, fmt='%d', delimiter='\t')
            else:
                for chunk in iter_batches(EdgeArray(array), WRITE_CHUNK):
                    np.savetxt(fh, chunk, fmt='%d', delimiter=' ')
    except OSError as exc:
        raise GraphIOError(f"cannot write {path}: {exc}") from exc


class GenMode(str, Enum):
    BY_NODES = 'by_nodes'
    BY_ARCS = 'by_arcs'


@dataclass(frozen=True)
class GenSpec:
    """
    A request for a uniformly sampled simple graph of a given shape.

    ``size`` is the vertex count for ``by_nodes`` and the arc count for
    ``by_arcs``; arcs count every undirected edge twice.
    """
    mode: GenMode
    size: int
    density: float
    seed: int = 1

    def __post_init__(self):
        if not 0 < self.density <= 1:
            raise InfeasibleSpec(f"density must be in (0, 1], got {self.density}")
        if self.size < 2:
            raise InfeasibleSpec(f"{self.mode.value} needs a size of at least 2, got {self.size}")
        if not 0 <= self.seed < 2 ** 64:
            raise InfeasibleSpec(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @classmethod
    def by_nodes(cls, n: int, density: float, seed: int = 1) -> 'GenSpec':
        return cls(GenMode.BY_NODES, n, density, seed)

    @classmethod
    def by_arcs(cls, m_arcs: int, density: float, seed: int = 1) -> 'GenSpec':
        return cls(GenMode.BY_ARCS, m_arcs, density, seed)

    def resolve(self) -> Tuple[int, int]:
        """Return ``(vertices, undirected edges)`` for this spec."""
        if self.mode is GenMode.BY_NODES:
            n = self.size
            edges = round(self.density * n * (n - 1) / 2)
        else:
            m_arcs, d = self.size, self.density
            # largest n with m_arcs / (n (n - 1)) >= d
            n = max(2, int((1 + math.sqrt(1 + 4 * m_arcs / d)) / 2))
            while n > 2 and d * n * (n - 1) > m_arcs:
                n -= 1
            while d * (n + 1) * n <= m_arcs:
                n += 1
            edges = m_arcs // 2
        if edges > n * (n - 1) // 2:
            raise InfeasibleSpec(f"{edges} edges do not fit on {n} vertices")
        return n, edges


# Shapes of the benchmark table; topologies are random, not the archive graphs.
BENCHMARK_SHAPES = {
    'DSJC.1': (GenMode.BY_NODES, 1000, 0.1),
    'DSJC.5': (GenMode.BY_NODES, 1000, 0.5),
    'DSJC.9': (GenMode.BY_NODES, 1000, 0.9),
    'FNA.1': (GenMode.BY_ARCS, 10_000_000, 0.1),
    'FNA.5': (GenMode.BY_ARCS, 10_000_000, 0.5),
    'FNA.9': (GenMode.BY_ARCS, 10_000_000, 0.9),
}


def preset(name: str, seed: int = 1) -> GenSpec:
    try:
        mode, size, density = BENCHMARK_SHAPES[name]
    except KeyError:
        raise InfeasibleSpec(f"unknown preset {name!r}; choose from {', '.join(BENCHMARK_SHAPES)}") from None
    return GenSpec(mode, size, density, seed)


def _distinct_pairs(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    """Rejection-sample ``count`` distinct unordered pairs as codes ``lo * n + hi`` (0-based)."""
    codes = np.empty(0, dtype=np.int64)
    while len(codes) < count:
        need = count - len(codes)
        draw = need + need // 2 + 64
        u = rng.integers(0, n, size=draw, dtype=np.int64)
        v = rng.integers(0, n, size=draw, dtype=np.int64)
        keep = u != v
        fresh = np.minimum(u, v)[keep] * n + np.maximum(u, v)[keep]
        candidates = np.concatenate([codes, fresh])
        _, first = np.unique(candidates, return_index=True)
        codes = candidates[np.sort(first)]
    return codes[:count]


def generate(spec: GenSpec) -> EdgeArray:
    """
    Sample ``e`` distinct undirected edges uniformly on vertices ``1..n``.

    The generator is numpy's PCG64 seeded with ``spec.seed``, so output is
    reproducible. Sparse requests (density <= 0.5) draw edges directly; denser
    ones draw the missing pairs and keep the complement, shuffled.
    Edges are written ``(lo, hi)``.
    """
    n, count = spec.resolve()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    total = n * (n - 1) // 2
    if count <= total // 2:
        codes = _distinct_pairs(rng, n, count)
    else:
        missing = np.sort(_distinct_pairs(rng, n, total - count))
        lo, hi = np.triu_indices(n, k=1)
        every = lo.astype(np.int64) * n + hi
        codes = rng.permutation(every[~np.isin(every, missing, assume_unique=True)])
    array = np.column_stack([codes // n + 1, codes % n + 1]).astype(np.int64)
    logger.debug("generated %d edges on %d vertices (%s, seed=%d)", len(array), n, spec.mode.value, spec.seed)
    return EdgeArray(array)
