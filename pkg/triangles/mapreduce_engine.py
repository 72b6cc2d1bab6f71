"""
Two-round MapReduce triangle counter, run in-process.

Round I maps every edge to both of its endpoints, shuffles by node and lets
each reducer turn a node's neighbour list into 2-length paths ``(a, node, b)``.
Round II maps the original edges to edge-triples ``(lo, EMPTY, hi)``, merges
them with the Round I paths, shuffles everything by edge key and counts, per
key, the paths closed by an edge. Every triangle is reported once per side,
so the reducer sum is divided by 3.

Within a round, mapper and reducer tasks share a ``ThreadPoolExecutor`` and
talk over bounded channels, one per reducer; mappers stream batches as they go.
Records travel as numpy arrays: nodes and values for Round I, 64-bit edge
codes ``lo << 32 | hi`` for Round II.
"""
import logging
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from itertools import combinations, islice
from pathlib import Path
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .channels import Channel
from .exceptions import ChannelAborted, ConfigError, GraphIOError, InvalidEdge, InvariantViolation, MalformedLine
from .graph_core import EMPTY, EdgeKey, EdgeStream, NodeId, PathTriple, edge_array, edge_key

logger = logging.getLogger(__name__)

# Rows per block when Round I output is generated or read back.
BLOCK_ROWS = 1 << 16
# Node ids must fit the 31 bits that keep an edge code a positive int64.
MAX_NODE_ID = (1 << 31) - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def stable_hash(values) -> np.ndarray:
    """splitmix64 finaliser; identical on every platform and run."""
    x = np.asarray(values).astype(np.uint64)
    with np.errstate(over='ignore'):
        x = x + _GOLDEN
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        x = x ^ (x >> np.uint64(31))
    return x


def shuffle_index(keys, reducers: int) -> np.ndarray:
    """Reducer owning each key."""
    return (stable_hash(keys) % np.uint64(reducers)).astype(np.int64)


def edge_codes(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    lo = np.minimum(a, b).astype(np.int64)
    hi = np.maximum(a, b).astype(np.int64)
    return (lo << 32) | hi


@dataclass(frozen=True)
class MrConfig:
    mappers: int = 1
    reducers: int = 1
    channel_capacity: int = 64
    spill_dir: Optional[str] = None
    batch_size: int = 256

    def __post_init__(self):
        if self.mappers < 1 or self.reducers < 1:
            raise ConfigError(f"need at least one mapper and one reducer, got {self.mappers}/{self.reducers}")
        if self.channel_capacity < 1:
            raise ConfigError("channel_capacity must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @classmethod
    def from_settings(cls, **overrides) -> 'MrConfig':
        from django.conf import settings

        values = {
            'mappers': settings.TRIANGLES_MR_MAPPERS,
            'reducers': settings.TRIANGLES_MR_REDUCERS,
            'channel_capacity': settings.TRIANGLES_MR_CHANNEL_CAPACITY,
            'spill_dir': settings.TRIANGLES_SPILL_DIR,
            'batch_size': settings.TRIANGLES_BATCH_SIZE,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class MrOutcome:
    triangles: int
    raw_sum: int
    # Round I cardinality: how far the input was replicated
    paths: int = 0


# Record-level operations. The orchestration below runs the same logic on
# whole arrays; these are the reference semantics.

def round1_map(e) -> List[Tuple[NodeId, NodeId]]:
    u, v = e
    return [(u, v), (v, u)]


def round1_reduce(node: NodeId, adj: Iterable[NodeId]) -> List[PathTriple]:
    return [PathTriple(x, node, y) for x, y in combinations(sorted(adj), 2)]


def round2_map(e) -> PathTriple:
    key = edge_key(e)
    return PathTriple(key.lo, EMPTY, key.hi)


def round2_reduce(key: EdgeKey, group: Iterable[PathTriple]) -> int:
    """Paths closed by the edge ``key``: group size minus the edge-triple, or 0 without one."""
    edge_seen = False
    size = 0
    for triple in group:
        if triple.key != key:
            raise ValueError(f"{triple} does not belong to group {tuple(key)}")
        size += 1
        edge_seen = edge_seen or triple.is_edge
    return size - 1 if edge_seen and size > 1 else 0


# Spill codec: one ``A MID B`` line per triple, ``-`` for an empty middle.

def _format_block(block: np.ndarray) -> str:
    return ''.join(
        f"{a} {'-' if mid == EMPTY else mid} {b}\n" for a, mid, b in block.tolist()
    )


def write_triples(path, blocks: Iterable[np.ndarray]) -> int:
    """Write ``(k, 3)`` triple blocks to ``path``; returns the number of triples."""
    written = 0
    try:
        with open(path, 'w', encoding='utf-8') as fh:
            for block in blocks:
                if not len(block):
                    continue
                if (block[:, 1] == EMPTY).any():
                    fh.write(_format_block(block))
                else:
                    np.savetxt(fh, block, fmt='%d')
                written += len(block)
    except OSError as exc:
        raise GraphIOError(f"cannot write {path}: {exc}") from exc
    return written


def _parse_triple(path, line_no: int, raw: str) -> Tuple[int, int, int]:
    tokens = raw.split()
    try:
        if len(tokens) != 3:
            raise ValueError(raw)
        mid = EMPTY if tokens[1] == '-' else int(tokens[1])
        return int(tokens[0]), mid, int(tokens[2])
    except ValueError:
        raise MalformedLine(path, line_no, raw.rstrip('\n')) from None


def read_triples(path, block_rows: int = BLOCK_ROWS) -> Iterator[np.ndarray]:
    """Read a spill file back as ``(k, 3)`` int64 blocks."""
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            line_no = 0
            while True:
                lines = list(islice(fh, block_rows))
                if not lines:
                    return
                block = None
                if not any('-' in line for line in lines):
                    try:
                        block = np.loadtxt(lines, dtype=np.int64, ndmin=2).reshape(-1, 3)
                    except ValueError:
                        pass
                if block is None:
                    # slow path: empty middles, or a bad line to report
                    rows = [_parse_triple(path, line_no + i, line) for i, line in enumerate(lines, start=1)]
                    block = np.array(rows, dtype=np.int64).reshape(-1, 3)
                line_no += len(lines)
                yield block
    except OSError as exc:
        raise GraphIOError(f"cannot read {path}: {exc}") from exc


def _coalesce(blocks: Iterable[np.ndarray], rows: int) -> Iterator[np.ndarray]:
    pending: List[np.ndarray] = []
    size = 0
    for block in blocks:
        pending.append(block)
        size += len(block)
        if size >= rows:
            yield np.concatenate(pending)
            pending, size = [], 0
    if pending:
        yield np.concatenate(pending)


class RoundOneOutput:
    """The 2-length paths produced by one Round I reducer."""
    paths: int = 0

    def blocks(self) -> Iterator[np.ndarray]:
        raise NotImplementedError

    def triples(self) -> Iterator[PathTriple]:
        for block in self.blocks():
            for a, mid, b in block.tolist():
                yield PathTriple(a, mid, b)


class GroupedPaths(RoundOneOutput):
    """
    In-memory boundary: the reducer's neighbour lists, grouped by node and
    sorted. Paths are generated block by block when Round II reads them.
    """

    def __init__(self, nodes: np.ndarray, starts: np.ndarray, degrees: np.ndarray, neighbours: np.ndarray):
        self.nodes = nodes
        self.starts = starts
        self.degrees = degrees
        self.neighbours = neighbours
        self.paths = int((degrees * (degrees - 1) // 2).sum())

    def _per_node(self) -> Iterator[np.ndarray]:
        for node, start, degree in zip(self.nodes.tolist(), self.starts.tolist(), self.degrees.tolist()):
            if degree < 2:
                continue
            nbrs = self.neighbours[start:start + degree]
            first, second = np.triu_indices(degree, k=1)
            yield np.column_stack([nbrs[first], np.full(len(first), node, dtype=np.int64), nbrs[second]])

    def blocks(self) -> Iterator[np.ndarray]:
        return _coalesce(self._per_node(), BLOCK_ROWS)


class SpilledPaths(RoundOneOutput):
    """File boundary: the reducer's paths written out and read back on demand."""

    def __init__(self, path: Path, paths: int):
        self.path = Path(path)
        self.paths = paths

    def blocks(self) -> Iterator[np.ndarray]:
        return read_triples(self.path)


def _scatter(channels: Sequence[Channel], route_keys: np.ndarray, build: Callable):
    """Send one message per reducer that owns at least one of ``route_keys``."""
    if not len(route_keys):
        return
    if len(channels) == 1:
        channels[0].send(build(slice(None)))
        return
    targets = shuffle_index(route_keys, len(channels))
    for reducer in np.unique(targets).tolist():
        channels[reducer].send(build(targets == reducer))


def _run_round(name: str, map_task: Callable, map_inputs: List, reduce_task: Callable, cfg: MrConfig) -> List:
    """Run mappers and reducers concurrently; returns the reducers' results in reducer order."""
    channels = [Channel(cfg.channel_capacity, f"{name}.reducer-{r}") for r in range(cfg.reducers)]
    failures: List[BaseException] = []

    def guarded(task, *args):
        try:
            return task(*args)
        except ChannelAborted:
            raise
        except BaseException as exc:
            failures.append(exc)
            for channel in channels:
                channel.abort(exc)
            raise

    with ThreadPoolExecutor(max_workers=cfg.mappers + cfg.reducers, thread_name_prefix=name) as pool:
        reducers = [pool.submit(guarded, reduce_task, r, channels[r]) for r in range(cfg.reducers)]
        mappers = [pool.submit(guarded, map_task, inputs, channels) for inputs in map_inputs]
        try:
            for future in mappers:
                future.result()
            for channel in channels:
                channel.close()
            return [future.result() for future in reducers]
        except BaseException:
            if failures:
                raise failures[0] from None
            raise


def _round_one_mapper(batch_size: int):
    def task(chunk: np.ndarray, channels: Sequence[Channel]):
        for start in range(0, len(chunk), batch_size):
            batch = chunk[start:start + batch_size]
            keys = np.concatenate([batch[:, 0], batch[:, 1]])
            values = np.concatenate([batch[:, 1], batch[:, 0]])
            _scatter(channels, keys, lambda m: (keys[m], values[m]))
    return task


def _round_one_reducer(workdir: Optional[Path]):
    def task(reducer: int, channel: Channel) -> RoundOneOutput:
        key_parts, value_parts = [], []
        for keys, values in channel:
            key_parts.append(keys)
            value_parts.append(values)
        keys = np.concatenate(key_parts) if key_parts else np.empty(0, dtype=np.int64)
        values = np.concatenate(value_parts) if value_parts else np.empty(0, dtype=np.int64)
        order = np.lexsort((values, keys))
        keys, values = keys[order], values[order]
        nodes, starts, degrees = np.unique(keys, return_index=True, return_counts=True)
        grouped = GroupedPaths(nodes, starts, degrees, values)
        logger.debug("round I reducer %d: %d nodes, %d paths", reducer, len(nodes), grouped.paths)
        if workdir is None:
            return grouped
        path = Path(workdir) / f"round1-{reducer}.txt"
        return SpilledPaths(path, write_triples(path, grouped.blocks()))
    return task


def run_round_one(edges: EdgeStream, cfg: MrConfig, workdir=None) -> List[RoundOneOutput]:
    """
    Round I alone: one output per reducer. With ``workdir`` the paths are
    written there as ``round1-<reducer>.txt``; the caller owns the directory.
    """
    array = _checked_array(edges)
    chunks = np.array_split(array, cfg.mappers)
    return _run_round('round1', _round_one_mapper(cfg.batch_size), chunks,
                      _round_one_reducer(Path(workdir) if workdir else None), cfg)


class _KeyTally:
    """Path counts per edge code, compacted with ``np.unique`` as codes pile up."""
    COMPACT_ROWS = 1 << 20

    def __init__(self):
        self.keys = np.empty(0, dtype=np.int64)
        self.counts = np.empty(0, dtype=np.int64)
        self._pending: List[np.ndarray] = []
        self._pending_rows = 0

    def add(self, codes: np.ndarray):
        self._pending.append(codes)
        self._pending_rows += len(codes)
        if self._pending_rows >= self.COMPACT_ROWS:
            self.compact()

    def compact(self):
        if not self._pending:
            return
        fresh, fresh_counts = np.unique(np.concatenate(self._pending), return_counts=True)
        self._pending, self._pending_rows = [], 0
        keys, inverse = np.unique(np.concatenate([self.keys, fresh]), return_inverse=True)
        counts = np.zeros(len(keys), dtype=np.int64)
        np.add.at(counts, inverse, np.concatenate([self.counts, fresh_counts]))
        self.keys, self.counts = keys, counts


def _round_two_mapper(batch_size: int):
    def task(sources: List[Tuple[bool, object]], channels: Sequence[Channel]):
        for is_edge, source in sources:
            if is_edge:
                batches = (source[i:i + batch_size] for i in range(0, len(source), batch_size))
                for batch in batches:
                    codes = edge_codes(batch[:, 0], batch[:, 1])
                    _scatter(channels, codes, lambda m: (True, codes[m]))
            else:
                for block in source.blocks():
                    codes = edge_codes(block[:, 0], block[:, 2])
                    _scatter(channels, codes, lambda m: (False, codes[m]))
    return task


def _round_two_reduce(reducer: int, channel: Channel) -> int:
    tally = _KeyTally()
    edge_parts = []
    for is_edge, codes in channel:
        if is_edge:
            edge_parts.append(codes)
        else:
            tally.add(codes)
    tally.compact()
    if not edge_parts or not len(tally.keys):
        return 0
    closed = np.isin(tally.keys, np.concatenate(edge_parts))
    partial = int(tally.counts[closed].sum())
    logger.debug("round II reducer %d: %d keys, partial sum %d", reducer, len(tally.keys), partial)
    return partial


def _checked_array(edges: EdgeStream) -> np.ndarray:
    array = edge_array(edges)
    if len(array) and (array.min() < 0 or array.max() > MAX_NODE_ID):
        raise InvalidEdge(f"node ids must lie in [0, {MAX_NODE_ID}]")
    return array


@contextmanager
def _round_boundary(spill_dir):
    if spill_dir is None:
        yield None
        return
    try:
        workdir = tempfile.mkdtemp(prefix='triangles-', dir=spill_dir)
    except OSError as exc:
        raise GraphIOError(f"cannot create a spill directory under {spill_dir}: {exc}") from exc
    logger.info("spilling round I output to %s", workdir)
    try:
        yield workdir
    except BaseException:
        logger.warning("keeping spill directory %s after a failed run", workdir)
        raise
    shutil.rmtree(workdir, ignore_errors=True)


def count_triangles_mapreduce(edges: EdgeStream, cfg: Optional[MrConfig] = None) -> MrOutcome:
    cfg = cfg or MrConfig()
    array = _checked_array(edges)
    with _round_boundary(cfg.spill_dir) as workdir:
        round_one = run_round_one(array, cfg, workdir)
        paths = sum(output.paths for output in round_one)
        sources = [(False, output) for output in round_one]
        sources += [(True, chunk) for chunk in np.array_split(array, cfg.mappers)]
        assignments = [sources[i::cfg.mappers] for i in range(cfg.mappers)]
        partials = _run_round('round2', _round_two_mapper(cfg.batch_size), assignments,
                              _round_two_reduce, cfg)
    raw_sum = sum(partials)
    if raw_sum % 3:
        raise InvariantViolation(f"reducer sum {raw_sum} is not a multiple of 3")
    logger.info("mapreduce: %d triangles (raw sum %d, %d round I paths, %d mappers, %d reducers)",
                raw_sum // 3, raw_sum, paths, cfg.mappers, cfg.reducers)
    return MrOutcome(triangles=raw_sum // 3, raw_sum=raw_sum, paths=paths)
