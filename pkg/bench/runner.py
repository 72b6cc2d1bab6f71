"""
Entry point of a single benchmark run, executed in a fresh child process.

The child loads and deduplicates its input, times the engine alone, reads its
own peak resident set and, when asked, recounts with the oracle after the
clock has stopped. Everything it needs arrives pickled; Django is never
configured here, so this module must not import models.
"""
import logging
import sys
import time
import traceback
from pathlib import Path
from typing import Optional, Union

from triangles.graph_core import EdgeArray, dedup_stream
from triangles.graph_io import GenSpec, GraphFile, generate
from triangles.mapreduce_engine import MrConfig, count_triangles_mapreduce
from triangles.oracle import count_triangles_exact
from triangles.pipeline_engine import PipelineConfig, run_pipeline

logger = logging.getLogger(__name__)

try:
    import resource
except ImportError:  # Windows
    resource = None

EngineConfig = Union[PipelineConfig, MrConfig, None]


def load_input(source: Union[Path, GenSpec]) -> EdgeArray:
    if isinstance(source, GenSpec):
        return EdgeArray.from_edges(dedup_stream(generate(source)))
    return EdgeArray.from_edges(GraphFile(source))


def peak_memory_bytes() -> int:
    """Peak resident set of this process, or -1 where the platform does not expose it."""
    if resource is None:
        return -1
    peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # kilobytes on Linux, bytes on macOS
    return int(peak) if sys.platform == 'darwin' else int(peak) * 1024


def count_with(engine: str, edges: EdgeArray, cfg: EngineConfig) -> int:
    if engine == 'pipeline':
        return run_pipeline(edges, cfg).triangles
    if engine == 'mapreduce':
        return count_triangles_mapreduce(edges, cfg).triangles
    if engine == 'oracle':
        return count_triangles_exact(edges)
    raise ValueError(f"unknown engine {engine!r}")


def measure(engine: str, source, cfg: EngineConfig, verify: bool) -> dict:
    edges = load_input(source)
    started = time.perf_counter()
    triangles = count_with(engine, edges, cfg)
    elapsed_ms = (time.perf_counter() - started) * 1000
    peak = peak_memory_bytes()
    expected: Optional[int] = None
    if verify and engine != 'oracle':
        expected = count_triangles_exact(edges)
    return {
        'triangles': triangles,
        'elapsed_ms': elapsed_ms,
        'peak_mem_bytes': peak,
        'expected': expected,
    }


def child_main(conn, engine: str, source, cfg: EngineConfig, verify: bool):
    try:
        result = measure(engine, source, cfg, verify)
        result['ok'] = True
    except BaseException as exc:
        result = {
            'ok': False,
            'error': f"{type(exc).__name__}: {exc}",
            'traceback': traceback.format_exc(),
        }
    try:
        conn.send(result)
    finally:
        conn.close()
