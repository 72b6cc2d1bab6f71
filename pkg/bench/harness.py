"""
Benchmark harness: manifest parsing, isolated timed runs and the CSV report.

Manifest lines read ``name engine input workers repeat timeout_s``; ``#``
starts a comment and a missing ``timeout_s`` falls back to
``BENCH_TIMEOUT_SECONDS``. ``input`` is a graph file path, a generator request
``gen:nodes=N,density=D[,seed=S]`` / ``gen:arcs=M,density=D[,seed=S]``, or a
benchmark shape ``preset:NAME[:SEED]``.

Cases run one after the other; every run is a fresh spawned process so that
peak memory and timings of one run never leak into the next.
"""
import csv
import logging
import multiprocessing
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from django.conf import settings

from bench.models import BenchRecord
from bench.runner import EngineConfig, child_main
from triangles.exceptions import InfeasibleSpec
from triangles.graph_io import GenSpec, preset
from triangles.mapreduce_engine import MrConfig
from triangles.pipeline_engine import PipelineConfig

logger = logging.getLogger(__name__)

ENGINES = ('pipeline', 'mapreduce', 'oracle')
CSV_HEADER = ['name', 'engine', 'workers', 'run', 'triangles', 'elapsed_ms', 'peak_mem_bytes', 'timed_out']

InputSource = Union[Path, GenSpec]


class ManifestError(Exception):
    def __init__(self, line_no: int, line: str, reason: str = ''):
        self.line_no = line_no
        self.line = line
        self.reason = reason
        message = f"manifest line {line_no}: {line!r}"
        super().__init__(f"{message} ({reason})" if reason else message)


class BenchError(Exception):
    """A run crashed, or its count disagrees with the oracle."""


@dataclass(frozen=True)
class BenchCase:
    name: str
    engine: str
    input: InputSource
    workers: int = 1
    repeat: int = 1
    timeout: float = 300.0

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {', '.join(ENGINES)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


def parse_input(token: str, base_dir: Optional[Path] = None) -> InputSource:
    if token.startswith('gen:'):
        fields = dict(part.split('=', 1) for part in token[4:].split(','))
        density = float(fields.pop('density'))
        seed = int(fields.pop('seed', 1))
        if set(fields) == {'nodes'}:
            return GenSpec.by_nodes(int(fields['nodes']), density, seed)
        if set(fields) == {'arcs'}:
            return GenSpec.by_arcs(int(fields['arcs']), density, seed)
        raise ValueError(f"gen: needs exactly one of nodes= or arcs=, got {sorted(fields)}")
    if token.startswith('preset:'):
        name, _, seed = token[7:].partition(':')
        return preset(name, int(seed) if seed else 1)
    path = Path(token)
    if not path.is_absolute() and not path.exists() and base_dir is not None:
        path = base_dir / path
    return path


def parse_manifest(lines: Iterable[str], base_dir: Optional[Path] = None) -> List[BenchCase]:
    cases = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) == 5:
            tokens.append(str(settings.BENCH_TIMEOUT_SECONDS))
        if len(tokens) != 6:
            raise ManifestError(line_no, raw.rstrip('\n'), f"expected 6 fields, got {len(tokens)}")
        name, engine, source, workers, repeat, timeout = tokens
        try:
            cases.append(BenchCase(name, engine, parse_input(source, base_dir),
                                   int(workers), int(repeat), float(timeout)))
        except (ValueError, KeyError, InfeasibleSpec) as exc:
            raise ManifestError(line_no, raw.rstrip('\n'), str(exc)) from exc
    return cases


def load_manifest(path) -> List[BenchCase]:
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as fh:
        return parse_manifest(fh, base_dir=path.parent)


def engine_config(engine: str, workers: int) -> EngineConfig:
    """Workers widen the pooled pipeline, or set mappers = reducers for MapReduce."""
    if engine == 'pipeline':
        return PipelineConfig.from_settings(max_live_filters=workers)
    if engine == 'mapreduce':
        return MrConfig.from_settings(mappers=workers, reducers=workers)
    return None


def _record(case: BenchCase, run, **values) -> BenchRecord:
    return BenchRecord(case_name=case.name, engine=case.engine, workers=case.workers, run=str(run), **values)


def run_once(case: BenchCase, run: int, verify: bool = True) -> BenchRecord:
    context = multiprocessing.get_context('spawn')
    receiver, sender = context.Pipe(duplex=False)
    process = context.Process(
        target=child_main,
        args=(sender, case.engine, case.input, engine_config(case.engine, case.workers), verify),
        name=f"bench-{case.name}-{run}",
    )
    process.start()
    sender.close()
    try:
        if not receiver.poll(case.timeout):
            process.terminate()
            process.join()
            logger.warning("%s run %d timed out after %ss", case.name, run, case.timeout)
            return _record(case, run, timed_out=True)
        try:
            result = receiver.recv()
        except EOFError:
            process.join()
            raise BenchError(f"{case.name} run {run}: child exited with code {process.exitcode}") from None
    finally:
        receiver.close()
    process.join()
    return record_from_result(case, run, result)


def record_from_result(case: BenchCase, run: int, result: dict) -> BenchRecord:
    """Turn what a child sent back into a record, failing on crashes and oracle mismatches."""
    if not result['ok']:
        logger.error("%s run %d failed in the child:\n%s", case.name, run, result['traceback'])
        raise BenchError(f"{case.name} run {run}: {result['error']}")
    if result['expected'] is not None and result['expected'] != result['triangles']:
        raise BenchError(f"{case.name} run {run}: {case.engine} counted {result['triangles']} "
                         f"triangles, oracle counted {result['expected']}")
    return _record(case, run, triangles=result['triangles'], elapsed_ms=result['elapsed_ms'],
                   peak_mem_bytes=result['peak_mem_bytes'])


def aggregate(case: BenchCase, records: Sequence[BenchRecord]) -> BenchRecord:
    """Mean elapsed over the completed runs; timed out only if none completed."""
    completed = [r for r in records if not r.timed_out]
    if not completed:
        return _record(case, BenchRecord.AGGREGATE_RUN, timed_out=True,
                       peak_mem_bytes=max((r.peak_mem_bytes for r in records), default=-1))
    counts = {r.triangles for r in completed}
    if len(counts) > 1:
        raise BenchError(f"{case.name}: runs disagree on the count: {sorted(counts)}")
    return _record(case, BenchRecord.AGGREGATE_RUN,
                   triangles=counts.pop(),
                   elapsed_ms=statistics.fmean(r.elapsed_ms for r in completed),
                   peak_mem_bytes=max(r.peak_mem_bytes for r in completed))


def run_case(case: BenchCase, verify: bool = True) -> List[BenchRecord]:
    """``repeat`` run records followed by the aggregate row."""
    logger.info("bench %s: %s x%d, %d run(s)", case.name, case.engine, case.workers, case.repeat)
    records = [run_once(case, run, verify) for run in range(1, case.repeat + 1)]
    records.append(aggregate(case, records))
    return records


def _csv_row(record: BenchRecord) -> list:
    return [
        record.case_name,
        record.engine,
        record.workers,
        record.run,
        '' if record.triangles is None else record.triangles,
        '' if record.elapsed_ms is None else f"{record.elapsed_ms:.3f}",
        record.peak_mem_bytes,
        'true' if record.timed_out else 'false',
    ]


def write_csv(records: Iterable[BenchRecord], path) -> None:
    """Append rows to ``path``; the header goes in only when the file is new or empty."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, 'a', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(_csv_row(record))


def run_bench(cases: Sequence[BenchCase], csv_path=None, verify: bool = True) -> List[BenchRecord]:
    csv_path = csv_path or settings.BENCH_CSV_PATH
    records: List[BenchRecord] = []
    for case in cases:
        case_records = run_case(case, verify)
        write_csv(case_records, csv_path)
        records.extend(case_records)
    logger.info("bench: %d case(s), results in %s", len(cases), csv_path)
    return records
