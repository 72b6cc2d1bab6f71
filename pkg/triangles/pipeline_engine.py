"""
Dynamic pipeline triangle counter.

A source feeds a chain of filters that grows while edges flow: every filter
specialises on a responsible node, keeps the edges incident to it and passes
the rest down; the tail spawns a new filter for the first edge nobody kept.
Each stage has three links towards its successor:

    ch1  the running triangle count (a single value, then close)
    ch2  counting-phase edges (the whole stream, second pass)
    ch3  partition-phase edges (the stream minus what upstream kept)

A filter drains ch3 (Partition), then ch2 (Counting), then reads one value
from ch1, adds its tally, passes it on and dies (Aggregation). A collector
pre-created at the end of the chain reads the final count.

Stage logic is the pure ``filter_step``/``sink_step`` pair. Two runtimes drive
it: one thread per stage over Go-style channels (capacity 0 by default), or,
when ``max_live_filters`` is set, stages multiplexed as mailbox actors over a
fixed ``ThreadPoolExecutor``.
"""
import logging
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Any, Callable, Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from .channels import CLOSED, Channel
from .exceptions import ChannelAborted, ConfigError, PipelineTimeout, ProtocolViolation
from .graph_core import EdgeArray, EdgeStream, NodeId, iter_batches

logger = logging.getLogger(__name__)


class Link(IntEnum):
    CH1 = 1
    CH2 = 2
    CH3 = 3


class Phase(Enum):
    PARTITION = 'partition'
    COUNTING = 'counting'
    AGGREGATION = 'aggregation'
    TERMINATED = 'terminated'


# The only link a stage listens to in each phase.
READS = {
    Phase.PARTITION: Link.CH3,
    Phase.COUNTING: Link.CH2,
    Phase.AGGREGATION: Link.CH1,
}


class ChannelEvent(NamedTuple):
    link: Link
    payload: Any  # edge batch, running count, or CLOSED


class Emission(NamedTuple):
    link: Link
    payload: Any


@dataclass(frozen=True)
class FilterState:
    responsible: NodeId
    adjacency: Tuple[NodeId, ...] = ()
    phase: Phase = Phase.PARTITION
    tally: int = 0
    # sorted adjacency, frozen when Counting starts
    members: Optional[np.ndarray] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class SinkState:
    phase: Phase = Phase.PARTITION
    total: Optional[int] = None


class FilterSummary(NamedTuple):
    responsible: NodeId
    adjacency: Tuple[NodeId, ...]
    tally: int


@dataclass(frozen=True)
class PipelineConfig:
    channel_capacity_ch2: int = 0
    channel_capacity_ch3: int = 0
    max_live_filters: Optional[int] = None
    batch_size: int = 256
    deadline: Optional[float] = None

    def __post_init__(self):
        if self.channel_capacity_ch2 < 0 or self.channel_capacity_ch3 < 0:
            raise ConfigError("channel capacities must be >= 0")
        if self.max_live_filters is not None and self.max_live_filters < 1:
            raise ConfigError("max_live_filters must be >= 1 when set")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.deadline is not None and self.deadline <= 0:
            raise ConfigError("deadline must be positive when set")

    @classmethod
    def from_settings(cls, **overrides) -> 'PipelineConfig':
        from django.conf import settings

        values = {
            'channel_capacity_ch2': settings.TRIANGLES_CHANNEL_CAPACITY,
            'channel_capacity_ch3': settings.TRIANGLES_CHANNEL_CAPACITY,
            'max_live_filters': settings.TRIANGLES_MAX_LIVE_FILTERS,
            'batch_size': settings.TRIANGLES_BATCH_SIZE,
            'deadline': settings.TRIANGLES_PIPELINE_DEADLINE,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class PipelineOutcome:
    triangles: int
    filters_created: int
    peak_live_filters: int
    filters: Tuple[FilterSummary, ...] = ()


def _as_batch(payload) -> np.ndarray:
    return np.asarray(payload, dtype=np.int64).reshape(-1, 2)


def _unexpected(who: str, state, event: ChannelEvent) -> ProtocolViolation:
    what = 'close' if event.payload is CLOSED else 'message'
    return ProtocolViolation(f"{who} in phase {state.phase.value} got a {what} on ch{int(event.link)}")


def filter_step(state: FilterState, event: ChannelEvent) -> Tuple[FilterState, List[Emission]]:
    """Apply one channel event to a filter; returns the new state and what it sends downstream."""
    who = f"filter {state.responsible}"
    if state.phase is Phase.TERMINATED or event.link is not READS[state.phase]:
        raise _unexpected(who, state, event)

    if state.phase is Phase.PARTITION:
        if event.payload is CLOSED:
            members = np.array(sorted(state.adjacency), dtype=np.int64)
            return (replace(state, phase=Phase.COUNTING, members=members),
                    [Emission(Link.CH3, CLOSED)])
        batch = _as_batch(event.payload)
        r = state.responsible
        incident = (batch[:, 0] == r) | (batch[:, 1] == r)
        if incident.any():
            mine = batch[incident]
            others = np.where(mine[:, 0] == r, mine[:, 1], mine[:, 0])
            if (others == r).any():
                raise ProtocolViolation(f"{who} received the self-loop ({r},{r})")
            adjacency = tuple(dict.fromkeys(state.adjacency + tuple(others.tolist())))
            state = replace(state, adjacency=adjacency)
        rest = batch[~incident]
        return state, ([Emission(Link.CH3, rest)] if len(rest) else [])

    if state.phase is Phase.COUNTING:
        if event.payload is CLOSED:
            return replace(state, phase=Phase.AGGREGATION), [Emission(Link.CH2, CLOSED)]
        batch = _as_batch(event.payload)
        hits = int(np.isin(batch, state.members).all(axis=1).sum())
        if hits:
            state = replace(state, tally=state.tally + hits)
        return state, [Emission(Link.CH2, event.payload)]

    # Aggregation
    if event.payload is CLOSED:
        raise ProtocolViolation(f"{who}: ch1 closed before the running count arrived")
    total = int(event.payload) + state.tally
    return (replace(state, phase=Phase.TERMINATED),
            [Emission(Link.CH1, total), Emission(Link.CH1, CLOSED)])


def sink_step(state: SinkState, event: ChannelEvent) -> Tuple[SinkState, List[Emission]]:
    if state.phase is Phase.TERMINATED or event.link is not READS[state.phase]:
        raise _unexpected('collector', state, event)
    if state.phase is Phase.PARTITION:
        if event.payload is not CLOSED:
            raise ProtocolViolation("collector received partition edges; the tail filter must keep or spawn")
        return replace(state, phase=Phase.COUNTING), []
    if state.phase is Phase.COUNTING:
        if event.payload is CLOSED:
            return replace(state, phase=Phase.AGGREGATION), []
        return state, []
    if event.payload is CLOSED:
        if state.total is None:
            raise ProtocolViolation("collector: ch1 closed without a count")
        return replace(state, phase=Phase.TERMINATED), []
    if state.total is not None:
        raise ProtocolViolation("collector received a second count")
    return replace(state, total=int(event.payload)), []


class _EdgeReplay:
    """
    Serves the stream twice. Re-iterable inputs (lists, ``EdgeArray``,
    ``GraphFile``) are simply read again; one-shot iterators are buffered
    during the first pass.
    """

    def __init__(self, edges: EdgeStream, batch_size: int):
        self._edges = edges
        self._batch_size = batch_size
        one_shot = not isinstance(edges, EdgeArray) and iter(edges) is edges
        self._buffer: Optional[List[np.ndarray]] = [] if one_shot else None

    def first_pass(self) -> Iterator[np.ndarray]:
        for batch in iter_batches(self._edges, self._batch_size):
            if self._buffer is not None:
                self._buffer.append(batch)
            yield batch

    def second_pass(self) -> Iterator[np.ndarray]:
        if self._buffer is not None:
            return iter(self._buffer)
        return iter_batches(self._edges, self._batch_size)


class _Tail:
    """A stage's view downstream; ``outlet`` moves once the stage spawns its successor."""
    __slots__ = ('outlet', 'spawned')

    def __init__(self, outlet):
        self.outlet = outlet
        self.spawned = False


class _Runtime:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self._lock = threading.Lock()
        self._created = 0
        self._live = 0
        self._peak = 0
        self._summaries: Dict[int, FilterSummary] = {}
        self._total: Optional[int] = None
        self._failure: Optional[BaseException] = None
        self._done = threading.Event()

    def run(self, edges: EdgeStream) -> PipelineOutcome:
        replay = _EdgeReplay(edges, self.config.batch_size)
        sink = self._open_stage(SinkState(), sink_step, None, None)
        self._launch_source(replay, _Tail(sink))
        if not self._done.wait(self.config.deadline):
            self._fail(PipelineTimeout(f"pipeline did not finish within {self.config.deadline}s"))
        self._shutdown()
        if self._failure is not None:
            raise self._failure
        return PipelineOutcome(
            triangles=self._total,
            filters_created=self._created,
            peak_live_filters=self._peak,
            filters=tuple(self._summaries[i] for i in range(self._created)),
        )

    # subclass hooks
    def _open_stage(self, state, step: Callable, tail: Optional[_Tail], index: Optional[int]):
        raise NotImplementedError

    def _launch_source(self, replay: _EdgeReplay, tail: _Tail):
        raise NotImplementedError

    def _abort_all(self, failure: BaseException):
        raise NotImplementedError

    def _shutdown(self):
        raise NotImplementedError

    def _feed(self, replay: _EdgeReplay, tail: _Tail):
        # The 0 goes out last: over a rendezvous ch1 it cannot be taken before
        # the first filter reaches Aggregation anyway.
        for batch in replay.first_pass():
            self._emit(tail, [Emission(Link.CH3, batch)])
        tail.outlet.put(Link.CH3, CLOSED)
        for batch in replay.second_pass():
            tail.outlet.put(Link.CH2, batch)
        tail.outlet.put(Link.CH2, CLOSED)
        tail.outlet.put(Link.CH1, 0)
        tail.outlet.put(Link.CH1, CLOSED)

    def _emit(self, tail: _Tail, emitted: List[Emission]):
        for link, payload in emitted:
            if link is Link.CH3 and payload is not CLOSED and not tail.spawned:
                self._spawn_successor(tail, payload)
            tail.outlet.put(link, payload)

    def _spawn_successor(self, tail: _Tail, batch: np.ndarray):
        responsible = int(batch[0, 0])
        with self._lock:
            index = self._created
            self._created += 1
            self._live += 1
            self._peak = max(self._peak, self._live)
        logger.debug("spawning filter #%d responsible for node %d", index, responsible)
        tail.outlet = self._open_stage(FilterState(responsible), filter_step, _Tail(tail.outlet), index)
        tail.spawned = True

    def _retire(self, state, index: Optional[int]):
        if index is None:
            self._total = state.total
            self._done.set()
            return
        with self._lock:
            self._summaries[index] = FilterSummary(state.responsible, state.adjacency, state.tally)
            self._live -= 1

    def _fail(self, failure: BaseException):
        with self._lock:
            if self._failure is not None:
                return
            self._failure = failure
        logger.error("pipeline aborted: %s", failure)
        self._abort_all(failure)
        self._done.set()


class _ChannelTriple:
    """Inbound links of a threaded stage."""

    def __init__(self, config: PipelineConfig, name: str):
        self.channels = {
            Link.CH1: Channel(0, f"{name}.ch1"),
            Link.CH2: Channel(config.channel_capacity_ch2, f"{name}.ch2"),
            Link.CH3: Channel(config.channel_capacity_ch3, f"{name}.ch3"),
        }

    def put(self, link: Link, payload):
        channel = self.channels[link]
        if payload is CLOSED:
            channel.close()
        else:
            channel.send(payload)

    def get(self, link: Link):
        return self.channels[link].recv()


class _ThreadedRuntime(_Runtime):
    def __init__(self, config: PipelineConfig):
        super().__init__(config)
        self._threads: List[threading.Thread] = []
        self._channels: List[Channel] = []

    def _open_stage(self, state, step, tail, index):
        name = 'collector' if index is None else f"filter-{index}"
        inlet = _ChannelTriple(self.config, name)
        with self._lock:
            self._channels.extend(inlet.channels.values())
            failure = self._failure
        if failure is not None:
            # spawned after the abort sweep
            for channel in inlet.channels.values():
                channel.abort(failure)
        self._start(self._drive, (inlet, state, step, tail, index), name)
        return inlet

    def _launch_source(self, replay, tail):
        self._start(self._feed, (replay, tail), 'source')

    def _drive(self, inlet: _ChannelTriple, state, step, tail, index):
        while state.phase is not Phase.TERMINATED:
            link = READS[state.phase]
            state, emitted = step(state, ChannelEvent(link, inlet.get(link)))
            if emitted:
                self._emit(tail, emitted)
        self._retire(state, index)

    def _start(self, target, args, name):
        thread = threading.Thread(target=self._guard, args=(target, args), name=name, daemon=True)
        with self._lock:
            self._threads.append(thread)
        thread.start()

    def _guard(self, target, args):
        try:
            target(*args)
        except ChannelAborted:
            pass
        except BaseException as exc:
            logger.error("pipeline stage %s failed", threading.current_thread().name, exc_info=True)
            self._fail(exc)

    def _abort_all(self, failure):
        with self._lock:
            channels = list(self._channels)
        for channel in channels:
            channel.abort(failure)

    def _shutdown(self):
        joined = 0
        while True:
            with self._lock:
                pending = self._threads[joined:]
            if not pending:
                return
            for thread in pending:
                thread.join()
            joined += len(pending)


class _Mailbox:
    """A stage of the pooled runtime: per-link queues, drained by one pool worker at a time."""

    def __init__(self, runtime: '_PooledRuntime', state, step, tail, index):
        self._runtime = runtime
        self._boxes = {link: deque() for link in Link}
        self._lock = threading.Lock()
        self._scheduled = False
        self.state = state
        self._step = step
        self._tail = tail
        self._index = index

    def put(self, link: Link, payload):
        if self._runtime.failed:
            raise ChannelAborted("pooled pipeline aborted")
        with self._lock:
            self._boxes[link].append(payload)
            if self._scheduled or not self._ready():
                return
            self._scheduled = True
        self._runtime._submit(self._drain)

    def _ready(self) -> bool:
        phase = self.state.phase
        return phase is not Phase.TERMINATED and bool(self._boxes[READS[phase]])

    def _drain(self):
        while not self._runtime.failed:
            with self._lock:
                if not self._ready():
                    self._scheduled = False
                    return
                link = READS[self.state.phase]
                payload = self._boxes[link].popleft()
            self.state, emitted = self._step(self.state, ChannelEvent(link, payload))
            if emitted:
                self._runtime._emit(self._tail, emitted)
            if self.state.phase is Phase.TERMINATED:
                self._runtime._retire(self.state, self._index)


class _PooledRuntime(_Runtime):
    def __init__(self, config: PipelineConfig):
        super().__init__(config)
        self._executor = ThreadPoolExecutor(max_workers=config.max_live_filters,
                                            thread_name_prefix='filter')
        self._source: Optional[threading.Thread] = None

    @property
    def failed(self) -> bool:
        return self._failure is not None

    def _open_stage(self, state, step, tail, index):
        return _Mailbox(self, state, step, tail, index)

    def _launch_source(self, replay, tail):
        self._source = threading.Thread(target=self._guard, args=(self._feed, (replay, tail)),
                                        name='source', daemon=True)
        self._source.start()

    def _submit(self, fn):
        if self.failed:
            return
        try:
            self._executor.submit(self._guard, fn, ())
        except RuntimeError:
            if not self.failed:
                raise

    def _guard(self, target, args):
        try:
            target(*args)
        except ChannelAborted:
            pass
        except BaseException as exc:
            logger.error("pooled pipeline task failed", exc_info=True)
            self._fail(exc)

    def _abort_all(self, failure):
        # Mailboxes never block; draining workers stop at their next event.
        pass

    def _shutdown(self):
        if self._source is not None:
            self._source.join()
        self._executor.shutdown(wait=True, cancel_futures=self.failed)


def run_pipeline(edges: EdgeStream, cfg: Optional[PipelineConfig] = None) -> PipelineOutcome:
    """Count the triangles of a deduplicated stream with the dynamic pipeline."""
    cfg = cfg or PipelineConfig()
    runtime = _PooledRuntime(cfg) if cfg.max_live_filters else _ThreadedRuntime(cfg)
    outcome = runtime.run(edges)
    logger.info("pipeline: %d triangles, %d filters created, peak %d live",
                outcome.triangles, outcome.filters_created, outcome.peak_live_filters)
    return outcome
