import time

import numpy as np
from django.test import SimpleTestCase, override_settings

from triangles.channels import CLOSED
from triangles.exceptions import ConfigError, PipelineTimeout, ProtocolViolation
from triangles.graph_core import Edge, EdgeArray
from triangles.graph_io import GenSpec, GraphFile, generate
from triangles.oracle import count_triangles_exact, simulate_partition
from triangles.pipeline_engine import (
    ChannelEvent, Emission, FilterState, FilterSummary, Link, Phase, PipelineConfig, SinkState,
    filter_step, run_pipeline, sink_step,
)
from triangles.tests.graphs import FIG3, FIXTURES, K4


def counting(responsible, adjacency):
    state = FilterState(responsible, tuple(adjacency))
    state, _ = filter_step(state, ChannelEvent(Link.CH3, CLOSED))
    return state


class FilterStepTests(SimpleTestCase):
    def test_partition_keeps_incident_edge(self):
        state, emitted = filter_step(FilterState(2, (1,)), ChannelEvent(Link.CH3, Edge(2, 3)))
        self.assertEqual(state.adjacency, (1, 3))
        self.assertEqual(emitted, [])

    def test_partition_forwards_the_rest_in_order(self):
        batch = np.array([[2, 1], [1, 3], [4, 5], [3, 2]])
        state, emitted = filter_step(FilterState(2), ChannelEvent(Link.CH3, batch))
        self.assertEqual(state.adjacency, (1, 3))
        self.assertEqual(len(emitted), 1)
        self.assertIs(emitted[0].link, Link.CH3)
        self.assertEqual(emitted[0].payload.tolist(), [[1, 3], [4, 5]])

    def test_partition_close_starts_counting(self):
        state, emitted = filter_step(FilterState(2, (3, 1)), ChannelEvent(Link.CH3, CLOSED))
        self.assertIs(state.phase, Phase.COUNTING)
        self.assertEqual(state.members.tolist(), [1, 3])
        self.assertEqual(emitted, [Emission(Link.CH3, CLOSED)])

    def test_counting_tallies_and_forwards(self):
        state = counting(2, (1, 3))
        state, emitted = filter_step(state, ChannelEvent(Link.CH2, Edge(1, 3)))
        self.assertEqual(state.tally, 1)
        self.assertEqual(emitted, [Emission(Link.CH2, Edge(1, 3))])
        state, emitted = filter_step(state, ChannelEvent(Link.CH2, np.array([[4, 5], [3, 1], [1, 2]])))
        self.assertEqual(state.tally, 2)
        self.assertEqual(len(emitted), 1)

    def test_counting_close_starts_aggregation(self):
        state, emitted = filter_step(counting(2, (1, 3)), ChannelEvent(Link.CH2, CLOSED))
        self.assertIs(state.phase, Phase.AGGREGATION)
        self.assertEqual(emitted, [Emission(Link.CH2, CLOSED)])

    def test_aggregation_adds_tally_and_terminates(self):
        state = FilterState(2, (1, 3), Phase.AGGREGATION, tally=1)
        state, emitted = filter_step(state, ChannelEvent(Link.CH1, 0))
        self.assertIs(state.phase, Phase.TERMINATED)
        self.assertEqual(emitted, [Emission(Link.CH1, 1), Emission(Link.CH1, CLOSED)])

    def test_state_is_not_mutated(self):
        before = FilterState(2, (1,))
        filter_step(before, ChannelEvent(Link.CH3, Edge(2, 3)))
        self.assertEqual(before.adjacency, (1,))

    def test_phase_inconsistent_events(self):
        with self.assertRaises(ProtocolViolation):
            filter_step(FilterState(2), ChannelEvent(Link.CH2, Edge(1, 3)))
        with self.assertRaises(ProtocolViolation):
            filter_step(FilterState(2), ChannelEvent(Link.CH1, 0))
        with self.assertRaises(ProtocolViolation):
            filter_step(counting(2, (1,)), ChannelEvent(Link.CH3, Edge(2, 5)))
        with self.assertRaises(ProtocolViolation):
            filter_step(FilterState(2, (1,), Phase.AGGREGATION), ChannelEvent(Link.CH1, CLOSED))
        with self.assertRaises(ProtocolViolation):
            filter_step(FilterState(2, (1,), Phase.TERMINATED), ChannelEvent(Link.CH1, 0))

    def test_self_loop_is_a_violation(self):
        with self.assertRaises(ProtocolViolation):
            filter_step(FilterState(2), ChannelEvent(Link.CH3, Edge(2, 2)))


class SinkStepTests(SimpleTestCase):
    def test_collects_the_final_count(self):
        state = SinkState()
        for event in (ChannelEvent(Link.CH3, CLOSED), ChannelEvent(Link.CH2, Edge(1, 2)),
                      ChannelEvent(Link.CH2, CLOSED), ChannelEvent(Link.CH1, 7), ChannelEvent(Link.CH1, CLOSED)):
            state, emitted = sink_step(state, event)
            self.assertEqual(emitted, [])
        self.assertEqual((state.phase, state.total), (Phase.TERMINATED, 7))

    def test_partition_edges_never_reach_the_sink(self):
        with self.assertRaises(ProtocolViolation):
            sink_step(SinkState(), ChannelEvent(Link.CH3, Edge(1, 2)))

    def test_close_without_count(self):
        with self.assertRaises(ProtocolViolation):
            sink_step(SinkState(Phase.AGGREGATION), ChannelEvent(Link.CH1, CLOSED))


class PipelineConfigTests(SimpleTestCase):
    def test_validation(self):
        for bad in ({'channel_capacity_ch2': -1}, {'max_live_filters': 0}, {'batch_size': 0}, {'deadline': 0}):
            with self.assertRaises(ConfigError):
                PipelineConfig(**bad)

    @override_settings(TRIANGLES_CHANNEL_CAPACITY=3, TRIANGLES_MAX_LIVE_FILTERS=None,
                       TRIANGLES_BATCH_SIZE=16, TRIANGLES_PIPELINE_DEADLINE=None)
    def test_from_settings_with_overrides(self):
        cfg = PipelineConfig.from_settings(batch_size=1, max_live_filters=None)
        self.assertEqual(cfg, PipelineConfig(3, 3, None, 1, None))


class RunPipelineTests(SimpleTestCase):
    def test_fig3(self):
        outcome = run_pipeline(FIG3)
        self.assertEqual((outcome.triangles, outcome.filters_created), (1, 3))
        self.assertEqual(outcome.filters, (
            FilterSummary(2, (1, 3), 1),
            FilterSummary(1, (3,), 0),
            FilterSummary(4, (5, 7, 6), 0),
        ))
        self.assertGreaterEqual(outcome.peak_live_filters, 1)
        self.assertLessEqual(outcome.peak_live_filters, 3)

    def test_empty_stream(self):
        outcome = run_pipeline([])
        self.assertEqual((outcome.triangles, outcome.filters_created, outcome.filters), (0, 0, ()))

    def test_k4(self):
        self.assertEqual(run_pipeline(K4, PipelineConfig(batch_size=1)).triangles, 4)

    def test_generated_graph(self):
        edges = generate(GenSpec.by_nodes(50, 0.5, seed=7))
        self.assertEqual(run_pipeline(edges).triangles, count_triangles_exact(edges))

    def test_one_edge_per_message(self):
        cfg = PipelineConfig(batch_size=1)
        for n in range(5, 16):
            for density in (0.3, 0.9):
                edges = list(generate(GenSpec.by_nodes(n, density, seed=n)))
                outcome = run_pipeline(edges, cfg)
                self.assertEqual(outcome.triangles, count_triangles_exact(edges), (n, density))
                self.assertEqual([(f.responsible, f.adjacency) for f in outcome.filters],
                                 [tuple(entry) for entry in simulate_partition(edges)])

    def test_buffered_channels(self):
        edges = generate(GenSpec.by_nodes(40, 0.6, seed=3))
        expected = count_triangles_exact(edges)
        for capacity in (1, 8):
            cfg = PipelineConfig(channel_capacity_ch2=capacity, channel_capacity_ch3=capacity, batch_size=4)
            self.assertEqual(run_pipeline(edges, cfg).triangles, expected, capacity)

    def test_pooled_runtime(self):
        edges = generate(GenSpec.by_nodes(45, 0.7, seed=5))
        expected = count_triangles_exact(edges)
        structure = [tuple(entry) for entry in simulate_partition(edges)]
        for width in (1, 2, 4):
            outcome = run_pipeline(edges, PipelineConfig(max_live_filters=width, batch_size=8))
            self.assertEqual(outcome.triangles, expected, width)
            self.assertEqual([(f.responsible, f.adjacency) for f in outcome.filters], structure)
            self.assertEqual(sum(f.tally for f in outcome.filters), expected)

    def test_one_shot_iterator_is_replayed(self):
        edges = list(generate(GenSpec.by_nodes(30, 0.5, seed=2)))
        self.assertEqual(run_pipeline(iter(edges)).triangles, count_triangles_exact(edges))
        self.assertEqual(run_pipeline(e for e in edges).triangles, count_triangles_exact(edges))

    def test_graph_file_is_reread(self):
        self.assertEqual(run_pipeline(GraphFile(FIXTURES / 'fig3.gr')).triangles, 1)

    def test_edge_array_input(self):
        self.assertEqual(run_pipeline(EdgeArray.from_edges(FIG3), PipelineConfig(batch_size=2)).triangles, 1)

    def test_stage_failure_is_raised(self):
        with self.assertLogs('triangles.pipeline_engine', level='ERROR'):
            with self.assertRaises(ProtocolViolation):
                run_pipeline([Edge(1, 2), Edge(3, 3), Edge(2, 3)], PipelineConfig(batch_size=1))

    def test_stage_failure_in_pooled_runtime(self):
        with self.assertLogs('triangles.pipeline_engine', level='ERROR'):
            with self.assertRaises(ProtocolViolation):
                run_pipeline([Edge(1, 2), Edge(3, 3)], PipelineConfig(max_live_filters=2, batch_size=1))

    def test_deadline(self):
        def slow():
            for edge in FIG3[:3]:
                time.sleep(0.3)
                yield edge

        with self.assertLogs('triangles.pipeline_engine', level='ERROR'):
            with self.assertRaises(PipelineTimeout):
                run_pipeline(slow(), PipelineConfig(deadline=0.2, batch_size=1))
