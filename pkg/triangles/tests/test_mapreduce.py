import tempfile
from collections import Counter
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, override_settings

from triangles.exceptions import ConfigError, GraphIOError, InvalidEdge, MalformedLine
from triangles.graph_core import EMPTY, Edge, EdgeKey, PathTriple
from triangles.graph_io import GenSpec, GraphFile, generate
from triangles.mapreduce_engine import (
    MrConfig, MrOutcome, count_triangles_mapreduce, read_triples, round1_map, round1_reduce, round2_map,
    round2_reduce, run_round_one, shuffle_index, stable_hash, write_triples,
)
from triangles.oracle import count_triangles_exact, enumerate_2paths
from triangles.tests.graphs import FIG3, FIXTURES


class RecordOperationTests(SimpleTestCase):
    def test_round1_map(self):
        self.assertEqual(round1_map(Edge(2, 1)), [(2, 1), (1, 2)])
        self.assertEqual(round1_map(Edge(4, 5)), [(4, 5), (5, 4)])
        self.assertEqual(set(round1_map(Edge(1, 2))), set(round1_map(Edge(2, 1))))

    def test_round1_reduce(self):
        self.assertEqual(round1_reduce(4, [5, 6, 7]),
                         [PathTriple(5, 4, 6), PathTriple(5, 4, 7), PathTriple(6, 4, 7)])
        self.assertEqual(round1_reduce(5, [4]), [])

    def test_round1_on_fig3(self):
        shuffled = {}
        for edge in FIG3:
            for node, neighbour in round1_map(edge):
                shuffled.setdefault(node, []).append(neighbour)
        paths = [t for node, adj in shuffled.items() for t in round1_reduce(node, adj)]
        self.assertEqual(len(paths), 6)
        self.assertEqual(Counter(paths), Counter(enumerate_2paths(FIG3)))

    def test_round2_map(self):
        self.assertEqual(round2_map(Edge(2, 3)), PathTriple(2, EMPTY, 3))
        self.assertEqual(round2_map(Edge(2, 1)).key, EdgeKey(1, 2))
        self.assertEqual(round2_map(Edge(4, 6)).key, EdgeKey(4, 6))

    def test_round2_reduce(self):
        self.assertEqual(round2_reduce(EdgeKey(2, 3), [PathTriple(2, 1, 3), PathTriple(2, EMPTY, 3)]), 1)
        self.assertEqual(round2_reduce(EdgeKey(5, 7), [PathTriple(5, 4, 7)]), 0)
        self.assertEqual(round2_reduce(EdgeKey(4, 5), [PathTriple(4, EMPTY, 5)]), 0)
        self.assertEqual(round2_reduce(EdgeKey(1, 2), iter([PathTriple(1, 3, 2), PathTriple(1, 4, 2),
                                                            PathTriple(1, EMPTY, 2)])), 2)

    def test_round2_reduce_rejects_foreign_triples(self):
        with self.assertRaises(ValueError):
            round2_reduce(EdgeKey(1, 2), [PathTriple(1, 3, 4)])


class ShuffleTests(SimpleTestCase):
    def test_stable_hash_is_fixed(self):
        # splitmix64 reference outputs
        self.assertEqual(int(stable_hash(0)), 0xE220A8397B1DCDAF)
        self.assertEqual(stable_hash(np.arange(5)).tolist(), [int(stable_hash(i)) for i in range(5)])

    def test_same_key_same_reducer(self):
        keys = np.array([7, 7, 123456789, 7])
        for reducers in (1, 3, 8):
            owners = shuffle_index(keys, reducers)
            self.assertEqual(owners[0], owners[1])
            self.assertEqual(owners[0], owners[3])
            self.assertTrue(((owners >= 0) & (owners < reducers)).all())

    def test_spreads_keys(self):
        owners = shuffle_index(np.arange(1000), 8)
        self.assertEqual(set(owners.tolist()), set(range(8)))


class ConfigTests(SimpleTestCase):
    def test_zero_workers(self):
        with self.assertRaises(ConfigError):
            MrConfig(mappers=0)
        with self.assertRaises(ConfigError):
            MrConfig(reducers=0)
        with self.assertRaises(ConfigError):
            MrConfig(channel_capacity=0)

    @override_settings(TRIANGLES_MR_MAPPERS=2, TRIANGLES_MR_REDUCERS=5, TRIANGLES_MR_CHANNEL_CAPACITY=4,
                       TRIANGLES_SPILL_DIR=None, TRIANGLES_BATCH_SIZE=32)
    def test_from_settings(self):
        self.assertEqual(MrConfig.from_settings(reducers=3), MrConfig(2, 3, 4, None, 32))


class SpillCodecTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_empty_middle_is_a_dash(self):
        path = self.tmp / 'triples.txt'
        written = write_triples(path, [np.array([[1, EMPTY, 2], [2, 1, 3]])])
        self.assertEqual(written, 2)
        self.assertEqual(path.read_text(), "1 - 2\n2 1 3\n")
        self.assertEqual(np.concatenate(list(read_triples(path))).tolist(), [[1, EMPTY, 2], [2, 1, 3]])

    def test_blocks_are_preserved_in_order(self):
        path = self.tmp / 'triples.txt'
        rows = np.arange(30).reshape(10, 3)
        write_triples(path, [rows[:4], rows[4:]])
        blocks = list(read_triples(path, block_rows=3))
        self.assertEqual([len(b) for b in blocks], [3, 3, 3, 1])
        self.assertEqual(np.concatenate(blocks).tolist(), rows.tolist())

    def test_malformed_line(self):
        path = self.tmp / 'bad.txt'
        path.write_text("1 2 3\n4 5\n")
        with self.assertRaises(MalformedLine) as ctx:
            list(read_triples(path))
        self.assertEqual(ctx.exception.line_no, 2)

    def test_io_errors(self):
        with self.assertRaises(GraphIOError):
            list(read_triples(self.tmp / 'missing.txt'))
        with self.assertRaises(GraphIOError):
            write_triples(self.tmp / 'no' / 'such.txt', [])


class CountTests(SimpleTestCase):
    def test_fig3(self):
        self.assertEqual(count_triangles_mapreduce(FIG3), MrOutcome(1, 3, 6))

    def test_empty(self):
        self.assertEqual(count_triangles_mapreduce([]), MrOutcome(0, 0, 0))

    def test_generated_graph(self):
        edges = generate(GenSpec.by_nodes(60, 0.9, seed=3))
        expected = count_triangles_exact(edges)
        outcome = count_triangles_mapreduce(edges, MrConfig(mappers=3, reducers=4))
        self.assertEqual((outcome.triangles, outcome.raw_sum), (expected, 3 * expected))

    def test_graph_file_input(self):
        self.assertEqual(count_triangles_mapreduce(GraphFile(FIXTURES / 'fig3.snap')).triangles, 1)

    def test_more_workers_than_edges(self):
        self.assertEqual(count_triangles_mapreduce(FIG3, MrConfig(mappers=8, reducers=8, channel_capacity=1)),
                         MrOutcome(1, 3, 6))

    def test_node_ids_must_fit(self):
        with self.assertRaises(InvalidEdge):
            count_triangles_mapreduce([Edge(1, 1 << 40)])

    def test_spill_directory_is_removed(self):
        with tempfile.TemporaryDirectory() as spill:
            outcome = count_triangles_mapreduce(FIG3, MrConfig(reducers=2, spill_dir=spill))
            self.assertEqual(outcome.triangles, 1)
            self.assertEqual(list(Path(spill).iterdir()), [])

    def test_missing_spill_directory(self):
        with tempfile.TemporaryDirectory() as parent:
            with self.assertRaises(GraphIOError):
                count_triangles_mapreduce(FIG3, MrConfig(spill_dir=str(Path(parent) / 'absent')))

    def test_round_one_in_memory_and_spilled(self):
        edges = generate(GenSpec.by_nodes(25, 0.6, seed=4))
        expected = Counter(enumerate_2paths(edges))
        cfg = MrConfig(mappers=2, reducers=3, channel_capacity=1)
        outputs = run_round_one(edges, cfg)
        self.assertEqual(len(outputs), 3)
        self.assertEqual(Counter(t for out in outputs for t in out.triples()), expected)
        self.assertEqual(sum(out.paths for out in outputs), sum(expected.values()))
        with tempfile.TemporaryDirectory() as workdir:
            spilled = run_round_one(edges, cfg, workdir)
            self.assertEqual(sorted(p.name for p in Path(workdir).iterdir()),
                             ['round1-0.txt', 'round1-1.txt', 'round1-2.txt'])
            self.assertEqual(Counter(t for out in spilled for t in out.triples()), expected)

    def test_negative_ids_rejected(self):
        with self.assertRaises(InvalidEdge):
            run_round_one([Edge(-1, 2)], MrConfig())

    def test_reducer_failure_unblocks_mappers(self):
        edges = generate(GenSpec.by_nodes(40, 0.8, seed=6))
        with mock.patch('triangles.mapreduce_engine._round_two_reduce', side_effect=RuntimeError('reducer down')):
            with self.assertRaisesMessage(RuntimeError, 'reducer down'):
                count_triangles_mapreduce(edges, MrConfig(mappers=2, reducers=2, channel_capacity=1, batch_size=8))
