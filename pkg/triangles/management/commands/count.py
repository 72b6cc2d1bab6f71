import logging

from django.core.management.base import BaseCommand, CommandError

from triangles.exceptions import ConfigError, TrianglesError
from triangles.graph_io import GraphFile, GraphFormat
from triangles.mapreduce_engine import MrConfig, count_triangles_mapreduce
from triangles.oracle import count_triangles_exact
from triangles.pipeline_engine import PipelineConfig, run_pipeline

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Count the triangles of a graph file and print the count."

    def add_arguments(self, parser):
        parser.add_argument('--algo', choices=['pipeline', 'mapreduce', 'oracle'], required=True)
        parser.add_argument('--input', required=True, help="graph file")
        parser.add_argument('--format', choices=[f.value for f in GraphFormat],
                            help="input format (default: guessed from the suffix)")
        parser.add_argument('--mappers', type=int)
        parser.add_argument('--reducers', type=int)
        parser.add_argument('--spill', metavar='DIR', help="write the round I output under DIR")
        parser.add_argument('--channel-cap', type=int, dest='channel_cap')
        parser.add_argument('--batch-size', type=int, dest='batch_size')
        parser.add_argument('--max-live-filters', type=int, dest='max_live_filters')

    def handle(self, *args, **options):
        graph = GraphFile(options['input'], options['format'])
        try:
            if options['algo'] == 'pipeline':
                cfg = PipelineConfig.from_settings(
                    channel_capacity_ch2=options['channel_cap'],
                    channel_capacity_ch3=options['channel_cap'],
                    max_live_filters=options['max_live_filters'],
                    batch_size=options['batch_size'],
                )
                triangles = run_pipeline(graph, cfg).triangles
            elif options['algo'] == 'mapreduce':
                cfg = MrConfig.from_settings(
                    mappers=options['mappers'],
                    reducers=options['reducers'],
                    channel_capacity=options['channel_cap'],
                    spill_dir=options['spill'],
                    batch_size=options['batch_size'],
                )
                triangles = count_triangles_mapreduce(graph, cfg).triangles
            else:
                triangles = count_triangles_exact(graph)
        except ConfigError as exc:
            raise CommandError(str(exc), returncode=2)
        except TrianglesError as exc:
            logger.debug("count failed on %s", graph, exc_info=True)
            raise CommandError(str(exc))
        self.stdout.write(str(triangles))
