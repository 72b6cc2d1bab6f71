from django.core.management.base import BaseCommand, CommandError

from triangles.exceptions import GraphIOError, InfeasibleSpec
from triangles.graph_core import graph_stats
from triangles.graph_io import BENCHMARK_SHAPES, GenSpec, GraphFormat, generate, preset, write


class Command(BaseCommand):
    help = "Generate a seeded random simple graph, write it and print its stats line."

    def add_arguments(self, parser):
        shape = parser.add_mutually_exclusive_group(required=True)
        shape.add_argument('--nodes', type=int, help="vertex count")
        shape.add_argument('--arcs', type=int, help="arc count (two per undirected edge)")
        shape.add_argument('--preset', choices=list(BENCHMARK_SHAPES), help="a benchmark table shape")
        parser.add_argument('--density', type=float)
        parser.add_argument('--seed', type=int, default=1)
        parser.add_argument('--out', required=True)
        parser.add_argument('--format', choices=[f.value for f in GraphFormat],
                            help="output format (default: guessed from the suffix)")

    def handle(self, *args, **options):
        fmt = options['format'] or GraphFormat.from_path(options['out'])
        try:
            if options['preset']:
                spec = preset(options['preset'], options['seed'])
            else:
                if options['density'] is None:
                    raise CommandError("--density is required with --nodes/--arcs", returncode=2)
                if options['nodes'] is not None:
                    spec = GenSpec.by_nodes(options['nodes'], options['density'], options['seed'])
                else:
                    spec = GenSpec.by_arcs(options['arcs'], options['density'], options['seed'])
            edges = generate(spec)
        except InfeasibleSpec as exc:
            raise CommandError(str(exc), returncode=2)
        try:
            write(edges, options['out'], fmt)
        except GraphIOError as exc:
            raise CommandError(str(exc))
        self.stdout.write(str(graph_stats(edges)))
