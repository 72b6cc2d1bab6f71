from django.core.management.base import BaseCommand, CommandError

from bench.harness import BenchError, ManifestError, load_manifest, run_bench
from bench.models import BenchRecord


class Command(BaseCommand):
    help = "Run a benchmark manifest and append the results to a CSV file."

    def add_arguments(self, parser):
        parser.add_argument('manifest', help="manifest file, one case per line")
        parser.add_argument('--csv', dest='csv_path', help="CSV destination (default: BENCH_CSV_PATH)")
        parser.add_argument('--save', action='store_true', help="also store every record in the database")
        parser.add_argument('--no-verify', action='store_false', dest='verify',
                            help="skip the oracle cross-check of every run")

    def handle(self, *args, **options):
        try:
            cases = load_manifest(options['manifest'])
        except ManifestError as exc:
            raise CommandError(str(exc), returncode=2)
        except OSError as exc:
            raise CommandError(f"cannot read manifest: {exc}")

        try:
            records = run_bench(cases, options['csv_path'], verify=options['verify'])
        except BenchError as exc:
            raise CommandError(str(exc))

        if options['save']:
            BenchRecord.objects.bulk_create(records)
        for record in records:
            if record.is_aggregate:
                elapsed = 'timed out' if record.timed_out else f"{record.elapsed_ms:.1f} ms"
                self.stdout.write(f"{record.case_name:<20} {record.engine:<10} x{record.workers:<3} "
                                  f"triangles={record.triangles} {elapsed}")
