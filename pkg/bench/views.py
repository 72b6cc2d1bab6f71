import logging

from django.db.models import Avg, Count, Max
from django.http import JsonResponse
from django.views.decorators.http import require_http_methods

from bench.models import BenchRecord

logger = logging.getLogger(__name__)


def _serialize(record):
    return {
        'name': record.case_name,
        'engine': record.engine,
        'workers': record.workers,
        'run': record.run,
        'triangles': record.triangles,
        'elapsed_ms': record.elapsed_ms,
        'peak_mem_bytes': record.peak_mem_bytes,
        'timed_out': record.timed_out,
        'created_at': record.created_at.isoformat(),
    }


@require_http_methods(["GET"])
def get_records(request):
    """Latest records, optionally filtered by ?engine= and ?name=."""
    try:
        limit = min(int(request.GET.get('limit', 100)), 1000)
    except ValueError:
        return JsonResponse({'error': 'limit must be an integer'}, status=400)
    records = BenchRecord.objects.all()
    if request.GET.get('engine'):
        records = records.filter(engine=request.GET['engine'])
    if request.GET.get('name'):
        records = records.filter(case_name=request.GET['name'])
    return JsonResponse({'records': [_serialize(r) for r in records[:max(limit, 0)]]})


@require_http_methods(["GET"])
def get_summary(request):
    """Mean elapsed and peak memory of completed runs per (case, engine, workers)."""
    rows = (BenchRecord.objects
            .exclude(run=BenchRecord.AGGREGATE_RUN)
            .filter(timed_out=False)
            .values('case_name', 'engine', 'workers')
            .annotate(runs=Count('id'), mean_elapsed_ms=Avg('elapsed_ms'), peak_mem_bytes=Max('peak_mem_bytes'))
            .order_by('case_name', 'engine', 'workers'))
    return JsonResponse({'summary': [
        {
            'name': row['case_name'],
            'engine': row['engine'],
            'workers': row['workers'],
            'runs': row['runs'],
            'mean_elapsed_ms': row['mean_elapsed_ms'],
            'peak_mem_bytes': row['peak_mem_bytes'],
        }
        for row in rows
    ]})
