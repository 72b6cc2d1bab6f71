from django.db import models


class BenchRecord(models.Model):
    """One benchmark run, or the per-case aggregate when ``run`` is ``"mean"``."""
    AGGREGATE_RUN = 'mean'

    case_name = models.CharField(max_length=100, db_index=True)
    engine = models.CharField(max_length=20)
    workers = models.IntegerField()
    run = models.CharField(max_length=10, help_text="run index, or 'mean' for the aggregate row")
    triangles = models.BigIntegerField(null=True, blank=True, help_text="empty when the run timed out")
    elapsed_ms = models.FloatField(null=True, blank=True, help_text="engine time only, parsing excluded")
    peak_mem_bytes = models.BigIntegerField(default=-1, help_text="peak resident set, -1 if unavailable")
    timed_out = models.BooleanField(default=False)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', 'id']

    @property
    def is_aggregate(self):
        return self.run == self.AGGREGATE_RUN

    def __str__(self):
        return f"{self.case_name} {self.engine} x{self.workers} run {self.run}"
