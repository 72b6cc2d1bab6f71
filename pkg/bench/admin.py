from django.contrib import admin
from .models import BenchRecord


@admin.register(BenchRecord)
class BenchRecordAdmin(admin.ModelAdmin):
    list_display = ('case_name', 'engine', 'workers', 'run', 'triangles',
                    'elapsed_ms', 'peak_mem_bytes', 'timed_out', 'created_at')
    list_filter = ('engine', 'timed_out', 'workers')
    search_fields = ('case_name',)
    readonly_fields = ('created_at',)
