"""
URL configuration for core project.

Benchmark records are browsable in the admin and readable as JSON under
``bench/api/``.
"""
from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),
    path('bench/', include('bench.urls')),
]
