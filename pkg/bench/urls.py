from django.urls import path
from . import views

urlpatterns = [
    path('api/records/', views.get_records, name='bench_records'),
    path('api/summary/', views.get_summary, name='bench_summary'),
]
