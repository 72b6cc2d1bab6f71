from django.apps import AppConfig


class TrianglesConfig(AppConfig):
    name = 'triangles'
    verbose_name = 'Triangle counting engines'
