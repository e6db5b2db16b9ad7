from django.apps import AppConfig


class PostprocessConfig(AppConfig):
    name = 'postprocess'
