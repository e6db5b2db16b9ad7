"""Base class of the pipeline management commands."""
import logging
from dataclasses import fields

from django.core.management.base import BaseCommand, CommandError

from ingest.config import RunConfig, load_run_config

from .exceptions import TrackingError

logger = logging.getLogger(__name__)

FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def flag_name(field_name):
    return '--' + field_name.replace('_', '-')


class PipelineCommand(BaseCommand):
    """Adds ``--config`` plus one flag per RunConfig field the command uses,
    and reports library errors as ``CommandError``."""

    # RunConfig fields exposed as command-line flags
    config_flags = ()

    def add_arguments(self, parser):
        if self.config_flags:
            parser.add_argument('--config', help='key = value file overriding built-in defaults')
        for name in self.config_flags:
            parser.add_argument(flag_name(name), dest=name, type=FIELD_TYPES[name], default=None)
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run_config(self, options) -> RunConfig:
        overrides = {name: options.get(name) for name in self.config_flags}
        return load_run_config(options.get('config'), overrides)

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except (TrackingError, OSError) as exc:
            logger.debug("Command %s failed", self.__class__.__module__, exc_info=True)
            raise CommandError(str(exc)) from exc

    def run(self, **options):
        raise NotImplementedError('subclasses of PipelineCommand must provide a run() method')
