import logging
import os
import sys
import types
from dataclasses import replace

import torch
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import ClothFoldingError, ConfigurationError
from folding.serializers import load_pool
from .config import load_run_config

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_RUNTIME = 2


def usage_error(parser, message):
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        parser.exit(EXIT_USAGE, f'{parser.prog}: error: {message}\n')
    raise CommandError(f'Error: {message}', returncode=EXIT_USAGE)


def usage(message):
    return CommandError(message, returncode=EXIT_USAGE)


def require_file(path, what):
    if not path:
        raise usage(f'{what} path is not configured')
    if not os.path.isfile(path):
        raise usage(f'{what} not found: {path}')
    return path


class RunCommand(BaseCommand):
    """Общая основа команд: --config, --seed, коды выхода 1/2."""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = types.MethodType(usage_error, parser)
        return parser

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Run configuration file (key = value)')
        parser.add_argument('--seed', type=int, help='Override run.seed')

    def load_config(self, options, mode=None):
        try:
            return load_run_config(options.get('config')).with_overrides(options.get('seed'), mode).validate()
        except ConfigurationError as exc:
            raise usage(str(exc)) from exc

    def configure_torch(self):
        torch.set_num_threads(settings.TORCH_NUM_THREADS)

    def handle(self, *args, **options):
        try:
            return self.run(*args, **options)
        except CommandError:
            raise
        except ClothFoldingError as exc:
            logger.error('%s failed: %s', self.__class__.__module__.rsplit('.', 1)[-1], exc)
            raise CommandError(str(exc), returncode=EXIT_RUNTIME) from exc

    def run(self, *args, **options):
        raise NotImplementedError


def fabrics_for(config, mode):
    pool_path = config.path('pool')
    if pool_path and os.path.isfile(pool_path):
        pool = load_pool(pool_path)
        return pool.entries if mode == 'ours' else [pool.best()]
    if mode == 'ours':
        raise usage(f'pool file not found: {pool_path}; run identify first')
    logger.warning('no pool file, %s mode uses the reference cloth', mode)
    return [config.reference_cloth]


def env_config_for(config, mode):
    # Актору fixed изображения не нужны
    return replace(config.env, render_observations=mode != 'fixed')


def ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return path
