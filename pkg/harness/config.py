import logging
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np
from decouple import Config, Csv, RepositoryEnv, UndefinedValueError
from django.conf import settings

from cloth.physics import PHYSICAL_FIELDS, ClothParams
from cloth.rendering import VisualRanges
from core.exceptions import ConfigurationError
from folding.env import EnvConfig, EpisodeConfig
from folding.randomization import DEFAULT_CANDIDATES, DEFAULT_POOL_SIZE, ParamRanges
from learning.sac import MODES, LearnerConfig
from learning.training import Schedule

logger = logging.getLogger(__name__)

ENV_KEYS = {
    'effector_mass': float,
    'kp': float,
    'table_height': float,
    'image_size': int,
    'randomize_visuals': bool,
}

VISUAL_KEYS = {
    'eye_x': ('eye_offset', 0, 1.0),
    'eye_y': ('eye_offset', 1, 1.0),
    'eye_z': ('eye_offset', 2, 1.0),
    'vertical_fov_deg': ('vertical_fov', None, np.pi / 180.0),
    'light_elevation_deg': ('light_elevation', None, np.pi / 180.0),
    'light_azimuth_deg': ('light_azimuth', None, np.pi / 180.0),
    'ambient': ('ambient', None, 1.0),
    'diffuse': ('diffuse', None, 1.0),
    'pixel_noise_sigma': ('pixel_noise_sigma', None, 1.0),
    'camera_jitter': ('camera_jitter', None, 1.0),
}

PATH_KEYS = ('demos', 'pool', 'output')

TUPLE_LEARNER_KEYS = ('hidden', 'channels')


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    mode: str = 'ours'
    name: str = 'run'
    schedule: Schedule = field(default_factory=Schedule)
    env: EnvConfig = field(default_factory=EnvConfig)
    reference_cloth: ClothParams = field(default_factory=ClothParams)
    ranges: ParamRanges = field(default_factory=ParamRanges)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    candidates: int = DEFAULT_CANDIDATES
    pool_size: int = DEFAULT_POOL_SIZE
    workers: int = 1
    demo_count: int = 5
    paths: dict = field(default_factory=dict)
    source: str = None

    def path(self, name):
        return self.paths.get(name)

    def with_overrides(self, seed=None, mode=None):
        return replace(
            self,
            seed=self.seed if seed is None else seed,
            mode=self.mode if mode is None else mode,
        )

    def validate(self):
        if self.mode not in MODES:
            raise ConfigurationError(f'run.mode must be one of {MODES}, got {self.mode!r}')
        if self.candidates < self.pool_size:
            raise ConfigurationError('identify.candidates must be >= identify.pool_size')
        if self.pool_size < 1 or self.demo_count < 1 or self.workers < 1:
            raise ConfigurationError('identify.pool_size, identify.demos and identify.workers must be positive')
        self.schedule.validate()
        self.env.episode.validate()
        self.reference_cloth.validate()
        self.ranges.validate()
        self.env.visual_ranges.scalar_ranges()
        self.learner.validate()
        return self


def known_keys():
    keys = {'run.seed', 'run.mode', 'run.name'}
    keys |= {f'schedule.{f.name}' for f in fields(Schedule)}
    keys |= {f'env.{f.name}' for f in fields(EpisodeConfig)}
    keys |= {f'env.{name}' for name in ENV_KEYS}
    keys |= {f'cloth.{f.name}' for f in fields(ClothParams)}
    keys |= {f'ranges.{name}' for name in PHYSICAL_FIELDS}
    keys |= {f'visual.{name}' for name in VISUAL_KEYS}
    keys |= {f'learner.{f.name}' for f in fields(LearnerConfig) if f.name not in ('image_size', 'state_dim')}
    keys |= {'identify.candidates', 'identify.pool_size', 'identify.workers', 'identify.demos'}
    keys |= {f'paths.{name}' for name in PATH_KEYS}
    return keys


def lookup(source, key, cast):
    if key not in source.repository:
        return None
    return source(key, cast=cast)


def read_pair(source, key, default):
    value = lookup(source, key, Csv(cast=float))
    if value is None:
        return default
    if len(value) != 2:
        raise ConfigurationError(f'{key} must be "low, high", got {value}')
    return tuple(value)


def read_section(source, prefix, cls, overrides=None):
    values = {}
    for f in fields(cls):
        kind = type(f.default)
        if kind is tuple:
            continue
        value = lookup(source, f'{prefix}.{f.name}', kind)
        if value is None:
            continue
        values[f.name] = value
    values.update(overrides or {})
    return cls(**values)


def resolve_path(path, base_dir):
    if not path:
        return None
    path = os.path.expanduser(path)
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def load_run_config(path=None):
    if path is None:
        return RunConfig(paths={'output': settings.RUNS_ROOT}).validate()
    if not os.path.isfile(path):
        raise ConfigurationError(f'config file not found: {path}')

    repository = RepositoryEnv(path)
    unknown = sorted(set(repository.data) - known_keys())
    if unknown:
        raise ConfigurationError(f'unknown config keys in {path}: {", ".join(unknown)}')
    source = Config(repository)
    base_dir = os.path.dirname(os.path.abspath(path))

    try:
        episode = read_section(source, 'env', EpisodeConfig)
        env_values = {'episode': episode}
        for name, cast in ENV_KEYS.items():
            value = lookup(source, f'env.{name}', cast)
            if value is not None:
                env_values[name] = value

        visual = {}
        defaults = VisualRanges()
        eye = list(defaults.eye_offset)
        for key, (name, axis, scale) in VISUAL_KEYS.items():
            pair = read_pair(source, f'visual.{key}', None)
            if pair is None:
                continue
            pair = (pair[0] * scale, pair[1] * scale)
            if axis is None:
                visual[name] = pair
            else:
                eye[axis] = pair
        visual['eye_offset'] = tuple(eye)
        env_values['visual_ranges'] = replace(defaults, **visual)
        env = EnvConfig(**env_values)

        learner_values = {}
        for name in TUPLE_LEARNER_KEYS:
            value = lookup(source, f'learner.{name}', Csv(cast=int))
            if value is not None:
                learner_values[name] = tuple(value)
        learner_values['image_size'] = env.image_size
        learner = read_section(source, 'learner', LearnerConfig, learner_values)

        ranges = ParamRanges(**{
            name: read_pair(source, f'ranges.{name}', getattr(ParamRanges(), name)) for name in PHYSICAL_FIELDS
        })

        paths = {name: resolve_path(source(f'paths.{name}', default=''), base_dir) for name in PATH_KEYS}
        paths['output'] = paths['output'] or settings.RUNS_ROOT

        config = RunConfig(
            seed=source('run.seed', default=settings.DEFAULT_SEED, cast=int),
            mode=source('run.mode', default='ours'),
            name=source('run.name', default=os.path.splitext(os.path.basename(path))[0]),
            schedule=read_section(source, 'schedule', Schedule),
            env=env,
            reference_cloth=read_section(source, 'cloth', ClothParams),
            ranges=ranges,
            learner=learner,
            candidates=source('identify.candidates', default=DEFAULT_CANDIDATES, cast=int),
            pool_size=source('identify.pool_size', default=DEFAULT_POOL_SIZE, cast=int),
            workers=source('identify.workers', default=1, cast=int),
            demo_count=source('identify.demos', default=5, cast=int),
            paths=paths,
            source=path,
        )
    except (ValueError, UndefinedValueError) as exc:
        raise ConfigurationError(f'invalid value in {path}: {exc}') from exc

    logger.debug('loaded run config %s (seed %d, mode %s)', path, config.seed, config.mode)
    return config.validate()
