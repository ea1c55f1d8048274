import os

import numpy as np

from cloth.physics import ClothParams, build_cloth, tracked_indices
from folding.env import EnvConfig, Goal, Observation
from learning.buffer import Transition, achieved_from_state

BASE_CONFIG = {
    'run.name': 'test',
    'run.seed': '3',
    'run.mode': 'fixed',
    'schedule.epochs': '2',
    'schedule.cycles': '1',
    'schedule.env_steps': '30',
    'schedule.gradient_steps': '5',
    'schedule.eval_episodes': '1',
    'env.image_size': '16',
    'env.randomize_visuals': 'false',
    'cloth.grid_n': '5',
    'cloth.mass_per_point': '0.01',
    'learner.batch_size': '16',
    'learner.buffer_capacity': '1000',
    'learner.hidden': '16, 16',
    'learner.channels': '4, 4',
    'learner.latent': '8',
    'identify.candidates': '6',
    'identify.pool_size': '3',
    'identify.demos': '1',
    'paths.output': 'runs',
}


def small_params(**kwargs):
    values = {'grid_n': 5, 'mass_per_point': 0.01}
    values.update(kwargs)
    return ClothParams(**values)


def small_env_config(**kwargs):
    values = {'render_observations': False, 'randomize_visuals': False, 'image_size': 16}
    values.update(kwargs)
    return EnvConfig(**values)


def resting_goal(params, table_height=0.0):
    """Цель в начальных положениях p0 и p1: ткань в покое уже решает задачу."""
    state, _ = build_cloth(params, (0.0, 0.0, table_height))
    idx = tracked_indices(params.grid_n)
    return Goal(state.positions[idx[0]].copy(), state.positions[idx[1]].copy())


def write_config(directory, name='run.conf', **overrides):
    values = dict(BASE_CONFIG)
    for key, value in overrides.items():
        key = key.replace('__', '.')
        if value is None:
            values.pop(key, None)
        else:
            values[key] = str(value)
    path = os.path.join(directory, name)
    with open(path, 'w') as f:
        for key, value in values.items():
            f.write(f'{key} = {value}\n')
    return path


def make_episode(rng, length, image_size=None):
    states = rng.normal(0.0, 0.05, size=(length + 1, 48))
    goal = rng.normal(0.0, 0.05, size=6)
    episode = []
    for t in range(length):
        image = None if image_size is None else rng.integers(0, 256, size=(image_size, image_size), dtype=np.uint8)
        episode.append(Transition(
            full_state=states[t],
            observation=Observation(image, rng.uniform(-1, 1, size=3), goal),
            action=rng.uniform(-1, 1, size=3),
            reward=-1.0,
            next_full_state=states[t + 1],
            next_observation=Observation(image, rng.uniform(-1, 1, size=3), goal),
            goal=goal,
            achieved_goal=achieved_from_state(states[t]),
            next_achieved_goal=achieved_from_state(states[t + 1]),
            done=t == length - 1,
        ))
    return episode
