import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from cloth.physics import PHYSICAL_FIELDS, ClothParams
from core.exceptions import (
    ConfigurationError, ExpertGenerationError, IdentificationError, NumericError, ParameterError,
)
from .env import ACTION_DIM, EnvConfig, FoldEnv, Goal

logger = logging.getLogger(__name__)

DEFAULT_POOL_SIZE = 20
DEFAULT_CANDIDATES = 200


@dataclass(frozen=True)
class ParamRanges:
    mass_per_point: tuple = (0.002, 0.006)
    k_struct: tuple = (20.0, 60.0)
    k_shear: tuple = (5.0, 15.0)
    k_bend: tuple = (2.0, 6.0)
    damping: tuple = (0.02, 0.06)
    air_drag: tuple = (0.001, 0.004)
    friction: tuple = (0.3, 0.8)

    def validate(self):
        for name in PHYSICAL_FIELDS:
            low, high = getattr(self, name)
            if not 0 < low <= high:
                raise ConfigurationError(f'invalid range for {name}: [{low}, {high}]')
        return self


@dataclass
class Demonstration:
    actions: np.ndarray
    goal: Goal
    annotation: str = ''

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.float64).reshape(-1, ACTION_DIM)
        if len(self.actions) == 0:
            raise ParameterError('demonstration has no actions')
        if np.abs(self.actions).max() > 1.0:
            raise ParameterError('demonstration actions must lie in [-1, 1]')


@dataclass
class FabricPool:
    entries: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    seed: int = None

    def __len__(self):
        return len(self.entries)

    def best(self):
        return self.entries[0]


def sample_cloth_params(rng, ranges, base=None):
    ranges.validate()
    base = base or ClothParams()
    values = {name: float(rng.uniform(*getattr(ranges, name))) for name in PHYSICAL_FIELDS}
    return replace(base, **values)


def replay_env(params, env_config=None):
    config = replace(env_config or EnvConfig(), render_observations=False, randomize_visuals=False)
    return FoldEnv([params], config)


def replay_actions(env, actions, goal):
    """Прогон последовательности действий без обратной связи; возвращает info последнего шага."""
    _, info = env.reset(seed=0, options={'goal': goal, 'fabric_index': 0})
    last_reward = -1.0
    for action in actions:
        _, last_reward, terminated, truncated, info = env.step(action)
        if terminated or truncated:
            break
    return last_reward, info


class WaypointTracker:
    """Жадное отслеживание путевых точек командной позицией захвата."""

    def __init__(self, waypoints, action_scale, tolerance=1e-3):
        self.waypoints = [np.asarray(w, dtype=np.float64) for w in waypoints]
        self.action_scale = action_scale
        self.tolerance = tolerance
        self.index = 0

    def __call__(self, desired):
        while self.index < len(self.waypoints) - 1:
            if np.linalg.norm(self.waypoints[self.index] - desired) > self.tolerance:
                break
            self.index += 1
        delta = (self.waypoints[self.index] - desired) / self.action_scale
        return np.clip(delta, -1.0, 1.0)


def expert_waypoints(grasp, goal, side_length, lift, overshoot, carry_height):
    # Подъем, перенос через линию сгиба к g1, укладка
    g1 = goal.g1
    lift_point = grasp + np.array([0.0, overshoot * side_length, lift * side_length])
    carry_point = g1 + np.array([0.0, overshoot * side_length, carry_height * side_length])
    return [lift_point, carry_point, g1]


EXPERT_FAMILY = tuple(itertools.product(
    (0.25, 0.5, 0.75, 1.0),   # высота подъема, доли стороны
    (0.0, 0.15, 0.3, 0.5),    # вынос за цель по y
    (0.15, 0.3, 0.5),         # высота переноса
))


def scripted_expert(reference_cloth, goal, env_config=None):
    env = replay_env(reference_cloth, env_config)
    scale = env.episode.action_scale
    best = None
    for lift, overshoot, carry in EXPERT_FAMILY:
        env.reset(seed=0, options={'goal': goal, 'fabric_index': 0})
        tracker = WaypointTracker(
            expert_waypoints(env.desired.copy(), goal, reference_cloth.side_length, lift, overshoot, carry),
            scale,
        )
        actions = []
        info = {}
        try:
            for _ in range(env.episode.max_steps):
                action = tracker(env.desired)
                actions.append(action)
                _, _, terminated, truncated, info = env.step(action)
                if terminated or truncated:
                    break
        except NumericError:
            continue
        if best is None or info['d_sum'] < best[0]:
            best = (info['d_sum'], lift, overshoot, carry)
        if info['is_success']:
            annotation = f'lift={lift} overshoot={overshoot} carry={carry}'
            logger.debug('expert succeeded with %s, d_sum=%.4f', annotation, info['d_sum'])
            return Demonstration(np.array(actions), goal, annotation)

    detail = 'no stable rollout' if best is None else f'best d_sum={best[0]:.4f} at {best[1:]}'
    raise ExpertGenerationError(f'scripted expert failed on the reference cloth ({detail})')


def score_candidate(candidate, demos, env_config=None):
    if not demos:
        raise ParameterError('at least one demonstration is required')
    try:
        env = replay_env(candidate, env_config)
        rewards = [replay_actions(env, demo.actions, demo.goal)[0] for demo in demos]
    except (NumericError, ParameterError) as exc:
        return -1.0, str(exc)
    return float(np.mean(rewards)), None


def evaluate_candidate(candidate, demos, env_config=None):
    return score_candidate(candidate, demos, env_config)[0]


def rank_candidates(scores):
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def identify_top_m(rng, ranges, demos, n_candidates=DEFAULT_CANDIDATES, m=DEFAULT_POOL_SIZE,
                   base=None, env_config=None, workers=1, seed=None, reference=None):
    if n_candidates < m:
        raise ConfigurationError(f'n_candidates ({n_candidates}) must be >= M ({m})')
    # Эталонная ткань, если задана, идет первым кандидатом
    candidates = [reference] if reference is not None else []
    candidates += [sample_cloth_params(rng, ranges, base) for _ in range(n_candidates - len(candidates))]

    def run(candidate):
        return score_candidate(candidate, demos, env_config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, candidates))
    else:
        results = [run(candidate) for candidate in candidates]

    scores = [score for score, _ in results]
    failures = [(i, reason) for i, (_, reason) in enumerate(results) if reason is not None]
    if n_candidates - len(failures) < m:
        raise IdentificationError(
            f'only {n_candidates - len(failures)} of {n_candidates} candidates simulated stably, need {m}',
            failures,
        )
    for i, reason in failures:
        logger.warning('candidate %d failed: %s', i, reason)

    valid = [i for i in rank_candidates(scores) if results[i][1] is None][:m]
    logger.info('selected %d fabrics, scores %.3f..%.3f', m, scores[valid[0]], scores[valid[-1]])
    return FabricPool([candidates[i] for i in valid], [scores[i] for i in valid], seed)
