import logging
from collections import namedtuple
from dataclasses import dataclass, field, replace

import gymnasium as gym
import numpy as np
from gymnasium import spaces

from cloth.effector import (
    ControllerGains, EffectorState, interpolate_setpoint, osc_command, step_effector,
)
from cloth.physics import (
    GRASPED_INDEX, GRAVITY, Support, accumulate_forces, build_cloth, grid_index, grid_triangles,
    step_cloth, tracked_indices, tracked_vector,
)
from cloth.rendering import (
    CameraConfig, VisualConfig, VisualRanges, corner_labels, jitter_camera, render,
    sample_visual_config,
)
from core.exceptions import ConfigurationError, ContractError, NumericError

logger = logging.getLogger(__name__)

ACTION_DIM = 3
GOAL_DIM = 6
STATE_DIM = 8 * 6
LABEL_DIM = 16

Metrics = namedtuple('Metrics', ['d0', 'd1', 'd_sum', 'success'])


@dataclass
class Goal:
    g0: np.ndarray
    g1: np.ndarray

    def __post_init__(self):
        self.g0 = np.asarray(self.g0, dtype=np.float64)
        self.g1 = np.asarray(self.g1, dtype=np.float64)

    def vector(self):
        return np.concatenate([self.g0, self.g1])

    @classmethod
    def from_vector(cls, vector):
        vector = np.asarray(vector, dtype=np.float64)
        return cls(vector[:3], vector[3:6])


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 25
    substeps: int = 10
    sim_dt: float = 0.010
    delta: float = 0.04
    action_scale: float = 0.03
    hold_limit: int = 10
    goal_radius: float = 0.02
    physics_iterations: int = 5

    def validate(self):
        for name in self.__dataclass_fields__:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f'episode.{name} must be positive')
        return self

    @property
    def policy_dt(self):
        return self.substeps * self.sim_dt


@dataclass(frozen=True)
class EnvConfig:
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    effector_mass: float = 1.0
    kp: float = 300.0
    table_height: float = 0.0
    gravity: tuple = tuple(GRAVITY)
    render_observations: bool = True
    randomize_visuals: bool = True
    image_size: int = 100
    visual_ranges: VisualRanges = field(default_factory=VisualRanges)
    visual: VisualConfig = field(default_factory=VisualConfig)


@dataclass
class Observation:
    image: np.ndarray
    prev_action: np.ndarray
    goal: np.ndarray


@dataclass
class StepResult:
    observation: Observation
    full_state: np.ndarray
    reward: float
    done: bool
    info: dict


def reward(p0, p1, g0, g1, delta):
    d0 = float(np.linalg.norm(np.asarray(p0) - np.asarray(g0)))
    d1 = float(np.linalg.norm(np.asarray(p1) - np.asarray(g1)))
    if d0 <= delta and d1 <= delta:
        return 0.5 * ((1.0 - d0 / delta) + (1.0 - d1 / delta))
    return -1.0


def batch_reward(achieved_goal, desired_goal, delta):
    achieved = np.asarray(achieved_goal, dtype=np.float64).reshape(-1, GOAL_DIM)
    desired = np.asarray(desired_goal, dtype=np.float64).reshape(-1, GOAL_DIM)
    d0 = np.linalg.norm(achieved[:, :3] - desired[:, :3], axis=1)
    d1 = np.linalg.norm(achieved[:, 3:] - desired[:, 3:], axis=1)
    success = (d0 <= delta) & (d1 <= delta)
    return np.where(success, 0.5 * ((1.0 - d0 / delta) + (1.0 - d1 / delta)), -1.0)


def check_termination(d1_history, config):
    held = 0
    for d1 in reversed(d1_history):
        if d1 > config.delta:
            break
        held += 1
    if held > config.hold_limit:
        return True, 'hold'
    if len(d1_history) >= config.max_steps:
        return True, 'timeout'
    return False, None


def metrics(p, g, delta):
    d0 = float(np.linalg.norm(np.asarray(p[0]) - np.asarray(g[0])))
    d1 = float(np.linalg.norm(np.asarray(p[1]) - np.asarray(g[1])))
    return Metrics(d0, d1, d0 + d1, d0 <= delta and d1 <= delta)


def sample_in_ball(rng, center, radius):
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return np.asarray(center) + direction * radius * rng.uniform() ** (1.0 / 3.0)


def fold_corners(positions, grid_n):
    # Углы, соседние с p0 и p1 через линию сгиба
    return positions[grid_index(grid_n, grid_n - 1, grid_n - 1)], positions[grid_index(grid_n, grid_n - 1, 0)]


def sample_goal(rng, positions, grid_n, radius):
    corner0, corner1 = fold_corners(positions, grid_n)
    g1 = sample_in_ball(rng, corner1, radius)
    g0 = sample_in_ball(rng, corner0, radius)
    return Goal(g0, g1)


class FoldEnv(gym.Env):
    metadata = {'render_modes': []}

    def __init__(self, fabrics, config=None):
        fabrics = list(fabrics)
        if not fabrics:
            raise ConfigurationError('cloth parameter pool is empty')
        self.fabrics = [params.validate() for params in fabrics]
        self.config = config or EnvConfig()
        self.episode = self.config.episode.validate()
        self.gravity = np.asarray(self.config.gravity, dtype=np.float64)
        self.gains = ControllerGains.critically_damped(self.config.kp, self.config.effector_mass)
        self.support = None

        base = self.fabrics[0]
        self.origin = np.array([0.0, 0.0, self.config.table_height])
        half = 0.5 * base.side_length
        self.nominal_camera = CameraConfig.side_view(
            self.origin + np.array([half, half, 0.0]), image_size=self.config.image_size,
        )
        self.visual_ranges = replace(self.config.visual_ranges, nominal=self.nominal_camera)

        self.action_space = spaces.Box(-1.0, 1.0, shape=(ACTION_DIM,), dtype=np.float32)
        observation_spaces = {
            'prev_action': spaces.Box(-1.0, 1.0, shape=(ACTION_DIM,), dtype=np.float64),
            'desired_goal': spaces.Box(-np.inf, np.inf, shape=(GOAL_DIM,), dtype=np.float64),
            'achieved_goal': spaces.Box(-np.inf, np.inf, shape=(GOAL_DIM,), dtype=np.float64),
        }
        if self.config.render_observations:
            size = self.config.image_size
            observation_spaces['image'] = spaces.Box(0, 255, shape=(size, size), dtype=np.uint8)
        self.observation_space = spaces.Dict(observation_spaces)

        self.cloth = None
        self.active = False
        self.last_result = None

    # Жизненный цикл эпизода

    def reset(self, *, seed=None, options=None):
        super().reset(seed=seed)
        options = options or {}
        rng = self.np_random

        index = options.get('fabric_index')
        if index is None:
            index = int(rng.integers(len(self.fabrics)))
        self.fabric_index = index
        self.params = self.fabrics[index]
        self.support = Support(self.config.table_height, self.params.friction)

        if self.config.randomize_visuals:
            self.camera, self.visual = sample_visual_config(rng, self.visual_ranges)
        else:
            self.camera, self.visual = self.nominal_camera, self.config.visual

        self.cloth, self.topology = build_cloth(self.params, self.origin)
        self.triangles = grid_triangles(self.params.grid_n)
        self.tracked = tracked_indices(self.params.grid_n)
        grasp = self.cloth.positions[GRASPED_INDEX].copy()
        self.effector = EffectorState(grasp, np.zeros(3), self.config.effector_mass)
        self.desired = grasp.copy()
        self.setpoint = grasp.copy()

        goal = options.get('goal')
        if goal is None:
            goal = sample_goal(rng, self.cloth.positions, self.params.grid_n, self.episode.goal_radius)
        self.goal = goal
        self.prev_action = np.zeros(ACTION_DIM)
        self.steps = 0
        self.d1_history = []
        self.active = True

        result = self._result(0.0, False, {'reason': None, 'action_clipped': False})
        return self._observation_dict(result), result.info

    def step(self, action):
        if not self.active:
            raise ContractError('episode is not active, call reset() first')
        action = np.asarray(action, dtype=np.float64).reshape(ACTION_DIM)
        clipped = np.clip(action, -1.0, 1.0)
        was_clipped = not np.array_equal(clipped, action)
        if was_clipped:
            logger.warning('action %s clamped to [-1, 1]', action.tolist())

        target = self.desired + clipped * self.episode.action_scale
        target[2] = max(target[2], self.config.table_height)
        displacement = target - self.desired
        self.last_target = target

        h = self.episode.sim_dt / self.episode.physics_iterations
        for _ in range(self.episode.substeps):
            self.setpoint = interpolate_setpoint(self.desired, displacement, self.setpoint)
            for _ in range(self.episode.physics_iterations):
                self._integrate(h)
        if not self.cloth.is_finite():
            self.active = False
            raise NumericError('cloth state became non-finite')

        self.desired = target
        self.prev_action = clipped
        self.steps += 1

        p0, p1 = self.corners()
        r = reward(p0, p1, self.goal.g0, self.goal.g1, self.episode.delta)
        self.d1_history.append(float(np.linalg.norm(p1 - self.goal.g1)))
        done, reason = check_termination(self.d1_history, self.episode)
        self.active = not done

        result = self._result(r, done, {'reason': reason, 'action_clipped': was_clipped})
        terminated = reason == 'hold'
        truncated = reason == 'timeout'
        return self._observation_dict(result), r, terminated, truncated, result.info

    def _integrate(self, h):
        forces = accumulate_forces(self.cloth, self.topology, self.params, self.gravity)
        # Реакция ткани передается на захват
        reaction = forces[GRASPED_INDEX]
        command = osc_command(self.effector, self.setpoint, self.gains, self.gravity)
        self.effector = step_effector(self.effector, command, h, self.gravity, external=reaction)
        self.cloth = step_cloth(
            self.cloth, forces, self.params, h,
            anchor=(self.effector.position, self.effector.velocity),
            support=self.support,
        )

    # Наблюдения

    def corners(self):
        return self.cloth.positions[self.tracked[0]], self.cloth.positions[self.tracked[1]]

    def achieved_goal(self):
        p0, p1 = self.corners()
        return np.concatenate([p0, p1])

    def full_state(self):
        return tracked_vector(self.cloth, self.params.grid_n)

    def compute_reward(self, achieved_goal, desired_goal, info=None):
        return batch_reward(achieved_goal, desired_goal, self.episode.delta)

    def _result(self, r, done, extra):
        image, labels = None, None
        if self.config.render_observations:
            camera = jitter_camera(self.camera, self.visual.camera_jitter, self.np_random)
            noise_seed = int(self.np_random.integers(2 ** 31))
            image = render(self.cloth.positions, self.triangles, camera, self.visual, noise_seed)
            labels = corner_labels(self.cloth.positions[self.tracked], camera)

        p0, p1 = self.corners()
        m = metrics((p0, p1), (self.goal.g0, self.goal.g1), self.episode.delta)
        info = {
            'd0': m.d0,
            'd1': m.d1,
            'd_sum': m.d_sum,
            'is_success': m.success,
            'corner_labels': labels,
            'full_state': self.full_state(),
            'achieved_goal': self.achieved_goal(),
            'fabric_index': self.fabric_index,
            'step': self.steps,
        }
        info.update(extra)
        observation = Observation(image, self.prev_action.copy(), self.goal.vector())
        self.last_result = StepResult(observation, info['full_state'], r, done, info)
        return self.last_result

    def _observation_dict(self, result):
        obs = {
            'prev_action': result.observation.prev_action,
            'desired_goal': result.observation.goal,
            'achieved_goal': result.info['achieved_goal'],
        }
        if result.observation.image is not None:
            obs['image'] = result.observation.image
        return obs

    def snapshot(self, action, seed=None):
        p0, p1 = self.corners()
        return {
            'step': self.steps,
            'action': np.asarray(action, dtype=np.float64).tolist(),
            'effector_position': self.effector.position.tolist(),
            'tracked_points': self.cloth.positions[self.tracked].tolist(),
            'reward': self.last_result.reward,
            'd0': self.last_result.info['d0'],
            'd1': self.last_result.info['d1'],
            'done': self.last_result.done,
            'seed': seed,
            'goal': self.goal.vector().tolist(),
            'grid_n': self.params.grid_n,
            'positions': self.cloth.positions.tolist(),
        }
