import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from core.exceptions import ContractError, NotReadyError
from folding.env import Observation, reward

logger = logging.getLogger(__name__)


@dataclass
class Transition:
    full_state: np.ndarray
    observation: Observation
    action: np.ndarray
    reward: float
    next_full_state: np.ndarray
    next_observation: Observation
    goal: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    done: bool = False
    demo: bool = False
    corner_labels: np.ndarray = None

    def with_goal(self, goal, value):
        return replace(
            self,
            goal=goal,
            reward=value,
            observation=replace(self.observation, goal=goal),
            next_observation=replace(self.next_observation, goal=goal),
            done=False,
        )


def achieved_from_state(full_state):
    # Раскладка: по 6 чисел на точку (положение, скорость); p0 и p1 идут первыми
    full_state = np.asarray(full_state)
    return np.concatenate([full_state[0:3], full_state[6:9]])


def her_relabel(episode, k, rng, delta):
    if not episode:
        raise ContractError('cannot relabel an empty episode')
    relabeled = []
    last = len(episode) - 1
    for t, transition in enumerate(episode):
        for _ in range(k):
            future = episode[int(rng.integers(t, last + 1))]
            goal = np.array(future.next_achieved_goal, dtype=np.float64)
            achieved = transition.next_achieved_goal
            r = reward(achieved[:3], achieved[3:], goal[:3], goal[3:], delta)
            relabeled.append(transition.with_goal(goal, r))
    return relabeled


class ReplayBuffer:
    def __init__(self, capacity):
        if capacity < 1:
            raise ContractError(f'buffer capacity must be positive, got {capacity}')
        self.capacity = int(capacity)
        self.storage = []
        self.position = 0
        self.trajectories = {'agent': 0, 'demo': 0}

    def __len__(self):
        return len(self.storage)

    def add(self, transition):
        if len(self.storage) < self.capacity:
            self.storage.append(transition)
        else:
            self.storage[self.position] = transition
        self.position = (self.position + 1) % self.capacity

    def add_trajectory(self, transitions, demo=False):
        for transition in transitions:
            self.add(transition)
        self.trajectories['demo' if demo else 'agent'] += 1

    def sample(self, batch_size, rng):
        if len(self.storage) < batch_size:
            raise NotReadyError(f'buffer holds {len(self.storage)} transitions, need {batch_size}')
        indices = rng.integers(len(self.storage), size=batch_size)
        return Batch.from_transitions([self.storage[i] for i in indices])


class DemoStore:
    """Эпизоды демонстраций, уже прогнанные в среде с шумом действий."""

    def __init__(self, episodes, fraction=0.10, her_k=4, delta=0.04):
        self.episodes = list(episodes)
        self.fraction = fraction
        self.her_k = her_k
        self.delta = delta
        self.inserted = 0

    def due(self, agent_trajectories):
        if not self.episodes:
            return 0
        return int(math.floor(agent_trajectories * self.fraction + 1e-9))

    def top_up(self, buffer, rng):
        added = 0
        while self.inserted < self.due(buffer.trajectories['agent']):
            episode = self.episodes[self.inserted % len(self.episodes)]
            buffer.add_trajectory(episode + her_relabel(episode, self.her_k, rng, self.delta), demo=True)
            self.inserted += 1
            added += 1
        if added:
            logger.debug('inserted %d demonstration trajectories', added)
        return added


def sample_batch(buffer, demo_store, batch_size, rng):
    if demo_store is not None:
        demo_store.top_up(buffer, rng)
    return buffer.sample(batch_size, rng)


@dataclass
class Batch:
    full_states: np.ndarray
    next_full_states: np.ndarray
    images: np.ndarray
    next_images: np.ndarray
    prev_actions: np.ndarray
    next_prev_actions: np.ndarray
    goals: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    labels: np.ndarray
    demo: np.ndarray

    def __len__(self):
        return len(self.rewards)

    @classmethod
    def from_transitions(cls, transitions):
        def stack(values, dtype=np.float64):
            if any(v is None for v in values):
                return None
            return np.stack([np.asarray(v, dtype=dtype) for v in values])

        return cls(
            full_states=stack([t.full_state for t in transitions]),
            next_full_states=stack([t.next_full_state for t in transitions]),
            images=stack([t.observation.image for t in transitions], np.uint8),
            next_images=stack([t.next_observation.image for t in transitions], np.uint8),
            prev_actions=stack([t.observation.prev_action for t in transitions]),
            next_prev_actions=stack([t.next_observation.prev_action for t in transitions]),
            goals=stack([t.goal for t in transitions]),
            actions=stack([t.action for t in transitions]),
            rewards=np.array([t.reward for t in transitions], dtype=np.float64),
            dones=np.array([t.done for t in transitions], dtype=np.float64),
            labels=stack([t.corner_labels for t in transitions]),
            demo=np.array([t.demo for t in transitions], dtype=bool),
        )
