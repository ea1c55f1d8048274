import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from core.exceptions import ConfigurationError, NotReadyError, NumericError
from folding.env import ACTION_DIM, Observation
from .buffer import DemoStore, Transition, achieved_from_state, her_relabel, sample_batch

logger = logging.getLogger(__name__)

EpochRow = namedtuple(
    'EpochRow',
    ['epoch', 'success_rate', 'mean_d_sum', 'critic1', 'critic2', 'actor', 'alpha', 'aux'],
)

EVAL_SEED_OFFSET = 1_000_000


@dataclass(frozen=True)
class Schedule:
    epochs: int = 100
    cycles: int = 20
    env_steps: int = 1000
    gradient_steps: int = 1000
    eval_episodes: int = 20

    def validate(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ConfigurationError(f'schedule.{name} must be non-negative')
        if self.eval_episodes < 1:
            raise ConfigurationError('schedule.eval_episodes must be at least 1')
        return self


def observation_from(obs):
    return Observation(obs.get('image'), np.asarray(obs['prev_action']), np.asarray(obs['desired_goal']))


def agent_policy(agent, deterministic=False):
    def policy(obs, info):
        action, _ = agent.select_action(observation_from(obs), deterministic, full_state=info['full_state'])
        return action
    return policy


def replay_policy(actions):
    """Политика без обратной связи: отдает сохраненные действия, затем нули."""
    actions = np.asarray(actions, dtype=np.float64)
    step = {'t': 0}

    def policy(obs, info):
        t = step['t']
        step['t'] += 1
        return actions[t] if t < len(actions) else np.zeros(ACTION_DIM)
    return policy


def random_policy(rng):
    def policy(obs, info):
        return rng.uniform(-1.0, 1.0, size=ACTION_DIM)
    return policy


def run_episode(env, policy, seed=None, options=None, max_steps=None, record=None, demo=False):
    obs, info = env.reset(seed=seed, options=options)
    if record is not None:
        record(env.snapshot(np.zeros(ACTION_DIM), seed))
    limit = env.episode.max_steps if max_steps is None else min(max_steps, env.episode.max_steps)
    transitions = []
    for _ in range(limit):
        action = np.asarray(policy(obs, info), dtype=np.float64)
        next_obs, r, terminated, truncated, next_info = env.step(action)
        applied = np.clip(action, -1.0, 1.0)
        transitions.append(Transition(
            full_state=info['full_state'],
            observation=observation_from(obs),
            action=applied,
            reward=r,
            next_full_state=next_info['full_state'],
            next_observation=observation_from(next_obs),
            goal=np.asarray(obs['desired_goal']),
            achieved_goal=achieved_from_state(info['full_state']),
            next_achieved_goal=achieved_from_state(next_info['full_state']),
            done=terminated,
            demo=demo,
            corner_labels=info['corner_labels'],
        ))
        if record is not None:
            record(env.snapshot(applied, seed))
        obs, info = next_obs, next_info
        if terminated or truncated:
            break
    return transitions, info


def ingest_demonstrations(env, demos, config, rng):
    episodes = []
    for demo in demos:
        actions = np.asarray(demo.actions)
        if config.demo_noise > 0:
            # Шум добавляется один раз при загрузке
            actions = np.clip(actions + rng.normal(0.0, config.demo_noise, size=actions.shape), -1.0, 1.0)
        seed = int(rng.integers(2 ** 31))
        try:
            transitions, _ = run_episode(
                env, replay_policy(actions), seed=seed,
                options={'goal': demo.goal}, max_steps=len(actions), demo=True,
            )
        except NumericError as exc:
            logger.warning('demonstration rollout discarded: %s', exc)
            continue
        episodes.append(transitions)
    logger.info('ingested %d of %d demonstrations', len(episodes), len(demos))
    return DemoStore(episodes, config.demo_fraction, config.her_k, env.episode.delta)


def store_episode(buffer, episode, config, rng, delta):
    buffer.add_trajectory(episode + her_relabel(episode, config.her_k, rng, delta))


def evaluate_policy(env, policy_factory, episodes, seed=0, fabric_indices=None, goals=None, record=None):
    rows = []
    for i in range(episodes):
        options = {}
        if fabric_indices is not None:
            options['fabric_index'] = fabric_indices[i]
        if goals is not None:
            options['goal'] = goals[i]
        transitions, info = run_episode(env, policy_factory(), seed=seed + i, options=options, record=record)
        rows.append({
            'episode': i,
            'fabric_index': info['fabric_index'],
            'd0': info['d0'],
            'd1': info['d1'],
            'd_sum': info['d_sum'],
            'success': bool(info['is_success']),
            'steps': len(transitions),
        })
    return rows


def summarize(rows):
    if not rows:
        return 0.0, float('nan')
    return (
        float(np.mean([row['success'] for row in rows])),
        float(np.mean([row['d_sum'] for row in rows])),
    )


def collect_cycle(env, agent, buffer, demo_store, steps, rng):
    collected = 0
    while collected < steps:
        seed = int(rng.integers(2 ** 31))
        try:
            episode, _ = run_episode(env, agent_policy(agent), seed=seed, max_steps=steps - collected)
        except NumericError as exc:
            logger.warning('episode with seed %d discarded: %s', seed, exc)
            collected += 1
            continue
        collected += len(episode)
        store_episode(buffer, episode, agent.config, rng, env.episode.delta)
        if demo_store is not None:
            demo_store.top_up(buffer, rng)
    return collected


def train_loop(env, agent, schedule, buffer, rng, demo_store=None, eval_env=None, start_epoch=0, on_epoch=None):
    schedule.validate()
    eval_env = eval_env or env
    eval_seed = agent.seed + EVAL_SEED_OFFSET
    rows = []
    for epoch in range(start_epoch, schedule.epochs):
        reports = []
        for cycle in range(schedule.cycles):
            collect_cycle(env, agent, buffer, demo_store, schedule.env_steps, rng)
            for _ in range(schedule.gradient_steps):
                try:
                    batch = sample_batch(buffer, demo_store, agent.config.batch_size, rng)
                except NotReadyError as exc:
                    logger.debug('skipping updates: %s', exc)
                    break
                reports.append(agent.sac_update(batch))
            logger.debug('epoch %d cycle %d: buffer %d, updates %d', epoch, cycle, len(buffer), agent.updates)

        evaluation = evaluate_policy(
            eval_env, lambda: agent_policy(agent, deterministic=True), schedule.eval_episodes, eval_seed,
        )
        success_rate, mean_d_sum = summarize(evaluation)
        losses = [None] * 5
        if reports:
            losses = [float(np.mean(values)) for values in zip(*reports)]
        row = EpochRow(epoch, success_rate, mean_d_sum, *losses)
        logger.info('epoch %d: success %.2f, d_sum %.4f', epoch, success_rate, mean_d_sum)
        rows.append(row)
        if on_epoch is not None:
            on_epoch(row)
    return rows
