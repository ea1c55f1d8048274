import copy
import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import torch

from core.exceptions import ConfigurationError, ContractError, TrainingError
from folding.env import ACTION_DIM, GOAL_DIM, STATE_DIM
from .losses import (
    actor_loss, aux_loss, critic_loss, critic_target, squashed_sample, temperature_loss,
)
from .networks import PolicyNet, QNet, StatePolicyNet, parameter_count

logger = logging.getLogger(__name__)

MODES = ('ours', 'ours-minus', 'fixed')

LossReport = namedtuple('LossReport', ['critic1', 'critic2', 'actor', 'alpha', 'aux'])


@dataclass(frozen=True)
class LearnerConfig:
    gamma: float = 0.99
    target_entropy: float = -float(ACTION_DIM)
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    initial_alpha: float = 0.1
    batch_size: int = 256
    tau: float = 0.005
    her_k: int = 4
    demo_fraction: float = 0.10
    demo_noise: float = 0.05
    aux_weight: float = 0.1
    buffer_capacity: int = 100000
    hidden: tuple = (256, 256)
    channels: tuple = (8, 16, 32)
    latent: int = 128
    image_size: int = 100
    state_dim: int = STATE_DIM

    def validate(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError(f'learner.gamma must lie in (0, 1], got {self.gamma}')
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigurationError(f'learner.tau must lie in [0, 1], got {self.tau}')
        if not 0.0 <= self.demo_fraction <= 1.0:
            raise ConfigurationError('learner.demo_fraction must lie in [0, 1]')
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ConfigurationError('learner.buffer_capacity must be >= learner.batch_size >= 1')
        if self.her_k < 0 or self.demo_noise < 0 or self.aux_weight < 0:
            raise ConfigurationError('learner.her_k, demo_noise and aux_weight must be non-negative')
        if self.initial_alpha <= 0:
            raise ConfigurationError('learner.initial_alpha must be positive')
        return self


def polyak_update(source, target, tau):
    with torch.no_grad():
        for target_param, param in zip(target.parameters(), source.parameters()):
            if tau == 0.0:
                continue
            if tau == 1.0:
                target_param.copy_(param)
            else:
                target_param.mul_(1.0 - tau).add_(param, alpha=tau)


def check_finite(name, value):
    if not torch.isfinite(value).all():
        raise TrainingError(f'{name} loss is not finite ({value.item()})')


class SACAgent:
    def __init__(self, config=None, mode='ours', seed=0):
        if mode not in MODES:
            raise ConfigurationError(f'unknown mode {mode!r}, expected one of {MODES}')
        self.config = (config or LearnerConfig()).validate()
        self.mode = mode
        self.seed = seed
        torch.manual_seed(seed)
        self.generator = torch.Generator().manual_seed(seed)

        c = self.config
        if mode == 'fixed':
            self.actor = StatePolicyNet(c.state_dim, c.hidden)
        else:
            self.actor = PolicyNet(c.image_size, c.channels, c.latent, c.hidden)
        self.q1 = QNet(c.state_dim, c.hidden)
        self.q2 = QNet(c.state_dim, c.hidden)
        self.q1_target = copy.deepcopy(self.q1)
        self.q2_target = copy.deepcopy(self.q2)
        self.log_alpha = torch.tensor(np.log(c.initial_alpha), dtype=torch.float32, requires_grad=True)

        self.actor_optimizer = torch.optim.Adam(self.actor.parameters(), lr=c.actor_lr)
        self.critic_optimizer = torch.optim.Adam(
            list(self.q1.parameters()) + list(self.q2.parameters()), lr=c.critic_lr,
        )
        self.alpha_optimizer = torch.optim.Adam([self.log_alpha], lr=c.alpha_lr)
        self.updates = 0
        logger.debug('created %s agent, %d actor parameters', mode, parameter_count(self.actor))

    @property
    def observes_images(self):
        return self.actor.observes_images

    @property
    def alpha(self):
        return float(self.log_alpha.exp())

    # Действия

    def _check_observation(self, observation, full_state):
        size = self.config.image_size
        if self.observes_images:
            if observation.image is None or np.shape(observation.image) != (size, size):
                raise ContractError(f'image must have shape ({size}, {size})')
        elif full_state is None or np.shape(full_state) != (self.config.state_dim,):
            raise ContractError(f'full_state must have shape ({self.config.state_dim},)')
        if np.shape(observation.prev_action) != (ACTION_DIM,):
            raise ContractError(f'prev_action must have shape ({ACTION_DIM},)')
        if np.shape(observation.goal) != (GOAL_DIM,):
            raise ContractError(f'goal must have shape ({GOAL_DIM},)')

    def select_action(self, observation, deterministic=False, full_state=None):
        self._check_observation(observation, full_state)
        if self.observes_images:
            primary = torch.as_tensor(np.asarray(observation.image, dtype=np.uint8)).unsqueeze(0)
        else:
            primary = torch.as_tensor(np.asarray(full_state), dtype=torch.float32).unsqueeze(0)
        prev_action = torch.as_tensor(np.asarray(observation.prev_action), dtype=torch.float32).unsqueeze(0)
        goal = torch.as_tensor(np.asarray(observation.goal), dtype=torch.float32).unsqueeze(0)

        with torch.no_grad():
            mean, log_std, corners = self.actor(primary, prev_action, goal)
            if deterministic:
                action = torch.tanh(mean)
            else:
                noise = torch.randn(mean.shape, generator=self.generator)
                action, _ = squashed_sample(mean, log_std, noise)
        corners = None if corners is None else corners[0].numpy().astype(np.float64)
        return action[0].numpy().astype(np.float64), corners

    # Обучение

    def _batch_tensors(self, batch):
        def tensor(array):
            return None if array is None else torch.as_tensor(array, dtype=torch.float32)

        t = {
            'full_states': tensor(batch.full_states),
            'next_full_states': tensor(batch.next_full_states),
            'prev_actions': tensor(batch.prev_actions),
            'next_prev_actions': tensor(batch.next_prev_actions),
            'goals': tensor(batch.goals),
            'actions': tensor(batch.actions),
            'rewards': tensor(batch.rewards),
            'dones': tensor(batch.dones),
            'labels': tensor(batch.labels),
        }
        if self.observes_images:
            if batch.images is None or batch.next_images is None:
                raise ContractError('image actor needs image observations in the batch')
            t['primary'] = torch.as_tensor(batch.images)
            t['next_primary'] = torch.as_tensor(batch.next_images)
        else:
            t['primary'] = t['full_states']
            t['next_primary'] = t['next_full_states']
        return t

    def sac_update(self, batch):
        c = self.config
        t = self._batch_tensors(batch)
        alpha = self.log_alpha.exp().detach()

        with torch.no_grad():
            mean, log_std, _ = self.actor(t['next_primary'], t['next_prev_actions'], t['goals'])
            noise = torch.randn(mean.shape, generator=self.generator)
            next_action, next_log_prob = squashed_sample(mean, log_std, noise)
            target = critic_target(
                t['rewards'], t['dones'],
                self.q1_target(t['next_full_states'], t['goals'], next_action),
                self.q2_target(t['next_full_states'], t['goals'], next_action),
                next_log_prob, alpha, c.gamma,
            )

        q1_loss = critic_loss(self.q1(t['full_states'], t['goals'], t['actions']), target)
        q2_loss = critic_loss(self.q2(t['full_states'], t['goals'], t['actions']), target)
        check_finite('critic1', q1_loss)
        check_finite('critic2', q2_loss)
        self.critic_optimizer.zero_grad()
        (q1_loss + q2_loss).backward()
        self.critic_optimizer.step()

        mean, log_std, corners = self.actor(t['primary'], t['prev_actions'], t['goals'])
        noise = torch.randn(mean.shape, generator=self.generator)
        action, log_prob = squashed_sample(mean, log_std, noise)
        pi_loss = actor_loss(
            alpha, log_prob,
            self.q1(t['full_states'], t['goals'], action),
            self.q2(t['full_states'], t['goals'], action),
            corners, t['labels'], c.aux_weight,
        )
        check_finite('actor', pi_loss)
        self.actor_optimizer.zero_grad()
        pi_loss.backward()
        self.actor_optimizer.step()

        alpha_loss = temperature_loss(self.log_alpha, log_prob, c.target_entropy)
        check_finite('temperature', alpha_loss)
        self.alpha_optimizer.zero_grad()
        alpha_loss.backward()
        self.alpha_optimizer.step()

        polyak_update(self.q1, self.q1_target, c.tau)
        polyak_update(self.q2, self.q2_target, c.tau)
        self.updates += 1

        aux = 0.0
        if corners is not None and t['labels'] is not None:
            aux = float(aux_loss(corners.detach(), t['labels']))
        return LossReport(float(q1_loss), float(q2_loss), float(pi_loss), self.alpha, aux)

    # Веса

    def modules(self):
        return {
            'actor': self.actor,
            'q1': self.q1,
            'q2': self.q2,
            'q1_target': self.q1_target,
            'q2_target': self.q2_target,
        }

    def named_tensors(self):
        tensors = []
        for prefix, module in self.modules().items():
            for name, tensor in module.state_dict().items():
                tensors.append((f'{prefix}.{name}', tensor))
        tensors.append(('log_alpha', self.log_alpha.detach().reshape(1)))
        return tensors

    def load_tensors(self, tensors):
        expected = [name for name, _ in self.named_tensors()]
        missing = set(expected) - set(tensors)
        unexpected = set(tensors) - set(expected)
        if missing or unexpected:
            raise ContractError(
                f'checkpoint layers do not match the {self.mode} agent '
                f'(missing {sorted(missing)[:3]}, unexpected {sorted(unexpected)[:3]})'
            )
        for prefix, module in self.modules().items():
            state = {
                name[len(prefix) + 1:]: tensor
                for name, tensor in tensors.items() if name.startswith(prefix + '.')
            }
            module.load_state_dict(state)
        with torch.no_grad():
            self.log_alpha.copy_(tensors['log_alpha'].reshape(()))
