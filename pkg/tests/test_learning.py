import os
import tempfile

import numpy as np
import torch
from django.test import SimpleTestCase
from torch.func import functional_call

from core.exceptions import ConfigurationError, ContractError, ParameterError
from folding.env import Observation
from learning.buffer import Batch
from learning.checkpoint import MAGIC, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from learning.losses import (
    actor_loss, critic_loss, critic_target, squashed_sample, temperature_loss,
)
from learning.networks import PolicyNet, QNet, parameter_count
from learning.sac import LearnerConfig, SACAgent, polyak_update
from tests.helpers import make_episode

TINY = LearnerConfig(
    hidden=(16,), channels=(4,), latent=8, image_size=16, batch_size=8, buffer_capacity=100,
)


def flat_parameters(module):
    return torch.cat([p.detach().reshape(-1) for p in module.parameters()]).clone().requires_grad_(True)


def unflatten(module, flat):
    params = {}
    offset = 0
    for name, p in module.named_parameters():
        params[name] = flat[offset:offset + p.numel()].view_as(p)
        offset += p.numel()
    return params


class GradientCheckTests(SimpleTestCase):
    def setUp(self):
        torch.manual_seed(0)
        self.policy = PolicyNet(image_size=8, channels=(1,), latent=2, hidden=()).double()
        self.critic = QNet(hidden=(2,)).double()
        batch = 3
        self.image = torch.randint(0, 256, (batch, 8, 8), dtype=torch.uint8)
        self.prev_action = torch.rand(batch, 3, dtype=torch.float64) * 2 - 1
        self.goal = torch.randn(batch, 6, dtype=torch.float64) * 0.1
        self.state = torch.randn(batch, 48, dtype=torch.float64) * 0.1
        self.noise = torch.randn(batch, 3, dtype=torch.float64)
        self.labels = torch.rand(batch, 16, dtype=torch.float64)

    def test_networks_are_small(self):
        self.assertLessEqual(parameter_count(self.policy), 200)
        self.assertLessEqual(parameter_count(self.critic), 200)

    def test_actor_and_aux_loss_gradients(self):
        def loss(flat):
            mean, log_std, corners = functional_call(
                self.policy, unflatten(self.policy, flat), (self.image, self.prev_action, self.goal),
            )
            action, log_prob = squashed_sample(mean, log_std, self.noise)
            q1 = self.critic(self.state, self.goal, action)
            q2 = q1 + 0.1
            return actor_loss(torch.tensor(0.2, dtype=torch.float64), log_prob, q1, q2,
                              corners, self.labels, aux_weight=0.5)

        self.assertTrue(torch.autograd.gradcheck(loss, (flat_parameters(self.policy),), eps=1e-6, atol=1e-8, rtol=1e-4))

    def test_critic_loss_gradients(self):
        action = torch.rand(3, 3, dtype=torch.float64) * 2 - 1
        target = torch.randn(3, dtype=torch.float64)

        def loss(flat):
            q = functional_call(self.critic, unflatten(self.critic, flat), (self.state, self.goal, action))
            return critic_loss(q, target)

        self.assertTrue(torch.autograd.gradcheck(loss, (flat_parameters(self.critic),), eps=1e-6, atol=1e-8, rtol=1e-4))

    def test_temperature_loss_gradient(self):
        log_prob = torch.randn(5, dtype=torch.float64)
        log_alpha = torch.tensor(-1.0, dtype=torch.float64, requires_grad=True)
        self.assertTrue(torch.autograd.gradcheck(
            lambda a: temperature_loss(a, log_prob, -3.0), (log_alpha,), eps=1e-6, atol=1e-8, rtol=1e-4,
        ))


class LossTests(SimpleTestCase):
    def test_zero_discount_target_is_reward(self):
        reward = torch.tensor([1.0, -1.0, 0.5])
        target = critic_target(reward, torch.zeros(3), torch.randn(3), torch.randn(3), torch.randn(3), 0.1, 0.0)
        torch.testing.assert_close(target, reward)

    def test_done_stops_bootstrapping(self):
        target = critic_target(torch.tensor([0.5]), torch.tensor([1.0]), torch.tensor([9.0]),
                               torch.tensor([9.0]), torch.tensor([0.0]), 0.1, 0.99)
        torch.testing.assert_close(target, torch.tensor([0.5]))

    def test_clipped_double_q_uses_minimum(self):
        target = critic_target(torch.tensor([0.0]), torch.tensor([0.0]), torch.tensor([2.0]),
                               torch.tensor([1.0]), torch.tensor([0.0]), 0.1, 1.0)
        torch.testing.assert_close(target, torch.tensor([1.0]))

    def test_zero_aux_weight_ignores_corners(self):
        log_prob, q1, q2 = torch.randn(4), torch.randn(4), torch.randn(4)
        corners, labels = torch.rand(4, 16), torch.rand(4, 16)
        torch.testing.assert_close(
            actor_loss(0.2, log_prob, q1, q2, corners, labels, 0.0),
            actor_loss(0.2, log_prob, q1, q2),
        )

    def test_squashed_sample_stays_in_action_range(self):
        mean = torch.randn(1000, 3) * 5
        action, log_prob = squashed_sample(mean, torch.zeros(1000, 3), torch.randn(1000, 3))
        self.assertTrue(bool((action.abs() <= 1.0).all()))
        self.assertTrue(bool(torch.isfinite(log_prob).all()))


class PolyakTests(SimpleTestCase):
    def setUp(self):
        torch.manual_seed(0)
        self.source = QNet(hidden=(4,))
        self.target = QNet(hidden=(4,))

    def test_zero_tau_keeps_target(self):
        before = [p.clone() for p in self.target.parameters()]
        polyak_update(self.source, self.target, 0.0)
        for a, b in zip(before, self.target.parameters()):
            torch.testing.assert_close(a, b, rtol=0, atol=0)

    def test_unit_tau_copies_source(self):
        polyak_update(self.source, self.target, 1.0)
        for a, b in zip(self.source.parameters(), self.target.parameters()):
            torch.testing.assert_close(a, b, rtol=0, atol=0)

    def test_partial_tau_blends(self):
        expected = [0.75 * t.detach() + 0.25 * s.detach() for s, t in zip(self.source.parameters(), self.target.parameters())]
        polyak_update(self.source, self.target, 0.25)
        for e, t in zip(expected, self.target.parameters()):
            torch.testing.assert_close(e, t)


class AgentTests(SimpleTestCase):
    def observation(self, rng, image=True):
        size = TINY.image_size
        image = rng.integers(0, 256, size=(size, size), dtype=np.uint8) if image else None
        return Observation(image, rng.uniform(-1, 1, size=3), rng.normal(0.0, 0.1, size=6))

    def batch(self, rng, image_size=None):
        transitions = [t for _ in range(3) for t in make_episode(rng, 5, image_size)]
        return Batch.from_transitions(transitions[:TINY.batch_size])

    def test_actions_lie_in_range(self):
        rng = np.random.default_rng(0)
        agent = SACAgent(TINY, 'ours', seed=0)
        for _ in range(20):
            action, corners = agent.select_action(self.observation(rng))
            self.assertEqual(action.shape, (3,))
            self.assertTrue(np.all(np.abs(action) <= 1.0))
            self.assertEqual(corners.shape, (16,))

    def test_same_seed_same_actions(self):
        observation = self.observation(np.random.default_rng(1))
        first = SACAgent(TINY, 'ours', seed=5).select_action(observation)[0]
        second = SACAgent(TINY, 'ours', seed=5).select_action(observation)[0]
        np.testing.assert_array_equal(first, second)

    def test_image_shape_is_checked(self):
        agent = SACAgent(TINY, 'ours', seed=0)
        observation = Observation(np.zeros((8, 8), dtype=np.uint8), np.zeros(3), np.zeros(6))
        with self.assertRaises(ContractError):
            agent.select_action(observation)

    def test_fixed_mode_reads_state_not_images(self):
        agent = SACAgent(TINY, 'fixed', seed=0)
        self.assertFalse(agent.observes_images)
        observation = self.observation(np.random.default_rng(0), image=False)
        action, corners = agent.select_action(observation, full_state=np.zeros(48))
        self.assertIsNone(corners)
        with self.assertRaises(ContractError):
            agent.select_action(observation)

    def test_update_reports_finite_losses(self):
        rng = np.random.default_rng(0)
        agent = SACAgent(TINY, 'fixed', seed=0)
        target_before = [p.clone() for p in agent.q1_target.parameters()]
        report = agent.sac_update(self.batch(rng))
        self.assertTrue(all(np.isfinite(v) for v in report))
        self.assertEqual(report.aux, 0.0)
        self.assertEqual(agent.updates, 1)
        changed = any(not torch.equal(a, b) for a, b in zip(target_before, agent.q1_target.parameters()))
        self.assertTrue(changed)

    def test_update_with_images_and_labels(self):
        rng = np.random.default_rng(0)
        agent = SACAgent(TINY, 'ours', seed=0)
        batch = self.batch(rng, TINY.image_size)
        batch.labels = rng.uniform(0.0, 1.0, size=(len(batch), 16))
        report = agent.sac_update(batch)
        self.assertGreater(report.aux, 0.0)

    def test_unknown_mode_rejected(self):
        with self.assertRaises(ConfigurationError):
            SACAgent(TINY, 'other')
        with self.assertRaises(ConfigurationError):
            SACAgent(LearnerConfig(tau=2.0))


class CheckpointTests(SimpleTestCase):
    def test_weights_and_actions_survive_checkpoint(self):
        rng = np.random.default_rng(0)
        agent = SACAgent(TINY, 'ours', seed=3)
        batch = Batch.from_transitions([t for t in make_episode(rng, 10, TINY.image_size)][:TINY.batch_size])
        agent.sac_update(batch)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'checkpoint.bin')
            save_checkpoint(path, agent, epoch=4, extra={'success_rate': 0.5})
            loaded, manifest = load_checkpoint(path)
        self.assertEqual(manifest['epoch'], 4)
        self.assertEqual(manifest['mode'], 'ours')
        self.assertEqual(loaded.config, agent.config)
        for (name, a), (_, b) in zip(agent.named_tensors(), loaded.named_tensors()):
            torch.testing.assert_close(a, b, rtol=0, atol=0, msg=name)
        observation = Observation(batch.images[0], batch.prev_actions[0], batch.goals[0])
        np.testing.assert_array_equal(
            agent.select_action(observation, deterministic=True)[0],
            loaded.select_action(observation, deterministic=True)[0],
        )

    def test_header_layout(self):
        content = encode_checkpoint(SACAgent(TINY, 'fixed', seed=0))
        self.assertEqual(content[:4], MAGIC)
        manifest, tensors = decode_checkpoint(content)
        self.assertEqual(manifest['version'], 1)
        self.assertEqual(list(tensors), [layer['name'] for layer in manifest['layers']])
        self.assertEqual(tuple(tensors['log_alpha'].shape), (1,))

    def test_corrupt_checkpoints_rejected(self):
        content = encode_checkpoint(SACAgent(TINY, 'fixed', seed=0))
        with self.assertRaises(ParameterError):
            decode_checkpoint(b'XXXX' + content[4:])
        with self.assertRaises(ParameterError):
            decode_checkpoint(content[:-4])
        with self.assertRaises(ParameterError):
            decode_checkpoint(content + b'\x00')
