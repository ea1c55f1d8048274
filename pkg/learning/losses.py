import math

import torch
import torch.nn.functional as F
from torch.distributions import Normal


def squashed_sample(mean, log_std, noise):
    """Репараметризованная выборка tanh-гауссианы и ее логарифм плотности."""
    std = log_std.exp()
    pre_tanh = mean + std * noise
    action = torch.tanh(pre_tanh)
    log_prob = Normal(mean, std).log_prob(pre_tanh).sum(dim=-1)
    # log(1 - tanh(u)^2), устойчивая форма
    correction = 2.0 * (math.log(2.0) - pre_tanh - F.softplus(-2.0 * pre_tanh))
    return action, log_prob - correction.sum(dim=-1)


def critic_target(reward, done, next_q1, next_q2, next_log_prob, alpha, gamma):
    soft_value = torch.min(next_q1, next_q2) - alpha * next_log_prob
    return reward + gamma * (1.0 - done) * soft_value


def critic_loss(q, target):
    return F.mse_loss(q, target.detach())


def actor_loss(alpha, log_prob, q1, q2, corners=None, labels=None, aux_weight=0.0):
    loss = (alpha * log_prob - torch.min(q1, q2)).mean()
    if aux_weight and corners is not None and labels is not None:
        loss = loss + aux_weight * aux_loss(corners, labels)
    return loss


def aux_loss(corners, labels):
    return F.mse_loss(corners, labels)


def temperature_loss(log_alpha, log_prob, target_entropy):
    return -(log_alpha * (log_prob + target_entropy).detach()).mean()
