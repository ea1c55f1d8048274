import torch
import torch.nn as nn
import torch.nn.functional as F

from folding.env import ACTION_DIM, GOAL_DIM, LABEL_DIM, STATE_DIM

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0


def mlp(in_features, hidden, out_features):
    layers = []
    size = in_features
    for width in hidden:
        layers += [nn.Linear(size, width), nn.ReLU()]
        size = width
    layers.append(nn.Linear(size, out_features))
    return nn.Sequential(*layers)


def conv_output_size(size, layers):
    for _ in range(layers):
        size = (size + 2 - 3) // 2 + 1
    return size


class ImageEncoder(nn.Module):
    """h1: три свертки с шагом 2 и линейный слой в латентный вектор."""

    def __init__(self, image_size=100, channels=(8, 16, 32), latent=128):
        super().__init__()
        self.image_size = image_size
        convs = []
        previous = 1
        for width in channels:
            convs += [nn.Conv2d(previous, width, kernel_size=3, stride=2, padding=1), nn.ReLU()]
            previous = width
        self.convs = nn.Sequential(*convs)
        side = conv_output_size(image_size, len(channels))
        self.project = nn.Linear(previous * side * side, latent)

    def forward(self, image):
        # uint8 (B, H, W) -> float в [0, 1]
        x = image.to(self.project.weight.dtype).unsqueeze(1) / 255.0
        x = self.convs(x).flatten(start_dim=1)
        return F.relu(self.project(x))


class GaussianHead(nn.Module):
    def __init__(self, in_features, hidden, action_dim=ACTION_DIM):
        super().__init__()
        self.body = mlp(in_features, hidden, 2 * action_dim)
        self.action_dim = action_dim

    def forward(self, x):
        mean, log_std = self.body(x).split(self.action_dim, dim=-1)
        return mean, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)


class PolicyNet(nn.Module):
    observes_images = True

    def __init__(self, image_size=100, channels=(8, 16, 32), latent=128, hidden=(256, 256),
                 goal_dim=GOAL_DIM, label_dim=LABEL_DIM):
        super().__init__()
        self.encoder = ImageEncoder(image_size, channels, latent)
        self.actor_head = GaussianHead(latent + ACTION_DIM + goal_dim, hidden)
        self.corner_head = mlp(latent, hidden, label_dim)

    def forward(self, image, prev_action, goal):
        latent = self.encoder(image)
        mean, log_std = self.actor_head(torch.cat([latent, prev_action, goal], dim=-1))
        corners = torch.sigmoid(self.corner_head(latent))
        return mean, log_std, corners


class StatePolicyNet(nn.Module):
    # Актор базовой линии fixed: видит положения и скорости точек, изображений нет
    observes_images = False

    def __init__(self, state_dim=STATE_DIM, hidden=(256, 256), goal_dim=GOAL_DIM):
        super().__init__()
        self.actor_head = GaussianHead(state_dim + ACTION_DIM + goal_dim, hidden)

    def forward(self, full_state, prev_action, goal):
        mean, log_std = self.actor_head(torch.cat([full_state, prev_action, goal], dim=-1))
        return mean, log_std, None


class QNet(nn.Module):
    def __init__(self, state_dim=STATE_DIM, hidden=(256, 256), goal_dim=GOAL_DIM):
        super().__init__()
        self.body = mlp(state_dim + goal_dim + ACTION_DIM, hidden, 1)

    def forward(self, full_state, goal, action):
        return self.body(torch.cat([full_state, goal, action], dim=-1)).squeeze(-1)


def parameter_count(module):
    return sum(p.numel() for p in module.parameters())
