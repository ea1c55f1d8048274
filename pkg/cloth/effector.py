from dataclasses import dataclass

import numpy as np

from core.exceptions import NumericError, ParameterError
from .physics import GRAVITY

FILTER_GAIN = 0.03
FILTER_KEEP = 0.97


@dataclass
class EffectorState:
    position: np.ndarray
    velocity: np.ndarray
    mass: float = 1.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        if not self.mass > 0:
            raise ParameterError(f'effector mass must be positive, got {self.mass}')


@dataclass(frozen=True)
class ControllerGains:
    kp: np.ndarray
    kd: np.ndarray

    def __post_init__(self):
        kp = np.broadcast_to(np.asarray(self.kp, dtype=np.float64), (3,)).copy()
        kd = np.broadcast_to(np.asarray(self.kd, dtype=np.float64), (3,)).copy()
        if not (kp > 0).all() or not (kd > 0).all():
            raise ParameterError('controller gains must be positive')
        object.__setattr__(self, 'kp', kp)
        object.__setattr__(self, 'kd', kd)

    @classmethod
    def critically_damped(cls, kp=300.0, mass=1.0):
        return cls(kp=kp, kd=2.0 * np.sqrt(kp * mass))


def interpolate_setpoint(x_t, a_t, x_tj):
    # Экспоненциальный фильтр: шаг к цели x_t + a_t
    target = np.asarray(x_t, dtype=np.float64) + np.asarray(a_t, dtype=np.float64)
    return FILTER_GAIN * target + FILTER_KEEP * np.asarray(x_tj, dtype=np.float64)


def osc_command(state, setpoint, gains, gravity=GRAVITY):
    error = np.asarray(setpoint, dtype=np.float64) - state.position
    return gains.kp * error - gains.kd * state.velocity + state.mass * (-np.asarray(gravity))


def step_effector(state, force, dt, gravity=GRAVITY, external=None):
    if dt <= 0:
        raise ParameterError(f'dt must be positive, got {dt}')
    total = np.asarray(force, dtype=np.float64) + state.mass * np.asarray(gravity)
    if external is not None:
        total = total + external
    if not np.isfinite(total).all():
        raise NumericError('non-finite force on effector')
    velocity = state.velocity + total / state.mass * dt
    position = state.position + velocity * dt
    return EffectorState(position, velocity, state.mass)
