"""Ткань как сетка точечных масс на пружинах с демпферами.

Один угол жестко связан с захватом. Ткань лежит на одной статической опоре (стол)
с кулоновским трением, коэффициент трения входит в параметры ткани. Других
столкновений и самопересечений модель не учитывает.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import NumericError, ParameterError

logger = logging.getLogger(__name__)

GRAVITY = np.array([0.0, 0.0, -9.81])

GRASPED_INDEX = 0

SPRING_KINDS = ('struct', 'shear', 'bend')

PHYSICAL_FIELDS = (
    'mass_per_point', 'k_struct', 'k_shear', 'k_bend',
    'damping', 'air_drag', 'friction',
)


@dataclass(frozen=True)
class ClothParams:
    grid_n: int = 9
    side_length: float = 0.3
    mass_per_point: float = 0.004
    k_struct: float = 40.0
    k_shear: float = 10.0
    k_bend: float = 4.0
    damping: float = 0.04
    air_drag: float = 0.002
    friction: float = 0.5

    def validate(self):
        if int(self.grid_n) != self.grid_n or self.grid_n < 3:
            raise ParameterError(f'grid_n must be an integer >= 3, got {self.grid_n}')
        if not 0.05 < self.side_length < 1.0:
            raise ParameterError(f'side_length must lie in (0.05, 1.0) m, got {self.side_length}')
        for name in PHYSICAL_FIELDS:
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ParameterError(f'{name} must be positive, got {value}')
        return self

    @property
    def spacing(self):
        return self.side_length / (self.grid_n - 1)

    def stiffness(self, kind):
        return getattr(self, f'k_{kind}')

    def as_dict(self):
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass
class ClothState:
    positions: np.ndarray
    velocities: np.ndarray
    grasped_index: int = GRASPED_INDEX

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.positions.shape != self.velocities.shape:
            raise ParameterError('positions and velocities must have equal length')

    def copy(self):
        return ClothState(self.positions.copy(), self.velocities.copy(), self.grasped_index)

    def is_finite(self):
        return bool(np.isfinite(self.positions).all() and np.isfinite(self.velocities).all())


@dataclass
class Topology:
    index_a: np.ndarray
    index_b: np.ndarray
    rest_length: np.ndarray
    kind: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kind is None:
            self.kind = np.array(['struct'] * len(self.index_a), dtype=object)
        self.kind_code = np.array([SPRING_KINDS.index(k) for k in self.kind], dtype=np.int64)

    @classmethod
    def from_springs(cls, springs):
        springs = list(springs)
        pairs = set()
        for a, b, _, _ in springs:
            key = (min(a, b), max(a, b))
            if key in pairs:
                raise ParameterError(f'duplicate spring between {a} and {b}')
            pairs.add(key)
        return cls(
            index_a=np.array([s[0] for s in springs], dtype=np.int64),
            index_b=np.array([s[1] for s in springs], dtype=np.int64),
            rest_length=np.array([s[2] for s in springs], dtype=np.float64),
            kind=np.array([s[3] for s in springs], dtype=object),
        )

    @property
    def springs(self):
        return list(zip(self.index_a.tolist(), self.index_b.tolist(),
                        self.rest_length.tolist(), self.kind.tolist()))

    def count(self, kind):
        return int(np.sum(self.kind == kind))

    def stiffness(self, params):
        table = np.array([params.stiffness(kind) for kind in SPRING_KINDS])
        return table[self.kind_code]


@dataclass(frozen=True)
class Support:
    """Горизонтальная опора (стол) под тканью."""
    height: float = 0.0
    friction: float = 0.5


def grid_index(grid_n, row, col):
    return row * grid_n + col


def grid_triangles(grid_n):
    # Два треугольника на ячейку сетки
    tris = []
    for row in range(grid_n - 1):
        for col in range(grid_n - 1):
            i = grid_index(grid_n, row, col)
            tris.append((i, i + 1, i + grid_n + 1))
            tris.append((i, i + grid_n + 1, i + grid_n))
    return np.array(tris, dtype=np.int64)


def build_cloth(params, origin=(0.0, 0.0, 0.0)):
    params.validate()
    n = params.grid_n
    s = params.spacing
    origin = np.asarray(origin, dtype=np.float64)

    cols, rows = np.meshgrid(np.arange(n), np.arange(n))
    positions = np.zeros((n * n, 3))
    positions[:, 0] = cols.ravel() * s
    positions[:, 1] = rows.ravel() * s
    positions += origin

    springs = []
    for row in range(n):
        for col in range(n):
            i = grid_index(n, row, col)
            if col + 1 < n:
                springs.append((i, i + 1, 'struct'))
            if row + 1 < n:
                springs.append((i, i + n, 'struct'))
            if col + 1 < n and row + 1 < n:
                springs.append((i, i + n + 1, 'shear'))
                springs.append((i + 1, i + n, 'shear'))
            if col + 2 < n:
                springs.append((i, i + 2, 'bend'))
            if row + 2 < n:
                springs.append((i, i + 2 * n, 'bend'))

    topology = Topology.from_springs(
        (a, b, float(np.linalg.norm(positions[b] - positions[a])), kind)
        for a, b, kind in springs
    )
    state = ClothState(positions, np.zeros_like(positions))
    return state, topology


def spring_forces(state, topology, params):
    x = state.positions
    v = state.velocities
    a, b = topology.index_a, topology.index_b
    d = x[b] - x[a]
    length = np.linalg.norm(d, axis=1)
    direction = np.zeros_like(d)
    # Совпадающие точки не дают силы
    nonzero = length > 0.0
    direction[nonzero] = d[nonzero] / length[nonzero, None]

    k = topology.stiffness(params)
    stretch = np.where(nonzero, length - topology.rest_length, 0.0)
    relative_speed = np.einsum('ij,ij->i', v[b] - v[a], direction)
    magnitude = k * stretch + params.damping * relative_speed
    f = magnitude[:, None] * direction

    forces = np.zeros_like(x)
    np.add.at(forces, a, f)
    np.add.at(forces, b, -f)
    return forces


def accumulate_forces(state, topology, params, gravity=GRAVITY):
    forces = spring_forces(state, topology, params)
    forces += params.mass_per_point * np.asarray(gravity, dtype=np.float64)
    forces -= params.air_drag * state.velocities
    return forces


def _apply_support(positions, velocities, support):
    below = positions[:, 2] < support.height
    if not below.any():
        return
    vn = velocities[below, 2]
    # Снимаем нормальную скорость, трение гасит касательную
    dv_n = np.maximum(-vn, 0.0)
    positions[below, 2] = support.height
    velocities[below, 2] = np.maximum(vn, 0.0)
    tangential = velocities[below, :2]
    speed = np.linalg.norm(tangential, axis=1)
    scale = np.ones_like(speed)
    moving = speed > 0.0
    scale[moving] = np.maximum(0.0, 1.0 - support.friction * dv_n[moving] / speed[moving])
    velocities[below, :2] = tangential * scale[:, None]


def step_cloth(state, forces, params, dt, anchor=None, support=None):
    if dt <= 0:
        raise ParameterError(f'dt must be positive, got {dt}')
    forces = np.asarray(forces, dtype=np.float64)
    bad = ~np.isfinite(forces).all(axis=1)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise NumericError(f'non-finite force on cloth point {index}', index=index)

    velocities = state.velocities + forces / params.mass_per_point * dt
    positions = state.positions + velocities * dt

    if support is not None:
        _apply_support(positions, velocities, support)

    if anchor is not None:
        anchor_position, anchor_velocity = anchor
        positions[state.grasped_index] = anchor_position
        velocities[state.grasped_index] = anchor_velocity

    return ClothState(positions, velocities, state.grasped_index)


def tracked_indices(grid_n):
    n = grid_n
    m = (n - 1) // 2
    return [
        grid_index(n, 0, n - 1),   # p0: угол напротив захвата по x
        grid_index(n, 0, 0),       # p1: захваченный угол
        grid_index(n, n - 1, 0),
        grid_index(n, n - 1, n - 1),
        grid_index(n, 0, m),
        grid_index(n, n - 1, m),
        grid_index(n, m, 0),
        grid_index(n, m, n - 1),
    ]


def tracked_points(state, grid_n):
    idx = tracked_indices(grid_n)
    return [(state.positions[i].copy(), state.velocities[i].copy()) for i in idx]


def tracked_vector(state, grid_n):
    idx = tracked_indices(grid_n)
    return np.concatenate([state.positions[idx], state.velocities[idx]], axis=1).ravel()


def mechanical_energy(state, topology, params, gravity=GRAVITY):
    x, v = state.positions, state.velocities
    kinetic = 0.5 * params.mass_per_point * float(np.sum(v * v))
    length = np.linalg.norm(x[topology.index_b] - x[topology.index_a], axis=1)
    elastic = 0.5 * float(np.sum(topology.stiffness(params) * (length - topology.rest_length) ** 2))
    potential = -params.mass_per_point * float(np.sum(x @ np.asarray(gravity, dtype=np.float64)))
    return kinetic + elastic + potential
