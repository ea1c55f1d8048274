import logging
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from core.exceptions import ConfigurationError, ProjectionError

logger = logging.getLogger(__name__)

NEAR_PLANE = 1e-6
BACKGROUND = 0


@dataclass(frozen=True)
class CameraConfig:
    eye: tuple = (-0.274, 0.15, 0.424)
    look_at: tuple = (0.15, 0.15, 0.0)
    up: tuple = (0.0, 0.0, 1.0)
    vertical_fov: float = np.deg2rad(45.0)
    image_size: int = 100

    def basis(self):
        eye = np.asarray(self.eye, dtype=np.float64)
        forward = np.asarray(self.look_at, dtype=np.float64) - eye
        norm = np.linalg.norm(forward)
        if not norm > 0:
            raise ConfigurationError('camera eye coincides with look_at')
        if not 0.0 < self.vertical_fov < np.pi:
            raise ConfigurationError(f'vertical_fov must lie in (0, pi), got {self.vertical_fov}')
        if int(self.image_size) != self.image_size or self.image_size < 1:
            raise ConfigurationError(f'image_size must be a positive integer, got {self.image_size}')
        forward = forward / norm
        right = np.cross(forward, np.asarray(self.up, dtype=np.float64))
        rnorm = np.linalg.norm(right)
        if not rnorm > 1e-12:
            raise ConfigurationError('camera up vector is parallel to the view direction')
        right = right / rnorm
        up = np.cross(right, forward)
        return eye, right, up, forward

    @property
    def focal(self):
        # Край вертикального поля зрения попадает в центр крайнего пикселя
        return self.center / np.tan(0.5 * self.vertical_fov)

    @property
    def center(self):
        return 0.5 * (self.image_size - 1)

    @classmethod
    def side_view(cls, target, distance=0.6, elevation=np.deg2rad(45.0), image_size=100):
        # Вид сбоку вдоль оси x, перпендикулярно направлению складывания
        target = np.asarray(target, dtype=np.float64)
        offset = distance * np.array([-np.cos(elevation), 0.0, np.sin(elevation)])
        return cls(eye=tuple(target + offset), look_at=tuple(target), image_size=image_size)


@dataclass(frozen=True)
class VisualConfig:
    light_direction: tuple = (0.0, 0.0, 1.0)
    ambient: float = 0.2
    diffuse: float = 0.8
    pixel_noise_sigma: float = 2.0
    camera_jitter: float = 0.0

    def validate(self):
        if self.ambient < 0 or self.diffuse < 0 or self.ambient + self.diffuse > 1.0 + 1e-12:
            raise ConfigurationError('ambient and diffuse must be non-negative with sum <= 1')
        if self.pixel_noise_sigma < 0:
            raise ConfigurationError('pixel_noise_sigma must be non-negative')
        if self.camera_jitter < 0:
            raise ConfigurationError('camera_jitter must be non-negative')
        return self

    def light(self):
        light = np.asarray(self.light_direction, dtype=np.float64)
        return light / np.linalg.norm(light)


@dataclass(frozen=True)
class VisualRanges:
    eye_offset: tuple = ((-0.02, 0.02), (-0.02, 0.02), (-0.02, 0.02))
    vertical_fov: tuple = (np.deg2rad(42.0), np.deg2rad(48.0))
    light_elevation: tuple = (np.deg2rad(50.0), np.deg2rad(90.0))
    light_azimuth: tuple = (0.0, 2.0 * np.pi)
    ambient: tuple = (0.15, 0.3)
    diffuse: tuple = (0.55, 0.7)
    pixel_noise_sigma: tuple = (1.0, 3.0)
    camera_jitter: tuple = (0.0, 0.005)
    nominal: CameraConfig = field(default_factory=CameraConfig)

    def scalar_ranges(self):
        ranges = {
            'eye_x': self.eye_offset[0],
            'eye_y': self.eye_offset[1],
            'eye_z': self.eye_offset[2],
            'vertical_fov': self.vertical_fov,
            'light_elevation': self.light_elevation,
            'light_azimuth': self.light_azimuth,
            'ambient': self.ambient,
            'diffuse': self.diffuse,
            'pixel_noise_sigma': self.pixel_noise_sigma,
            'camera_jitter': self.camera_jitter,
        }
        for name, (low, high) in ranges.items():
            if low > high:
                raise ConfigurationError(f'inverted range for {name}: [{low}, {high}]')
        if self.ambient[1] + self.diffuse[1] > 1.0 + 1e-12:
            raise ConfigurationError(
                f'ambient and diffuse ranges allow a sum above 1: {self.ambient[1]} + {self.diffuse[1]}'
            )
        return ranges


def sample_visual_config(rng, ranges):
    values = {name: float(rng.uniform(low, high)) for name, (low, high) in ranges.scalar_ranges().items()}
    nominal = ranges.nominal
    eye = np.asarray(nominal.eye) + np.array([values['eye_x'], values['eye_y'], values['eye_z']])
    camera = replace(nominal, eye=tuple(eye), vertical_fov=values['vertical_fov'])

    elevation, azimuth = values['light_elevation'], values['light_azimuth']
    light = (
        np.cos(elevation) * np.cos(azimuth),
        np.cos(elevation) * np.sin(azimuth),
        np.sin(elevation),
    )
    visual = VisualConfig(
        light_direction=light,
        ambient=values['ambient'],
        diffuse=values['diffuse'],
        pixel_noise_sigma=values['pixel_noise_sigma'],
        camera_jitter=values['camera_jitter'],
    ).validate()
    return camera, visual


def jitter_camera(camera, jitter, rng):
    if jitter <= 0:
        return camera
    eye = np.asarray(camera.eye) + rng.uniform(-jitter, jitter, size=3)
    return replace(camera, eye=tuple(eye))


def camera_coordinates(points, cam):
    eye, right, up, forward = cam.basis()
    d = np.atleast_2d(np.asarray(points, dtype=np.float64)) - eye
    return np.stack([d @ right, d @ up, d @ forward], axis=1)


def project(point, cam):
    xc, yc, zc = camera_coordinates(point, cam)[0]
    if zc <= NEAR_PLANE:
        raise ProjectionError('point lies at or behind the camera plane')
    u = cam.center + cam.focal * xc / zc
    v = cam.center - cam.focal * yc / zc
    return float(u), float(v)


def project_many(points, cam):
    coords = camera_coordinates(points, cam)
    depth = coords[:, 2]
    if (depth <= NEAR_PLANE).any():
        raise ProjectionError('point lies at or behind the camera plane')
    u = cam.center + cam.focal * coords[:, 0] / depth
    v = cam.center - cam.focal * coords[:, 1] / depth
    return np.stack([u, v], axis=1)


def _shade(triangle, eye, light, vis):
    p0, p1, p2 = triangle
    normal = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(normal)
    if norm == 0.0:
        return None
    normal /= norm
    # Двусторонняя нормаль: разворачиваем к камере
    if normal @ (eye - p0) < 0:
        normal = -normal
    return vis.ambient + vis.diffuse * max(0.0, float(normal @ light))


def render(positions, triangles, cam, vis, noise_seed=0):
    size = int(cam.image_size)
    eye, right, up, forward = cam.basis()
    light = vis.light()

    positions = np.asarray(positions, dtype=np.float64)
    coords = camera_coordinates(positions, cam)
    depth = coords[:, 2]
    safe = np.where(depth > NEAR_PLANE, depth, 1.0)
    u = cam.center + cam.focal * coords[:, 0] / safe
    v = cam.center - cam.focal * coords[:, 1] / safe

    intensity = np.zeros((size, size))
    inv_depth = np.zeros((size, size))
    pixel_u, pixel_v = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64))

    for tri in np.asarray(triangles):
        if (depth[tri] <= NEAR_PLANE).any():
            continue
        tu, tv = u[tri], v[tri]
        # Пиксель - квадрат со стороной 1 вокруг центра
        u_lo, u_hi = max(0, int(np.ceil(tu.min() - 0.5))), min(size - 1, int(np.floor(tu.max() + 0.5)))
        v_lo, v_hi = max(0, int(np.ceil(tv.min() - 0.5))), min(size - 1, int(np.floor(tv.max() + 0.5)))
        if u_lo > u_hi or v_lo > v_hi:
            continue
        area = (tu[1] - tu[0]) * (tv[2] - tv[0]) - (tu[2] - tu[0]) * (tv[1] - tv[0])
        if area == 0.0:
            continue
        shade = _shade(positions[tri], eye, light, vis)
        if shade is None:
            continue

        pu = pixel_u[v_lo:v_hi + 1, u_lo:u_hi + 1]
        pv = pixel_v[v_lo:v_hi + 1, u_lo:u_hi + 1]
        w0 = ((tu[1] - pu) * (tv[2] - pv) - (tu[2] - pu) * (tv[1] - pv)) / area
        w1 = ((tu[2] - pu) * (tv[0] - pv) - (tu[0] - pu) * (tv[2] - pv)) / area
        w2 = 1.0 - w0 - w1
        # Консервативное покрытие: каждая граница сдвигается на полпикселя наружу
        g0 = np.array([tv[1] - tv[2], tu[2] - tu[1]]) / area
        g1 = np.array([tv[2] - tv[0], tu[0] - tu[2]]) / area
        g2 = -(g0 + g1)
        inside = (
            (w0 + 0.5 * np.abs(g0).sum() >= 0)
            & (w1 + 0.5 * np.abs(g1).sum() >= 0)
            & (w2 + 0.5 * np.abs(g2).sum() >= 0)
        )
        if not inside.any():
            continue

        # Перспективно-корректная интерполяция через 1/z, за краем ограничена значениями в вершинах
        inv_vertex = 1.0 / depth[tri]
        inv_z = np.clip(
            w0 * inv_vertex[0] + w1 * inv_vertex[1] + w2 * inv_vertex[2],
            inv_vertex.min(), inv_vertex.max(),
        )
        window_depth = inv_depth[v_lo:v_hi + 1, u_lo:u_hi + 1]
        closer = inside & (inv_z > window_depth)
        window_depth[closer] = inv_z[closer]
        intensity[v_lo:v_hi + 1, u_lo:u_hi + 1][closer] = shade

    covered = inv_depth > 0
    image = np.where(covered, np.round(255.0 * np.clip(intensity, 0.0, 1.0)), float(BACKGROUND))
    if vis.pixel_noise_sigma > 0:
        rng = np.random.default_rng(noise_seed)
        image = image + rng.normal(0.0, vis.pixel_noise_sigma, size=image.shape)
    return np.clip(np.round(image), 0, 255).astype(np.uint8)


def corner_labels(points, cam):
    """Нормированные координаты (u, v) в [0, 1] для вспомогательной головы."""
    uv = project_many(points, cam)
    return np.clip((uv + 0.5) / cam.image_size, 0.0, 1.0).ravel()


def write_pgm(image, path):
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode='L').save(path, format='PPM')
