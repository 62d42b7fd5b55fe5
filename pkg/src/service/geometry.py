"""
Операции над геометрией: пересечение луча с боксом, перевод боксов из раскладки в мир,
лучи камеры и выбор поз камеры (обычных, объектно-центричных и для поворотного стола)
"""

import math
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt

from configs.config import CameraSamplerConfig
from domain.geometry import Aabb, CameraPose, Ray, RayBatch, Vec3, WORLD_BOX, normalize, vec3
from domain.layout import LAYOUT_EXTENT, SceneLayout, check_box6

Z_UP = vec3(0.0, 0.0, 1.0)


def ray_box_intersect_batch(
        origins: npt.NDArray[np.float64],
        directions: npt.NDArray[np.float64],
        box: Aabb
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.bool_]]:
    """Метод плит для пачки лучей: (t_entry, t_exit, hit); t_entry зажат в 0 для лучей изнутри бокса"""
    with np.errstate(divide="ignore", invalid="ignore"):
        # -0.0 + 0.0 = +0.0: знак нуля не должен выбирать сторону бесконечности
        inverse = 1.0 / (directions + 0.0)
        t0 = (box.min_corner - origins) * inverse
        t1 = (box.max_corner - origins) * inverse
    # 0 * inf: луч параллелен плите и начинается на ее границе
    t0 = np.where(np.isnan(t0), -np.inf, t0)
    t1 = np.where(np.isnan(t1), np.inf, t1)
    t_near = np.max(np.minimum(t0, t1), axis=-1)
    t_far = np.min(np.maximum(t0, t1), axis=-1)
    t_entry = np.maximum(t_near, 0.0)
    hit = (t_far > 0.0) & (t_far > t_entry) & (t_near <= t_far)
    return t_entry, t_far, hit


def ray_box_intersect(ray: Ray, box: Aabb) -> Optional[tuple[float, float]]:
    t_entry, t_exit, hit = ray_box_intersect_batch(ray.origin[None], ray.direction[None], box)
    if not hit[0]:
        return None
    return float(t_entry[0]), float(t_exit[0])


def aabb_from_layout(box6: Sequence[int], layout_extent: int = LAYOUT_EXTENT) -> Aabb:
    check_box6(list(box6), layout_extent)
    half = layout_extent / 2
    values = np.asarray(box6, dtype=np.float64)
    min_corner = values[:3] / half - 1.0
    return Aabb(min_corner, min_corner + values[3:] / half)


def layout_from_aabb(box: Aabb, layout_extent: int = LAYOUT_EXTENT) -> list[int]:
    half = layout_extent / 2
    origin = np.rint((box.min_corner + 1.0) * half).astype(int)
    size = np.rint(box.size * half).astype(int)
    return [int(v) for v in origin] + [int(v) for v in size]


def layout_boxes(layout: SceneLayout) -> list[Aabb]:
    return [aabb_from_layout(obj.box) for obj in layout.objects]


def camera_basis(pose: CameraPose) -> tuple[Vec3, Vec3, Vec3]:
    forward = normalize(pose.look_at - pose.position)
    right = np.cross(forward, pose.up)
    if np.linalg.norm(right) < 1e-12:
        # up параллелен взгляду, берем любую перпендикулярную ось
        fallback = vec3(1.0, 0.0, 0.0) if abs(forward[0]) < 0.9 else vec3(0.0, 1.0, 0.0)
        right = np.cross(forward, fallback)
    right = normalize(right)
    return forward, right, np.cross(right, forward)


def generate_camera_rays(pose: CameraPose, resolution: tuple[int, int]) -> RayBatch:
    """Пинхол-камера, по лучу через центр каждого пикселя, строки сверху вниз"""
    width, height = resolution
    if width < 1 or height < 1:
        raise ValueError(f"Разрешение должно быть положительным, получено {resolution}")
    forward, right, up = camera_basis(pose)
    tan_half = math.tan(pose.fov_y / 2)
    aspect = width / height
    xs = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * tan_half * aspect
    ys = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * tan_half
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="xy")
    directions = forward + grid_x.reshape(-1, 1) * right + grid_y.reshape(-1, 1) * up
    directions = normalize(directions)
    origins = np.broadcast_to(pose.position, directions.shape).copy()
    return RayBatch(origins, directions, width, height, pose)


def spherical_pose(center: Vec3, distance: float, elevation: float, azimuth: float, fov_y: float) -> CameraPose:
    offset = distance * vec3(
        math.cos(elevation) * math.cos(azimuth),
        math.cos(elevation) * math.sin(azimuth),
        math.sin(elevation),
    )
    return CameraPose(center + offset, center.copy(), Z_UP.copy(), fov_y)


def sample_base_pose(rng: np.random.Generator, center: Vec3, cfg: CameraSamplerConfig) -> CameraPose:
    distance = rng.uniform(*cfg.distance_range)
    elevation = rng.uniform(*cfg.elevation_range)
    azimuth = rng.uniform(*cfg.azimuth_range)
    return spherical_pose(center, distance, elevation, azimuth, cfg.fov_y)


def camera_offsets(scene_box: Aabb, object_box: Aabb, principal_point: Vec3, beta: float) -> tuple[Vec3, Vec3]:
    """d_center = c_i - c_scene, d_scale = (c_i - p) * (max l_scene - max l_i) / (beta * max l_scene)"""
    scene_side = float(np.max(scene_box.size))
    object_side = float(np.max(object_box.size))
    d_center = object_box.center - scene_box.center
    d_scale = (object_box.center - principal_point) * (scene_side - object_side) / (beta * scene_side)
    return d_center, d_scale


def sample_object_centric_pose(
        rng: np.random.Generator,
        scene_box: Aabb,
        object_box: Aabb,
        cfg: CameraSamplerConfig
) -> CameraPose:
    base = sample_base_pose(rng, scene_box.center, cfg)
    d_center, d_scale = camera_offsets(scene_box, object_box, base.look_at, cfg.beta)
    return base.translated(d_center + d_scale, object_box.center)


def turntable_poses(
        center: Vec3,
        distance: float,
        fov_y: float,
        n_views: int = 8,
        elevation: float = math.radians(15)
) -> list[CameraPose]:
    return [
        spherical_pose(center, distance, elevation, 2 * math.pi * i / n_views, fov_y)
        for i in range(n_views)
    ]


def probe_poses(cfg: CameraSamplerConfig, n_views: int, box: Aabb = WORLD_BOX) -> list[CameraPose]:
    """Фиксированные виды для метрик: поворотный стол вокруг центра бокса на средней дистанции"""
    distance = sum(cfg.distance_range) / 2
    return turntable_poses(box.center, distance, cfg.fov_y, n_views)
