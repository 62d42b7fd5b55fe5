"""
Геометрические типы: векторы, лучи, боксы и позы камеры

Все координаты мировые, мировой куб - [-1, 1]^3, ось z смотрит вверх.
"""

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
import numpy.typing as npt

Vec3 = npt.NDArray[np.float64]


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=np.float64)


def normalize(v: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class Ray:
    origin: Vec3
    direction: Vec3

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.origin)) and np.all(np.isfinite(self.direction))):
            raise ValueError("Компоненты луча должны быть конечными")
        if abs(float(np.linalg.norm(self.direction)) - 1.0) > 1e-9:
            raise ValueError("Направление луча должно быть единичным")

    def at(self, t: float) -> Vec3:
        return self.origin + t * self.direction


@dataclass(frozen=True, eq=False)
class RayBatch:
    """Лучи камеры в построчном порядке пикселей, origins и directions - массивы (N, 3)"""
    origins: npt.NDArray[np.float64]
    directions: npt.NDArray[np.float64]
    width: int
    height: int
    pose: Optional["CameraPose"] = None

    def __post_init__(self) -> None:
        if self.origins.shape != (self.width * self.height, 3) or self.directions.shape != self.origins.shape:
            raise ValueError(f"Форма лучей {self.origins.shape} не совпадает с разрешением {self.width}x{self.height}")

    def __len__(self) -> int:
        return self.origins.shape[0]

    def __iter__(self) -> Iterator[Ray]:
        return (Ray(o, d) for o, d in zip(self.origins, self.directions))


@dataclass(frozen=True, eq=False)
class Aabb:
    min_corner: Vec3
    max_corner: Vec3

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.min_corner)) and np.all(np.isfinite(self.max_corner))):
            raise ValueError("Углы бокса должны быть конечными")
        if not np.all(self.min_corner < self.max_corner):
            raise ValueError(f"Бокс вырожден: {self.min_corner} !< {self.max_corner}")

    @property
    def center(self) -> Vec3:
        return (self.min_corner + self.max_corner) / 2

    @property
    def size(self) -> Vec3:
        return self.max_corner - self.min_corner

    @property
    def half_extent(self) -> Vec3:
        return self.size / 2

    def contains(self, points: npt.NDArray[np.float64]) -> npt.NDArray[np.bool_]:
        """Принадлежность замкнутому боксу, points - (3,) или (N, 3)"""
        return np.all((points >= self.min_corner) & (points <= self.max_corner), axis=-1)

    def contains_box(self, other: "Aabb") -> bool:
        return bool(np.all(self.min_corner <= other.min_corner) and np.all(other.max_corner <= self.max_corner))

    def overlap_volume(self, other: "Aabb") -> float:
        sides = np.minimum(self.max_corner, other.max_corner) - np.maximum(self.min_corner, other.min_corner)
        return float(np.prod(np.clip(sides, 0.0, None)))

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    def __repr__(self) -> str:
        return f"Aabb({self.min_corner.tolist()}, {self.max_corner.tolist()})"


WORLD_BOX = Aabb(vec3(-1.0, -1.0, -1.0), vec3(1.0, 1.0, 1.0))


@dataclass(frozen=True, eq=False)
class CameraPose:
    position: Vec3
    look_at: Vec3
    up: Vec3
    fov_y: float

    def __post_init__(self) -> None:
        if np.allclose(self.position, self.look_at, rtol=0.0, atol=0.0):
            raise ValueError("Камера не может смотреть сама на себя (position == look_at)")
        if not 0 < self.fov_y < np.pi:
            raise ValueError("fov_y должен лежать в (0, π)")

    def translated(self, offset: Vec3, look_at: Vec3) -> "CameraPose":
        return CameraPose(self.position + offset, look_at, self.up, self.fov_y)
