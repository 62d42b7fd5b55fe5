"""
Оракулы градиента по картинке: по отрисованному виду объекта возвращают котангенс dL/dI
той же формы и, если умеют, оценку лосса.

SyntheticDenoiserOracle повторяет форму градиента дистилляции w(t) * (ε_φ - ε) с предсказанным шумом
ε_φ = ε + κ (I - I_target): остается только притяжение к целевой картинке.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import numpy.typing as npt

from configs.config import OracleConfig
from domain.geometry import Aabb, CameraPose, Vec3, vec3
from domain.render import RenderedImage
from helpers import imagehelper
from service.geometry import generate_camera_rays

Image = npt.NDArray[np.float64]

PALETTE = [
    vec3(0.9, 0.3, 0.2),
    vec3(0.2, 0.6, 0.9),
    vec3(0.3, 0.8, 0.3),
    vec3(0.9, 0.8, 0.2),
    vec3(0.7, 0.3, 0.8),
    vec3(0.2, 0.8, 0.8),
    vec3(0.9, 0.5, 0.7),
]
AZIMUTH_BINS = 8


@dataclass(frozen=True)
class GuidanceResult:
    cotangent: Image
    loss: Optional[float] = None


class TargetSource(ABC):
    """Откуда брать целевую картинку объекта для данного вида"""

    @abstractmethod
    def image_for(self, object_id: int, pose: CameraPose, width: int, height: int) -> Image:
        raise NotImplementedError


class GuidanceOracle(ABC):

    @abstractmethod
    def gradient_of(self, image: RenderedImage, object_id: int) -> GuidanceResult:
        raise NotImplementedError

    def random_state(self) -> Optional[dict[str, Any]]:
        """Состояние внутреннего генератора для чекпоинта, None - оракул детерминирован"""
        return None

    def restore_random_state(self, state: dict[str, Any]) -> None:
        return None


def azimuth_bin(pose: CameraPose, bins: int = AZIMUTH_BINS) -> int:
    offset = pose.position - pose.look_at
    angle = math.atan2(offset[1], offset[0])
    return int(math.floor((angle + math.pi) / (2 * math.pi) * bins)) % bins


class SphereSilhouetteTargets(TargetSource):
    """Аналитический силуэт непрозрачной сферы своего цвета для каждого объекта"""

    def __init__(self, spheres: Sequence[tuple[Vec3, float, Vec3]], background: Vec3) -> None:
        self.spheres = list(spheres)
        self.background = np.asarray(background, dtype=np.float64)

    @classmethod
    def inscribed(cls, boxes: Sequence[Aabb], s_sigma: float, background: Vec3) -> "SphereSilhouetteTargets":
        """Сфера радиуса s_σ * min(полуразмеров) в центре бокса - внутри начального эллипсоида плотности"""
        return cls(
            [(box.center, s_sigma * float(np.min(box.half_extent)), PALETTE[i % len(PALETTE)])
             for i, box in enumerate(boxes)],
            background,
        )

    def image_for(self, object_id: int, pose: CameraPose, width: int, height: int) -> Image:
        center, radius, color = self.spheres[object_id]
        rays = generate_camera_rays(pose, (width, height))
        to_center = center - rays.origins
        along = np.sum(to_center * rays.directions, axis=-1)
        closest = np.sum(to_center ** 2, axis=-1) - along ** 2
        hit = (closest < radius ** 2) & (along > 0)
        image = np.where(hit[:, None], color[None, :], self.background[None, :])
        return image.reshape(height, width, 3)


class StoredTargets(TargetSource):
    """PNG-файлы <object_id>_<azimuth_bin>.png, разрешение должно совпадать с рендером"""

    def __init__(self, directory: Path) -> None:
        self.directory = directory
        self.cache: dict[tuple[int, int], Image] = {}

    def image_for(self, object_id: int, pose: CameraPose, width: int, height: int) -> Image:
        key = (object_id, azimuth_bin(pose))
        if key not in self.cache:
            path = self.directory / f"{object_id}_{key[1]}.png"
            if not path.is_file():
                raise FileNotFoundError(f"Нет целевой картинки {path}")
            self.cache[key] = imagehelper.read_png(path)
        target = self.cache[key]
        if target.shape != (height, width, 3):
            raise ValueError(f"Целевая картинка {target.shape} не совпадает с рендером {width}x{height}")
        return target


def _pixel_count(image: RenderedImage) -> int:
    return image.width * image.height * 3


class PhotometricOracle(GuidanceOracle):
    """Обычный L2 к целевой картинке: лосс 0.5 * mean((I - T)^2) и его точный градиент"""

    def __init__(self, targets: TargetSource) -> None:
        self.targets = targets

    def gradient_of(self, image: RenderedImage, object_id: int) -> GuidanceResult:
        if image.pose is None:
            raise ValueError("Оракулу нужна поза камеры отрисованного вида")
        residual = image.rgb - self.targets.image_for(object_id, image.pose, image.width, image.height)
        return GuidanceResult(residual / _pixel_count(image), 0.5 * float(np.mean(residual ** 2)))


class SyntheticDenoiserOracle(GuidanceOracle):
    """
    Предсказанный шум ε_φ = ε + κ (I - I_target), поэтому w(t) * (ε_φ - ε) = w(t) κ (I - I_target)
    для любого ε: шум не сэмплируется. Из генератора noise_seed тянется только t, по одному на вызов.
    """

    def __init__(
            self,
            targets: TargetSource,
            kappa: float = 1.0,
            timestep_range: tuple[float, float] = (0.02, 0.98),
            noise_seed: int = 0,
            weight_fn: Callable[[float], float] = lambda t: 1.0
    ) -> None:
        if kappa <= 0:
            raise ValueError("kappa должна быть больше нуля")
        self.targets = targets
        self.kappa = kappa
        self.timestep_range = timestep_range
        self.weight_fn = weight_fn
        self.rng = np.random.default_rng(noise_seed)

    def gradient_of(self, image: RenderedImage, object_id: int) -> GuidanceResult:
        if image.pose is None:
            raise ValueError("Оракулу нужна поза камеры отрисованного вида")
        target = self.targets.image_for(object_id, image.pose, image.width, image.height)
        weight = self.weight_fn(self.rng.uniform(*self.timestep_range))
        residual = image.rgb - target
        cotangent = weight * self.kappa * residual / _pixel_count(image)
        loss = weight * self.kappa * 0.5 * float(np.mean(residual ** 2))
        return GuidanceResult(cotangent, loss)

    def random_state(self) -> Optional[dict[str, Any]]:
        return self.rng.bit_generator.state

    def restore_random_state(self, state: dict[str, Any]) -> None:
        self.rng.bit_generator.state = state


def build_targets(cfg: OracleConfig, boxes: Sequence[Aabb], s_sigma: float, background: Vec3) -> TargetSource:
    if cfg.targets is not None:
        return StoredTargets(cfg.targets)
    return SphereSilhouetteTargets.inscribed(boxes, s_sigma, background)


def build_oracle(cfg: OracleConfig, boxes: Sequence[Aabb], s_sigma: float, background: Vec3) -> GuidanceOracle:
    targets = build_targets(cfg, boxes, s_sigma, background)
    logging.info(f"Оракул {cfg.kind}, цели: {cfg.targets or 'аналитические сферы'}")
    if cfg.kind == "photometric":
        return PhotometricOracle(targets)
    return SyntheticDenoiserOracle(targets, cfg.kappa, cfg.timestep_range, cfg.noise_seed)
